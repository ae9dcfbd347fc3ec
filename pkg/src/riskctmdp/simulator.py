"""Monte Carlo simulation of the controlled process under a stationary policy.

Random streams
--------------
Path ``i`` of a run with master seed ``s`` draws from Philox4x64-10
keyed by the two 64-bit words ``(s, i)`` with the counter starting at
zero. Uniforms are numpy's double conversion ``(u64 >> 11) * 2**-53``.
Sojourn times use inversion, ``-log(1 - u) / rate``, and categorical
draws take the first index whose cumulative probability exceeds ``u``.
Each decision consumes exactly one uniform: one per impulse, and per
natural jump one for the sojourn followed by one for the target.

Paths alive at the horizon contribute ``exp(cost so far)``. Costs are
nonnegative, so such truncation can only bias the estimate downward.
"""

from __future__ import annotations

import bisect
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .model import CtmdpModel, exit_rates
from .oracle import linear_policy_value
from .solver import Impulse, StationaryPolicy
from .tilde import build_tilde

__all__ = [
    "Termination",
    "Event",
    "PathRecord",
    "SimulationReport",
    "simulate_path",
    "estimate_utility",
    "suggest_horizon",
    "utility_second_moment",
    "path_stream",
    "format_trace",
    "DEFAULT_HORIZON",
    "DEFAULT_IMPULSE_CAP",
    "DEFAULT_JUMP_CAP",
]

DEFAULT_HORIZON = 50.0
DEFAULT_IMPULSE_CAP = 10_000
DEFAULT_JUMP_CAP = 100_000
_MASK64 = (1 << 64) - 1


class Termination(str, enum.Enum):
    ABSORBED = "absorbed_zero_cost"
    HORIZON = "horizon_reached"
    IMPULSE_CAP = "impulse_cap_hit"
    JUMP_CAP = "jump_cap_hit"


NATURAL_JUMP = "natural_jump"
IMPULSE_BLOCK = "impulse_block"


@dataclass
class Event:
    time: float
    kind: str
    pre_state: int
    intervention: list  # (impulse action, post-impulse state) pairs; empty for natural jumps
    post_state: int
    cost: float
    action: Optional[int] = None  # gradual action held before a natural jump


@dataclass
class PathRecord:
    events: list
    total_cost: float
    termination: Termination
    final_time: float
    final_state: int
    tail_cost: float = 0.0  # gradual cost of the last, unfinished holding period

    def cost_increments(self) -> list[float]:
        return [e.cost for e in self.events] + [self.tail_cost]


@dataclass
class SimulationReport:
    estimate: float
    std_error: float
    n_paths: int
    terminations: dict
    truncation_bias_bound: float
    horizon: float
    master_seed: int
    values: np.ndarray = field(repr=False, default=None)

    @property
    def lower_bound_note(self) -> str:
        return ("estimate is a lower bound in expectation: "
                f"{self.truncation_bias_bound:.3g} of paths were truncated")


def path_stream(master_seed: int, index: int):
    """Uniform stream of path ``index``; see the module docstring."""
    key = np.array([int(master_seed) & _MASK64, int(index) & _MASK64], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    while True:
        yield from gen.random(32).tolist()


class _Compiled:
    """Per-state lookup tables for fast path sampling."""

    def __init__(self, model: CtmdpModel, policy: StationaryPolicy):
        policy.check(model.n_states, model.n_gradual, model.n_impulse)
        n = model.n_states
        qx = exit_rates(model.q)
        self.kind, self.action, self.rate, self.cost_rate = [], [], [], []
        self.cdf, self.lump = [], []
        for x, c in enumerate(policy.choice):
            a = c.action
            self.action.append(a)
            if isinstance(c, Impulse):
                self.kind.append(IMPULSE_BLOCK)
                self.rate.append(0.0)
                self.cost_rate.append(0.0)
                self.cdf.append(_cdf(model.Q[x, a]))
                self.lump.append(model.c_impulse[x, a].tolist())
            else:
                self.kind.append(NATURAL_JUMP)
                r = float(qx[x, a])
                self.rate.append(r)
                self.cost_rate.append(float(model.c_gradual[x, a]))
                if r > 0:
                    jump = np.where(np.arange(n) == x, 0.0, model.q[x, a]) / r
                    self.cdf.append(_cdf(jump))
                else:
                    self.cdf.append(None)
                self.lump.append(None)


def _cdf(p):
    c = np.cumsum(p)
    c[-1] = max(c[-1], 1.0)
    return c.tolist()


def _pick(cdf, u):
    i = bisect.bisect_right(cdf, u)
    return min(i, len(cdf) - 1)


def _run(cp: _Compiled, x0: int, stream, horizon, impulse_cap, jump_cap, record):
    t = 0.0
    x = x0
    cost = 0.0
    events = [] if record else None
    n_events = 0
    while True:
        if cp.kind[x] == IMPULSE_BLOCK:
            pre = x
            block = []
            block_cost = 0.0
            count = 0
            while cp.kind[x] == IMPULSE_BLOCK:
                if count >= impulse_cap:
                    cost += block_cost
                    if record:
                        events.append(Event(t, IMPULSE_BLOCK, pre, block, x, block_cost))
                    return cost, Termination.IMPULSE_CAP, t, x, events, 0.0
                b = cp.action[x]
                y = _pick(cp.cdf[x], next(stream))
                block_cost += cp.lump[x][y]
                if record:
                    block.append((b, y))
                x = y
                count += 1
            cost += block_cost
            n_events += 1
            if record:
                events.append(Event(t, IMPULSE_BLOCK, pre, block, x, block_cost))
            if n_events >= jump_cap:
                return cost, Termination.JUMP_CAP, t, x, events, 0.0
        rate = cp.rate[x]
        cr = cp.cost_rate[x]
        if rate == 0.0:
            tail = cr * (horizon - t)
            cost += tail
            term = Termination.ABSORBED if cr == 0.0 else Termination.HORIZON
            return cost, term, (t if cr == 0.0 else horizon), x, events, tail
        sojourn = -math.log1p(-next(stream)) / rate
        if t + sojourn >= horizon:
            tail = cr * (horizon - t)
            cost += tail
            return cost, Termination.HORIZON, horizon, x, events, tail
        inc = cr * sojourn
        cost += inc
        t += sojourn
        y = _pick(cp.cdf[x], next(stream))
        n_events += 1
        if record:
            events.append(Event(t, NATURAL_JUMP, x, [], y, inc, cp.action[x]))
        x = y
        if n_events >= jump_cap:
            return cost, Termination.JUMP_CAP, t, x, events, 0.0


def simulate_path(model: CtmdpModel, policy: StationaryPolicy, x0: int, rng_seed=0,
                  horizon: float = DEFAULT_HORIZON, impulse_cap: int = DEFAULT_IMPULSE_CAP,
                  jump_cap: int = DEFAULT_JUMP_CAP, path_index: int = 0) -> PathRecord:
    """Sample one trajectory from ``x0``.

    Impulses chain at a single instant until the policy prescribes a
    gradual action; such a chain is one ``impulse_block`` event. A
    gradual action with zero exit rate holds the state for good.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if not 0 <= x0 < model.n_states:
        raise ValueError(f"x0={x0} is not a state")
    cp = _Compiled(model, policy)
    cost, term, t, x, events, tail = _run(cp, x0, path_stream(rng_seed, path_index), horizon,
                                          impulse_cap, jump_cap, True)
    return PathRecord(events, cost, term, t, x, tail)


def _chunk(cp, x0, seed, lo, hi, horizon, impulse_cap, jump_cap):
    costs = np.empty(hi - lo)
    terms = []
    for i in range(lo, hi):
        c, term, *_ = _run(cp, x0, path_stream(seed, i), horizon, impulse_cap, jump_cap, False)
        costs[i - lo] = c
        terms.append(term)
    return costs, terms


def estimate_utility(model: CtmdpModel, policy: StationaryPolicy, x0: int,
                     n_paths: int = 10_000, master_seed: int = 0,
                     horizon: Optional[float] = None,
                     impulse_cap: int = DEFAULT_IMPULSE_CAP,
                     jump_cap: int = DEFAULT_JUMP_CAP, workers: int = 1) -> SimulationReport:
    """Sample mean of ``exp(total cost)`` over ``n_paths`` independent paths.

    ``horizon=None`` picks one with :func:`suggest_horizon`. Results are
    bit-identical for any ``workers`` count.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    if horizon is None:
        horizon = suggest_horizon(model, policy, x0)
    cp = _Compiled(model, policy)
    bounds = np.linspace(0, n_paths, max(1, min(workers * 4, n_paths)) + 1).astype(int)
    jobs = [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    args = (horizon, impulse_cap, jump_cap)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda j: _chunk(cp, x0, master_seed, *j, *args), jobs))
    else:
        parts = [_chunk(cp, x0, master_seed, *j, *args) for j in jobs]
    costs = np.concatenate([p[0] for p in parts])
    terms = [t for p in parts for t in p[1]]
    with np.errstate(over="ignore"):
        values = np.exp(costs)
    mean = math.fsum(values) / n_paths
    var = math.fsum((values - mean) ** 2) / (n_paths - 1)
    hist = {t.value: 0 for t in Termination}
    for t in terms:
        hist[t.value] += 1
    truncated = n_paths - hist[Termination.ABSORBED.value]
    return SimulationReport(mean, math.sqrt(var / n_paths), n_paths, hist,
                            truncated / n_paths, float(horizon), int(master_seed), values)


def suggest_horizon(model: CtmdpModel, policy: StationaryPolicy, x0: int,
                    target: float = 1e-3, fallback: float = DEFAULT_HORIZON,
                    limit: float = 1e4) -> float:
    """Smallest doubling of 1 after which fewer than ``target`` paths are alive.

    A path stops being alive once it holds a zero-rate, zero-cost state.
    Impulse chains are collapsed into their exit distribution first. If
    the target is not met before ``limit`` (for example because the
    policy never reaches a free absorbing state), ``fallback`` is
    returned.
    """
    policy.check(model.n_states, model.n_gradual, model.n_impulse)
    n = model.n_states
    qx = exit_rates(model.q)
    is_imp = np.array([isinstance(c, Impulse) for c in policy.choice])
    G = np.flatnonzero(~is_imp)
    I = np.flatnonzero(is_imp)
    # distribution over gradual states reached by an impulse chain
    H = np.zeros((n, n))
    H[G, G] = 1.0
    if I.size:
        K = np.array([model.Q[x, policy[x].action] for x in I])
        # minimal solution; mass trapped in impulse cycles is dropped
        exit_ = K[:, G].copy()
        for _ in range(10_000):
            nxt = K[:, G] + K[:, I] @ exit_
            if np.abs(nxt - exit_).max() < 1e-14:
                break
            exit_ = nxt
        H[np.ix_(I, G)] = exit_
    gen = np.zeros((n, n))
    done = np.zeros(n, dtype=bool)
    for x in G:
        a = policy[x].action
        if qx[x, a] == 0.0:
            done[x] = model.c_gradual[x, a] == 0.0
            continue
        out = np.where(np.arange(n) == x, 0.0, model.q[x, a])
        gen[x] = out @ H
        gen[x, x] -= qx[x, a]
    start = H[x0]
    t = 1.0
    while t <= limit:
        alive = 1.0 - float((start @ expm(gen * t))[done].sum())
        if alive < target:
            return t
        t *= 2.0
    return fallback


def utility_second_moment(model: CtmdpModel, policy: StationaryPolicy) -> np.ndarray:
    """``E[exp(2 * total cost)]`` per initial state.

    Doubling every cost turns the second moment into an ordinary policy
    value, found here with the iteration-free evaluator so that the
    boundary case (where iteration only creeps upward) comes out as
    ``inf``. Where it is infinite the sample mean still converges but its
    standard error is meaningless, so sigma-based comparisons against a
    Monte Carlo estimate should only be trusted where this is finite.
    """
    doubled = CtmdpModel(model.q, model.Q, 2 * model.c_gradual, 2 * model.c_impulse,
                         None, model.gradual_actions, model.impulse_actions, model.state_names)
    return linear_policy_value(build_tilde(doubled), policy)


def format_trace(record: PathRecord, model: Optional[CtmdpModel] = None) -> str:
    """One line per event: time, kind, pre_state, action(s), post_state, cost increment."""
    def gname(a):
        return model.gradual_actions[a] if model is not None else str(a)

    def iname(b):
        return model.impulse_actions[b] if model is not None else str(b)

    lines = ["# time\tkind\tpre_state\tactions\tpost_state\tcost"]
    for e in record.events:
        if e.kind == IMPULSE_BLOCK:
            acts = ",".join(f"{iname(b)}->{y}" for b, y in e.intervention)
        else:
            acts = gname(e.action)
        lines.append(f"{e.time!r}\t{e.kind}\t{e.pre_state}\t{acts}\t{e.post_state}\t{e.cost!r}")
    lines.append(f"{record.final_time!r}\t{record.termination.value}\t{record.final_state}\t-\t"
                 f"{record.final_state}\t{record.tail_cost!r}")
    return "\n".join(lines) + "\n"
