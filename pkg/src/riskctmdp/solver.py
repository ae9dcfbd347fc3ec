"""Value iteration for the exponential-utility criterion on the reduced model.

Values live in ``[1, inf]``. A state whose iterate exceeds
``divergence_cap`` is flagged and carried as ``inf`` from then on, with
the convention ``0 * inf = 0``. Row sums run over ``y`` in ascending
order so results do not depend on how rows are scheduled.

Impulses that surely return to the current state at zero cost are left
out of the minimization. They would satisfy the Bellman equation at any
value and, if selected, would apply infinitely many impulses at one
instant.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .model import CtmdpModel, exit_rates
from .tilde import TildeModel

__all__ = [
    "Gradual",
    "Impulse",
    "StationaryPolicy",
    "Status",
    "ValueSolution",
    "ResidualReport",
    "DEFAULT_TOL",
    "DEFAULT_MAX_ITER",
    "DEFAULT_DIVERGENCE_CAP",
    "DEFAULT_TIE_TOL",
    "action_values",
    "bellman_apply",
    "value_iterate",
    "extract_policy",
    "optimality_gaps",
    "verify_optimality",
    "evaluate_policy",
    "policy_matrix",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10**6
DEFAULT_DIVERGENCE_CAP = 1e12
DEFAULT_TIE_TOL = 1e-9


@dataclass(frozen=True)
class Gradual:
    """Hold gradual action ``action`` until the next natural jump."""
    action: int


@dataclass(frozen=True)
class Impulse:
    """Apply impulse ``action`` immediately."""
    action: int


Choice = Union[Gradual, Impulse]


@dataclass(frozen=True)
class StationaryPolicy:
    choice: tuple

    def __post_init__(self):
        object.__setattr__(self, "choice", tuple(self.choice))
        for c in self.choice:
            if not isinstance(c, (Gradual, Impulse)):
                raise TypeError(f"policy entries must be Gradual or Impulse, got {c!r}")

    def __len__(self):
        return len(self.choice)

    def __getitem__(self, x) -> Choice:
        return self.choice[x]

    def tilde_indices(self, n_gradual: int) -> np.ndarray:
        return np.array([c.action if isinstance(c, Gradual) else n_gradual + c.action
                         for c in self.choice], dtype=int)

    @classmethod
    def from_tilde_indices(cls, indices, n_gradual: int) -> "StationaryPolicy":
        return cls(tuple(Gradual(int(k)) if k < n_gradual else Impulse(int(k - n_gradual))
                         for k in indices))

    def check(self, n_states: int, n_gradual: int, n_impulse: int) -> None:
        if len(self.choice) != n_states:
            raise ValueError(f"policy covers {len(self.choice)} states, model has {n_states}")
        for x, c in enumerate(self.choice):
            limit = n_gradual if isinstance(c, Gradual) else n_impulse
            if not 0 <= c.action < limit:
                raise ValueError(f"state {x}: action index {c.action} out of range")

    def labels(self, model) -> list[str]:
        return [f"Gradual({model.gradual_actions[c.action]})" if isinstance(c, Gradual)
                else f"Impulse({model.impulse_actions[c.action]})" for c in self.choice]


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    DIVERGED_STATES = "diverged_states"


@dataclass
class ValueSolution:
    V: np.ndarray
    iterations: int
    sup_norm_delta: float
    status: Status
    diverged: np.ndarray
    trace: Optional[list] = field(default=None, repr=False)

    @property
    def diverged_states(self) -> list[int]:
        return [int(x) for x in np.flatnonzero(self.diverged)]

    @property
    def finite(self) -> np.ndarray:
        return ~self.diverged


def action_values(tilde: TildeModel, V, admissible_only: bool = True) -> np.ndarray:
    """``sum_y weight(x,k,y) V(y)`` for every ``(x, k)``.

    Inadmissible (no-op impulse) entries are set to ``inf`` unless
    ``admissible_only`` is false.
    """
    V = np.asarray(V, dtype=float)
    n = tilde.n_states
    inf = np.isinf(V)
    Vf = np.where(inf, 0.0, V)
    W = tilde.weight
    acc = np.zeros(W.shape[:2])
    for y in range(n):
        acc += W[:, :, y] * Vf[y]
    if inf.any():
        acc[(W[:, :, inf] > 0).any(axis=2)] = np.inf
    if admissible_only:
        acc[~tilde.admissible] = np.inf
    return acc


def bellman_apply(tilde: TildeModel, V) -> np.ndarray:
    """One step of the Bellman operator; monotone and bounded below by 1."""
    return action_values(tilde, V).min(axis=1)


def _iterate(step, V0, abs_tol, max_iter, divergence_cap, trace=None):
    """Monotone iteration ``V <- step(V)`` with divergence flagging.

    The sup-norm delta is taken over the trailing axis, so ``V0`` may
    carry a leading batch axis; the batch stops when every member has
    converged.
    """
    if not abs_tol > 0:
        raise ValueError("abs_tol must be positive")
    if not divergence_cap > 1:
        raise ValueError("divergence_cap must exceed 1")
    V = np.array(V0, dtype=float)
    diverged = np.zeros(V.shape, dtype=bool)
    delta = np.inf
    if trace is not None:
        trace.append(V.copy())
    for it in range(1, max_iter + 1):
        new = step(V)
        newly = (new > divergence_cap) & ~diverged
        diverged |= newly
        new[diverged] = np.inf
        live = ~diverged
        diff = np.where(live, np.abs(new - np.where(live, V, 0.0)), 0.0)
        delta = float(diff.max()) if diff.size else 0.0
        V = new
        if trace is not None:
            trace.append(V.copy())
        if not newly.any() and delta < abs_tol:
            return V, diverged, it, delta, True
    return V, diverged, max_iter, delta, False


def value_iterate(tilde: TildeModel, abs_tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER,
                  divergence_cap: float = DEFAULT_DIVERGENCE_CAP,
                  record_trace: bool = False) -> ValueSolution:
    """Iterate the Bellman operator upward from ``V = 1``.

    Stops when the sup-norm change over non-diverged states drops below
    ``abs_tol`` or after ``max_iter`` sweeps.
    """
    trace = [] if record_trace else None
    V, diverged, it, delta, ok = _iterate(lambda v: bellman_apply(tilde, v),
                                          np.ones(tilde.n_states), abs_tol, max_iter,
                                          divergence_cap, trace)
    if not ok:
        status = Status.MAX_ITERATIONS
    elif diverged.any():
        status = Status.DIVERGED_STATES
    else:
        status = Status.CONVERGED
    return ValueSolution(V, it, delta, status, diverged, trace)


def extract_policy(tilde: TildeModel, V, tie_tol: float = DEFAULT_TIE_TOL) -> StationaryPolicy:
    """Conserving selector with impulse-first, lowest-index tie-breaking.

    Diverged states get gradual action 0; their entry carries no
    optimality claim.
    """
    V = np.asarray(V, dtype=float)
    vals = action_values(tilde, V)
    ng = tilde.n_gradual
    out = []
    for x in range(tilde.n_states):
        if np.isinf(V[x]):
            out.append(0)
            continue
        row = vals[x]
        best = row.min()
        ties = np.flatnonzero(row <= best + tie_tol)
        impulses = ties[ties >= ng]
        out.append(int(impulses[0]) if impulses.size else int(ties[0]))
    return StationaryPolicy.from_tilde_indices(out, ng)


def optimality_gaps(tilde: TildeModel, V) -> np.ndarray:
    """Second-best minus best action value per state (``inf`` if unique action)."""
    vals = np.sort(action_values(tilde, V), axis=1)
    if vals.shape[1] < 2:
        return np.full(vals.shape[0], np.inf)
    with np.errstate(invalid="ignore"):
        gap = vals[:, 1] - vals[:, 0]
    return np.where(np.isnan(gap), np.inf, gap)


@dataclass
class ResidualReport:
    """Residuals of the continuous-time optimality relations.

    ``gradual_residual`` is ``min_a [sum_{y!=x} V(y) q(y|x,a) - (q_x(a) - c^G(x,a)) V(x)]``
    and ``impulse_residual`` is ``min_b [sum_y e^{c^I} V(y) Q(y|x,b)] - V(x)``.
    Both must be nonnegative and one of them zero at every finite state.
    """

    V: np.ndarray
    gradual_residual: np.ndarray
    impulse_residual: np.ndarray
    in_gradual_set: np.ndarray
    in_impulse_set: np.ndarray
    tol: float

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.V)

    @property
    def attainment(self) -> np.ndarray:
        return np.minimum(self.gradual_residual, self.impulse_residual)

    @property
    def worst_gradual(self) -> float:
        r = self.gradual_residual[self.finite]
        return float(r.min()) if r.size else np.inf

    @property
    def worst_impulse(self) -> float:
        r = self.impulse_residual[self.finite]
        return float(r.min()) if r.size else np.inf

    @property
    def worst_attainment(self) -> float:
        r = self.attainment[self.finite]
        return float(r.max()) if r.size else 0.0

    @property
    def outside_impulse_in_gradual(self) -> bool:
        """Every state not in the impulse set belongs to the gradual set."""
        return bool(np.all(self.in_impulse_set | self.in_gradual_set))

    @property
    def ok(self) -> bool:
        return (self.worst_gradual >= -self.tol and self.worst_impulse >= -self.tol
                and self.worst_attainment <= self.tol and self.outside_impulse_in_gradual)

    def membership(self, x: int) -> str:
        g, i = bool(self.in_gradual_set[x]), bool(self.in_impulse_set[x])
        return {(True, True): "both", (True, False): "X^G",
                (False, True): "X^I", (False, False): "neither"}[(g, i)]


def _inf_dot(weights, V):
    """``sum_y weights[..., y] V[y]`` with ``0 * inf = 0``, ascending ``y``."""
    inf = np.isinf(V)
    Vf = np.where(inf, 0.0, V)
    acc = np.zeros(weights.shape[:-1])
    for y in range(V.shape[0]):
        acc += weights[..., y] * Vf[y]
    if inf.any():
        acc[(weights[..., inf] > 0).any(axis=-1)] = np.inf
    return acc


def verify_optimality(model: CtmdpModel, V, tol: float = 1e-8,
                      skip_idle: bool = False) -> ResidualReport:
    """Check the gradual and impulse optimality relations at ``V``.

    By default every impulse takes part, including zero-cost no-ops,
    exactly as the relations are stated; pass ``skip_idle=True`` to drop
    them the way the solver does. Infinite states are in neither
    residual; such a state is counted in the impulse set iff every
    impulse there also gives ``inf``.
    """
    V = np.asarray(V, dtype=float)
    n = model.n_states
    qx = exit_rates(model.q)
    off = np.where(np.eye(n, dtype=bool)[:, None, :], 0.0, model.q)
    jump_term = _inf_dot(off, V)
    imp = _inf_dot(np.exp(model.c_impulse) * model.Q, V)
    if skip_idle:
        idx = np.arange(n)
        idle = (model.Q[idx, :, idx] == 1.0) & (model.c_impulse[idx, :, idx] == 0.0)
        imp = np.where(idle, np.inf, imp)
    imp_min = imp.min(axis=1)

    finite = np.isfinite(V)
    Vz = np.where(finite, V, 0.0)
    with np.errstate(invalid="ignore"):
        rA_all = jump_term - (qx - model.c_gradual) * Vz[:, None]
        rB = imp_min - Vz
    rA = np.where(finite, rA_all.min(axis=1), np.nan)
    rB = np.where(finite, rB, np.nan)
    in_G = finite & (np.abs(rA) <= tol)
    in_I = np.where(finite, np.abs(rB) <= tol, np.isinf(imp_min))
    return ResidualReport(V, rA, rB, in_G, in_I, tol)


def policy_matrix(tilde: TildeModel, policy: StationaryPolicy) -> np.ndarray:
    """Weight matrix ``M[x, y] = weight(x, policy(x), y)``."""
    policy.check(tilde.n_states, tilde.n_gradual, tilde.n_impulse)
    k = policy.tilde_indices(tilde.n_gradual)
    return tilde.weight[np.arange(tilde.n_states), k, :]


def _matrix_step(M):
    def step(V):
        return _inf_dot(M, V)
    return step


def _batch_step(M):
    # M has shape (B, n, n); V has shape (B, n)
    def step(V):
        inf = np.isinf(V)
        Vf = np.where(inf, 0.0, V)
        acc = np.zeros(V.shape)
        for y in range(V.shape[1]):
            acc += M[:, :, y] * Vf[:, y, None]
        if inf.any():
            acc[((M > 0) & inf[:, None, :]).any(axis=2)] = np.inf
        return acc
    return step


def _doubling(M, abs_tol, max_iter, divergence_cap):
    """Iterates ``M^n 1`` at ``n = 1, 2, 4, ...`` by repeated squaring.

    Same monotone sequence as plain iteration, sampled at powers of two;
    a state is flagged when its iterate passes the cap, and anything with
    positive weight into a flagged state is flagged at the next squaring.
    """
    if not abs_tol > 0:
        raise ValueError("abs_tol must be positive")
    if not divergence_cap > 1:
        raise ValueError("divergence_cap must exceed 1")
    A = np.array(M, dtype=float)
    diverged = np.zeros(A.shape[:-1], dtype=bool)
    V = np.ones(A.shape[:-1])
    n_done = 1
    while True:
        new = A.sum(axis=-1)
        before = diverged.copy()
        diverged |= new > divergence_cap
        # anything with weight into a flagged state is infinite from the
        # next squaring on
        while True:
            feeds = diverged | ((A > 0) & diverged[..., None, :]).any(axis=-1)
            if (feeds == diverged).all():
                break
            diverged = feeds
        new[diverged] = np.inf
        live = ~diverged
        diff = np.where(live, np.abs(new - np.where(live, V, 0.0)), 0.0)
        delta = float(diff.max()) if diff.size else 0.0
        V = new
        if (delta < abs_tol and (diverged == before).all()) or 2 * n_done > max_iter:
            return V
        Az = np.where(diverged[..., :, None] | diverged[..., None, :], 0.0, A)
        A = Az @ Az
        n_done *= 2


def evaluate_policy(tilde: TildeModel, policy: StationaryPolicy,
                    abs_tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                    divergence_cap: float = DEFAULT_DIVERGENCE_CAP,
                    method: str = "iterate") -> np.ndarray:
    """Smallest fixed point ``>= 1`` of ``V = M V`` for the policy's weight matrix.

    ``method="iterate"`` runs ``V <- M V`` from ``V = 1`` and stops like
    :func:`value_iterate`. ``method="doubling"`` visits the same iterates
    at powers of two by squaring ``M``, which needs ``log2`` as many steps
    when the iteration is slow. Diverged states are ``inf``.
    """
    M = policy_matrix(tilde, policy)
    if method == "doubling":
        return _doubling(M, abs_tol, max_iter, divergence_cap)
    if method != "iterate":
        raise ValueError(f"unknown method {method!r}")
    V, *_ = _iterate(_matrix_step(M), np.ones(tilde.n_states), abs_tol, max_iter,
                     divergence_cap)
    return V


def evaluate_policies(tilde: TildeModel, indices, abs_tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER,
                      divergence_cap: float = DEFAULT_DIVERGENCE_CAP,
                      method: str = "doubling") -> np.ndarray:
    """Batched :func:`evaluate_policy` over rows of tilde action indices."""
    indices = np.asarray(indices, dtype=int)
    n = tilde.n_states
    M = tilde.weight[np.arange(n)[None, :], indices, :]
    if method == "doubling":
        return _doubling(M, abs_tol, max_iter, divergence_cap)
    V, *_ = _iterate(_batch_step(M), np.ones(indices.shape), abs_tol, max_iter,
                     divergence_cap)
    return V
