"""Brute-force reference values for small models.

The optimal value over all policies equals the pointwise minimum over
deterministic stationary ones, so on small instances it can be found by
evaluating every policy without ever applying the Bellman minimization.
:func:`linear_policy_value` gives a second, iteration-free evaluation of
a single policy through a strongly-connected-component decomposition and
a dense linear solve.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.sparse.csgraph import connected_components

from .model import CtmdpModel
from .solver import (
    DEFAULT_DIVERGENCE_CAP,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    StationaryPolicy,
    evaluate_policies,
    policy_matrix,
)
from .tilde import TildeModel

__all__ = [
    "ENUMERATION_CAP",
    "EnumerationTooLarge",
    "OracleResult",
    "admissible_actions",
    "count_policies",
    "enumerate_policies",
    "brute_force_value",
    "linear_policy_value",
    "random_model",
]

ENUMERATION_CAP = 10**6
_CHUNK = 4096


class EnumerationTooLarge(RuntimeError):
    def __init__(self, count, cap):
        self.count, self.cap = count, cap
        super().__init__(f"{count} policies exceed the enumeration cap of {cap}")


def admissible_actions(tilde: TildeModel) -> list[np.ndarray]:
    """Tilde action indices considered at each state (no-op impulses removed)."""
    return [np.flatnonzero(tilde.admissible[x]) for x in range(tilde.n_states)]


def count_policies(tilde: TildeModel) -> int:
    return int(np.prod([len(a) for a in admissible_actions(tilde)], dtype=object))


def _index_rows(tilde, cap):
    per_state = admissible_actions(tilde)
    count = count_policies(tilde)
    if count > cap:
        raise EnumerationTooLarge(count, cap)
    # state 0 is the most significant digit, actions ascend
    return itertools.product(*[a.tolist() for a in per_state])


def enumerate_policies(tilde: TildeModel, cap: int = ENUMERATION_CAP) -> Iterator[StationaryPolicy]:
    """Every deterministic stationary policy, in mixed-radix order."""
    for row in _index_rows(tilde, cap):
        yield StationaryPolicy.from_tilde_indices(row, tilde.n_gradual)


@dataclass
class OracleResult:
    V: np.ndarray
    n_policies: int
    argmin: np.ndarray  # per state, position of a minimizing policy in enumeration order
    values: np.ndarray  # (n_policies, n_states) when keep_values, else empty

    @property
    def diverged(self) -> np.ndarray:
        return np.isinf(self.V)


def brute_force_value(tilde: TildeModel, abs_tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER,
                      divergence_cap: float = DEFAULT_DIVERGENCE_CAP,
                      cap: int = ENUMERATION_CAP, keep_values: bool = False,
                      method: str = "doubling") -> OracleResult:
    """Pointwise minimum of every stationary policy's value.

    Policies are evaluated in chunks by the same monotone iteration as
    :func:`riskctmdp.solver.evaluate_policy`.
    """
    rows = _index_rows(tilde, cap)
    n = tilde.n_states
    best = np.full(n, np.inf)
    argmin = np.zeros(n, dtype=int)
    kept = []
    offset = 0
    while True:
        chunk = list(itertools.islice(rows, _CHUNK))
        if not chunk:
            break
        vals = evaluate_policies(tilde, chunk, abs_tol, max_iter, divergence_cap, method)
        if keep_values:
            kept.append(vals)
        pos = np.argmin(vals, axis=0)
        cand = vals[pos, np.arange(n)]
        better = cand < best
        best[better] = cand[better]
        argmin[better] = pos[better] + offset
        offset += len(chunk)
    values = np.concatenate(kept) if kept else np.empty((0, n))
    return OracleResult(best, offset, argmin, values)


def linear_policy_value(tilde: TildeModel, policy: StationaryPolicy) -> np.ndarray:
    """Exact minimal solution ``>= 1`` of ``V = M V`` without iteration.

    With ``M`` the policy's weight matrix (row sums ``>= 1``), decompose
    the support graph into strongly connected classes:

    * a closed class whose rows sum to exactly 1 carries no cost and has
      value 1;
    * a closed class with a row sum above 1, or an open class with
      spectral radius ``>= 1``, makes every state that can reach it
      infinite;
    * the remaining transient states solve ``(I - M_TT) V_T = M_TS 1``.
    """
    M = policy_matrix(tilde, policy)
    P = tilde.P[np.arange(tilde.n_states), policy.tilde_indices(tilde.n_gradual), :]
    n = M.shape[0]
    adj = M > 0
    ncomp, label = connected_components(adj, directed=True, connection="strong")
    one = np.zeros(n, dtype=bool)
    bad = np.zeros(n, dtype=bool)
    for c in range(ncomp):
        members = label == c
        sub = M[np.ix_(members, members)]
        closed = not adj[members][:, ~members].any()
        if closed:
            if np.array_equal(M[members], P[members]):
                one[members] = True
            else:
                bad[members] = True
        else:
            rho = max(abs(np.linalg.eigvals(sub)))
            if rho >= 1.0:
                bad[members] = True
    # states that can reach a bad class
    reach = bad.copy()
    changed = True
    while changed:
        new = reach | (adj & reach[None, :]).any(axis=1)
        changed = bool((new != reach).any())
        reach = new
    V = np.full(n, np.inf)
    V[one] = 1.0
    T = ~reach & ~one
    if T.any():
        A = np.eye(T.sum()) - M[np.ix_(T, T)]
        b = M[np.ix_(T, one)].sum(axis=1)
        V[T] = np.linalg.solve(A, b)
    return V


def random_model(seed, n_states: int = 3, n_gradual: int = 2, n_impulse: int = 2,
                 rate_max: float = 5.0, cost_rate_max: float = 2.0,
                 impulse_cost_max: float = 1.0, sparsity: float = 0.3,
                 w_shift: float = 0.0) -> CtmdpModel:
    """Random valid model whose last state is a zero-cost absorbing state.

    Off-diagonal rates are uniform on ``[0, rate_max]`` with a fraction
    ``sparsity`` zeroed; gradual action 0 always reaches the absorbing
    state directly, so it is reachable from everywhere. Impulses at the
    absorbing state are zero-cost no-ops.
    """
    rng = np.random.default_rng(seed)
    n = n_states
    sink = n - 1
    q = rng.uniform(0, rate_max, size=(n, n_gradual, n))
    q[rng.random(q.shape) < sparsity] = 0.0
    q[:sink, 0, sink] = rng.uniform(0.1 * rate_max, rate_max, size=sink)
    idx = np.arange(n)
    q[idx, :, idx] = 0.0
    q[sink] = 0.0
    q[idx, :, idx] = -q.sum(axis=2)
    c_gradual = rng.uniform(0, cost_rate_max, size=(n, n_gradual))
    c_gradual[sink] = 0.0
    Q = rng.dirichlet(np.ones(n), size=(n, n_impulse))
    Q[rng.random(Q.shape) < sparsity] = 0.0
    Q[Q.sum(axis=2) == 0, 0] = 1.0
    Q /= Q.sum(axis=2, keepdims=True)
    c_impulse = rng.uniform(0, impulse_cost_max, size=(n, n_impulse, n))
    Q[sink] = 0.0
    Q[sink, :, sink] = 1.0
    c_impulse[sink] = 0.0
    model = CtmdpModel(q, Q, c_gradual, c_impulse)
    if w_shift:
        model = model.with_w(model.w + w_shift)
    return model
