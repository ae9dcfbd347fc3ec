"""Finite gradual-impulse CTMDP primitives.

A model is described by

* ``q[x, a, y]``: signed transition-rate kernel of gradual action ``a``,
* ``Q[x, b, y]``: post-impulse distribution of impulse action ``b``,
* ``c_gradual[x, a]``: cost rate while holding gradual action ``a``,
* ``c_impulse[x, b, y]``: lump cost of impulse ``b`` landing in ``y``,
* ``w[x]``: bounding function with ``c_gradual + q_x + 1 <= w``.

States and actions are integer indices. Names are carried only for
reports and files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "CtmdpModel",
    "ModelStructureError",
    "InvalidModelError",
    "Violation",
    "STOCHASTIC_TOL",
    "validate_model",
    "default_bounding_function",
    "exit_rates",
    "max_exit_rates",
    "rat_example",
    "zero_cost_model",
]

STOCHASTIC_TOL = 1e-12


class ModelStructureError(ValueError):
    """Array shapes disagree with the declared state/action counts."""


class InvalidModelError(ValueError):
    """Raised when an operation needs a valid model and got violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "\n  ".join(str(v) for v in self.violations)
        super().__init__(f"model has {len(self.violations)} violation(s):\n  {lines}")


@dataclass(frozen=True)
class Violation:
    kind: str
    index: tuple
    magnitude: float
    message: str = ""

    def __str__(self):
        return f"{self.kind} at {self.index}: {self.message} (magnitude {self.magnitude:.3g})"


def _frozen(a, ndim, name):
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise ModelStructureError(f"{name} must have {ndim} dimensions, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CtmdpModel:
    """Immutable finite gradual-impulse model.

    If ``w`` is omitted the tightest admissible bounding function
    (:func:`default_bounding_function`) is used.
    """

    q: np.ndarray
    Q: np.ndarray
    c_gradual: np.ndarray
    c_impulse: np.ndarray
    w: Optional[np.ndarray] = None
    gradual_actions: Sequence[str] = ()
    impulse_actions: Sequence[str] = ()
    state_names: Sequence[str] = field(default=())

    def __post_init__(self):
        set_ = object.__setattr__
        q = _frozen(self.q, 3, "q")
        Q = _frozen(self.Q, 3, "Q")
        cg = _frozen(self.c_gradual, 2, "c_gradual")
        ci = _frozen(self.c_impulse, 3, "c_impulse")
        n, na, n2 = q.shape
        if n == 0 or na == 0:
            raise ModelStructureError("need at least one state and one gradual action")
        if n2 != n:
            raise ModelStructureError(f"q has shape {q.shape}; last axis must equal n_states={n}")
        if Q.shape[0] != n or Q.shape[2] != n or Q.shape[1] == 0:
            raise ModelStructureError(f"Q has shape {Q.shape}; expected ({n}, n_impulse>0, {n})")
        nb = Q.shape[1]
        if cg.shape != (n, na):
            raise ModelStructureError(f"c_gradual has shape {cg.shape}; expected {(n, na)}")
        if ci.shape != (n, nb, n):
            raise ModelStructureError(f"c_impulse has shape {ci.shape}; expected {(n, nb, n)}")
        set_(self, "q", q)
        set_(self, "Q", Q)
        set_(self, "c_gradual", cg)
        set_(self, "c_impulse", ci)
        if self.w is None:
            w = default_bounding_function(q, cg)
            w.setflags(write=False)
        else:
            w = _frozen(self.w, 1, "w")
            if w.shape != (n,):
                raise ModelStructureError(f"w has shape {w.shape}; expected ({n},)")
        set_(self, "w", w)
        set_(self, "gradual_actions", _names(self.gradual_actions, na, "g"))
        set_(self, "impulse_actions", _names(self.impulse_actions, nb, "b"))
        set_(self, "state_names", _names(self.state_names, n, "x"))

    @property
    def n_states(self) -> int:
        return self.q.shape[0]

    @property
    def n_gradual(self) -> int:
        return self.q.shape[1]

    @property
    def n_impulse(self) -> int:
        return self.Q.shape[1]

    def with_w(self, w) -> "CtmdpModel":
        """Same primitives with a different bounding function."""
        return CtmdpModel(self.q, self.Q, self.c_gradual, self.c_impulse, w,
                          self.gradual_actions, self.impulse_actions, self.state_names)


def _names(names, count, prefix):
    names = tuple(str(s) for s in names)
    if not names:
        return tuple(f"{prefix}{i}" for i in range(count))
    if len(names) != count:
        raise ModelStructureError(f"expected {count} names, got {len(names)}")
    if len(set(names)) != count:
        raise ModelStructureError(f"names must be unique: {names}")
    return names


def exit_rates(q) -> np.ndarray:
    """``q_x(a) = -q(x|x,a)`` as an ``(n_states, n_gradual)`` array."""
    q = np.asarray(q, dtype=float)
    return -np.einsum("xax->xa", q)


def max_exit_rates(model: CtmdpModel) -> np.ndarray:
    """``max_a q_x(a)`` per state."""
    return exit_rates(model.q).max(axis=1)


def default_bounding_function(q, c_gradual) -> np.ndarray:
    """Smallest ``w`` satisfying ``c^G(x,a) + q_x(a) + 1 <= w(x)``."""
    c_gradual = np.asarray(c_gradual, dtype=float)
    return 1.0 + (c_gradual + exit_rates(q)).max(axis=1)


def validate_model(model: CtmdpModel, tol: float = STOCHASTIC_TOL) -> list[Violation]:
    """Return every invariant violation; an empty list means the model is valid.

    Shape problems are raised as :class:`ModelStructureError` rather than
    reported, since nothing numeric can be checked meaningfully then.
    """
    n, na, nb = model.n_states, model.n_gradual, model.n_impulse
    for name, arr, shape in [("q", model.q, (n, na, n)), ("Q", model.Q, (n, nb, n)),
                             ("c_gradual", model.c_gradual, (n, na)),
                             ("c_impulse", model.c_impulse, (n, nb, n)), ("w", model.w, (n,))]:
        if arr.shape != shape:
            raise ModelStructureError(f"{name} has shape {arr.shape}; expected {shape}")

    out: list[Violation] = []
    for name, arr in [("q", model.q), ("Q", model.Q), ("c_gradual", model.c_gradual),
                      ("c_impulse", model.c_impulse), ("w", model.w)]:
        for idx in zip(*np.nonzero(~np.isfinite(arr))):
            out.append(Violation("non_finite", (name,) + tuple(int(i) for i in idx),
                                 float("inf"), f"{name} entry is not finite"))
    if out:
        return out

    q = model.q
    off = np.where(np.eye(n, dtype=bool)[:, None, :], 0.0, q)
    for x, a, y in zip(*np.nonzero(off < 0)):
        out.append(Violation("negative_rate", (int(x), int(a), int(y)), float(-off[x, a, y]),
                             "off-diagonal rate is negative"))
    row = q.sum(axis=2)
    for x, a in zip(*np.nonzero(np.abs(row) > tol)):
        out.append(Violation("non_conservative", (int(x), int(a)), float(abs(row[x, a])),
                             "rates do not sum to zero"))

    Q = model.Q
    for x, b, y in zip(*np.nonzero((Q < 0) | (Q > 1))):
        out.append(Violation("probability_range", (int(x), int(b), int(y)), float(Q[x, b, y]),
                             "impulse probability outside [0, 1]"))
    rs = Q.sum(axis=2)
    for x, b in zip(*np.nonzero(np.abs(rs - 1.0) > tol)):
        out.append(Violation("non_stochastic", (int(x), int(b)), float(abs(rs[x, b] - 1.0)),
                             f"impulse row sums to {rs[x, b]!r}"))

    for name, arr in [("c_gradual", model.c_gradual), ("c_impulse", model.c_impulse)]:
        for idx in zip(*np.nonzero(arr < 0)):
            out.append(Violation("negative_cost", (name,) + tuple(int(i) for i in idx),
                                 float(-arr[idx]), f"{name} entry is negative"))

    for (x,) in zip(*np.nonzero(model.w < 1)):
        out.append(Violation("bounding_function", (int(x),), float(1 - model.w[x]), "w(x) < 1"))
    need = model.c_gradual + exit_rates(q) + 1.0
    excess = need - model.w[:, None]
    for x in range(n):
        if (excess[x] > 0).any():
            a = int(np.argmax(excess[x]))
            out.append(Violation("bounding_function", (x,), float(excess[x, a]),
                                 f"c^G + q_x + 1 = {need[x, a]:g} exceeds w = {model.w[x]:g} "
                                 f"(gradual action {a})"))
    return out


def rat_example(mu: float = 2.0, l: float = 1.0, p: float = 0.5, C: float = 0.1,
                w=None) -> CtmdpModel:
    """Rat in the kitchen: state 0 has the rat, state 1 is absorbing.

    The rat leaves at rate ``mu`` while costing ``l`` per unit time.
    Shooting costs ``C`` per bullet and kills with probability ``p``.
    ``idle`` is a zero-cost identity impulse; at state 1 ``shoot`` does
    nothing either, so only state 0 has a real impulse choice.
    """
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if not l >= 0:
        raise ValueError(f"l must be nonnegative, got {l}")
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    q = np.zeros((2, 1, 2))
    q[0, 0] = [-mu, mu]
    Q = np.zeros((2, 2, 2))
    Q[0, 0] = [1 - p, p]
    Q[1, 0] = [0, 1]
    Q[0, 1] = [1, 0]
    Q[1, 1] = [0, 1]
    c_impulse = np.zeros((2, 2, 2))
    c_impulse[0, 0, :] = C
    c_gradual = np.array([[l], [0.0]])
    return CtmdpModel(q, Q, c_gradual, c_impulse, w,
                      gradual_actions=("wait",), impulse_actions=("shoot", "idle"),
                      state_names=("rat", "gone"))


def zero_cost_model(n_states: int = 3, rate: float = 1.0) -> CtmdpModel:
    """Cycle of states with no costs; every policy has value 1."""
    n = n_states
    q = np.zeros((n, 1, n))
    for x in range(n):
        if n > 1:
            q[x, 0, x] = -rate
            q[x, 0, (x + 1) % n] += rate
    Q = np.zeros((n, 1, n))
    for x in range(n):
        Q[x, 0, (x + 1) % n] = 1.0
    return CtmdpModel(q, Q, np.zeros((n, 1)), np.zeros((n, 1, n)))
