"""Reduction of a gradual-impulse CTMDP to a discrete-time MDP.

The union action set lists gradual actions first and impulse actions
second. For a gradual action ``a`` the transition law is the uniformized
jump kernel ``q(y|x,a)/w(x) + 1{y=x}`` and the one-step cost is
``ln(w(x) / (w(x) - c^G(x,a)))``; an impulse ``b`` keeps its own law
``Q`` and cost ``c^I``. Costs enter the exponential-utility Bellman
operator only through ``exp(cost) * probability``, so that product is
stored directly as ``weight``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import CtmdpModel, InvalidModelError, validate_model

__all__ = ["ActionLabel", "TildeModel", "build_tilde", "row_weight_sum"]

GRADUAL = "gradual"
IMPULSE = "impulse"


class ActionLabel(NamedTuple):
    kind: str
    index: int
    name: str


@dataclass(frozen=True, eq=False)
class TildeModel:
    P: np.ndarray
    weight: np.ndarray
    actions: tuple
    n_gradual: int

    def __post_init__(self):
        for name in ("P", "weight"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "actions", tuple(ActionLabel(*a) for a in self.actions))
        if self.P.shape != self.weight.shape or self.P.shape[1] != len(self.actions):
            raise ValueError("P, weight and actions disagree in shape")
        mask = np.ones(self.P.shape[:2], dtype=bool)
        n = self.n_states
        for k in range(self.n_gradual, self.n_actions):
            # a zero-cost impulse that surely returns to x is a no-op
            mask[:, k] = ~((self.P[:, k, :][range(n), range(n)] == 1.0)
                           & (self.weight[:, k, :][range(n), range(n)] == 1.0))
        mask.setflags(write=False)
        object.__setattr__(self, "admissible", mask)

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def n_actions(self) -> int:
        return self.P.shape[1]

    @property
    def n_impulse(self) -> int:
        return self.n_actions - self.n_gradual

    def is_impulse(self, k: int) -> bool:
        return k >= self.n_gradual

    @property
    def cost(self) -> np.ndarray:
        """One-step costs ``ln(weight / P)``; zero where ``P`` is zero."""
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.log(self.weight / self.P)
        return np.where(self.P > 0, c, 0.0)


def build_tilde(model: CtmdpModel) -> TildeModel:
    """Build the reduced discrete-time model; the input must validate cleanly."""
    violations = validate_model(model)
    if violations:
        raise InvalidModelError(violations)
    n = model.n_states
    w = model.w
    eye = np.eye(n)
    P_g = model.q / w[:, None, None] + eye[:, None, :]
    factor = w[:, None] / (w[:, None] - model.c_gradual)
    W_g = factor[:, :, None] * P_g
    P_i = model.Q
    W_i = np.exp(model.c_impulse) * model.Q
    actions = ([(GRADUAL, a, name) for a, name in enumerate(model.gradual_actions)]
               + [(IMPULSE, b, name) for b, name in enumerate(model.impulse_actions)])
    return TildeModel(np.concatenate([P_g, P_i], axis=1),
                      np.concatenate([W_g, W_i], axis=1),
                      tuple(actions), model.n_gradual)


def row_weight_sum(tilde: TildeModel, x: int, k: int) -> float:
    """One-step expected ``exp(cost)`` of action ``k`` at ``x``; always >= 1."""
    acc = 0.0
    for y in range(tilde.n_states):
        acc += float(tilde.weight[x, k, y])
    return acc
