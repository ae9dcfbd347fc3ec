"""JSON documents for models, reduced models, policies and solve results.

Model document (``kind`` and ``state_names`` are optional)::

    {
      "kind": "gradual-impulse-ctmdp",
      "n_states": 2,
      "gradual_actions": ["wait"],
      "impulse_actions": ["shoot", "idle"],
      "q":         [[[-2, 2]], [[0, 0]]],          # [x][a][y]
      "Q":         [[[0.5, 0.5], [1, 0]], ...],    # [x][b][y]
      "c_gradual": [[1], [0]],                     # [x][a]
      "c_impulse": [[[0.1, 0.1], [0, 0]], ...],    # [x][b][y]
      "w":         [4, 1]                          # [x], optional
    }

Numbers must be finite JSON decimals. A missing ``w`` is replaced by
the tightest admissible bounding function. Floats are written with
``repr`` so parse -> serialize -> parse is exact.

Reduced-model documents carry ``"tilde": true`` with ``actions`` (list
of ``{"kind", "index", "name"}``), ``n_gradual``, ``P`` and ``weight``
indexed ``[x][action][y]``.

Policy documents have ``"policy": [{"kind": "gradual"|"impulse",
"action": <name>}, ...]`` with one entry per state.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .model import CtmdpModel
from .solver import Gradual, Impulse, StationaryPolicy
from .tilde import TildeModel

__all__ = [
    "ParseError",
    "MODEL_KIND",
    "model_to_dict",
    "model_from_dict",
    "tilde_to_dict",
    "tilde_from_dict",
    "policy_to_dict",
    "policy_from_dict",
    "loads",
    "load_json",
    "load_model",
    "save_model",
    "dumps",
]

MODEL_KIND = "gradual-impulse-ctmdp"


class ParseError(ValueError):
    """Malformed document; ``where`` is a line/column or a field path."""

    def __init__(self, message, where=""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


def _reject_constant(name):
    raise ValueError(f"non-finite constant {name} is not allowed")


def loads(text: str, source: str = "<string>"):
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, f"{source}:{e.lineno}:{e.colno}") from None
    except ValueError as e:
        raise ParseError(str(e), source) from None


def load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(f"cannot read file ({e.strerror})", str(path)) from None
    return loads(text, str(path))


def dumps(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _check_numbers(value, path, depth):
    if depth == 0:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"expected a number, got {value!r}", path)
        if not math.isfinite(value):
            raise ParseError("number is not finite", path)
        return
    if not isinstance(value, list):
        raise ParseError(f"expected a list, got {type(value).__name__}", path)
    for i, v in enumerate(value):
        _check_numbers(v, f"{path}[{i}]", depth - 1)


def _array(doc, key, shape):
    if key not in doc:
        raise ParseError("missing field", key)
    value = doc[key]
    _check_numbers(value, key, len(shape))
    try:
        arr = np.array(value, dtype=float)
    except ValueError:
        raise ParseError("ragged nested list", key) from None
    if arr.shape != shape:
        raise ParseError(f"shape {arr.shape} does not match expected {shape}", key)
    return arr


def _names(doc, key):
    if key not in doc:
        raise ParseError("missing field", key)
    names = doc[key]
    if not isinstance(names, list) or not names or not all(isinstance(s, str) for s in names):
        raise ParseError("expected a non-empty list of strings", key)
    if len(set(names)) != len(names):
        raise ParseError("names must be unique", key)
    return names


def _float_list(arr):
    return np.asarray(arr, dtype=float).tolist()


def model_to_dict(model: CtmdpModel) -> dict:
    return {
        "kind": MODEL_KIND,
        "n_states": model.n_states,
        "state_names": list(model.state_names),
        "gradual_actions": list(model.gradual_actions),
        "impulse_actions": list(model.impulse_actions),
        "q": _float_list(model.q),
        "Q": _float_list(model.Q),
        "c_gradual": _float_list(model.c_gradual),
        "c_impulse": _float_list(model.c_impulse),
        "w": _float_list(model.w),
    }


def model_from_dict(doc) -> CtmdpModel:
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    if doc.get("tilde"):
        raise ParseError("this is a reduced-model document, not a model", "tilde")
    n = doc.get("n_states")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ParseError(f"expected a positive integer, got {n!r}", "n_states")
    g = _names(doc, "gradual_actions")
    b = _names(doc, "impulse_actions")
    na, nb = len(g), len(b)
    w = _array(doc, "w", (n,)) if doc.get("w") is not None else None
    states = doc.get("state_names") or ()
    if states and (not isinstance(states, list) or len(states) != n):
        raise ParseError(f"expected {n} names", "state_names")
    return CtmdpModel(_array(doc, "q", (n, na, n)), _array(doc, "Q", (n, nb, n)),
                      _array(doc, "c_gradual", (n, na)), _array(doc, "c_impulse", (n, nb, n)),
                      w, g, b, states)


def tilde_to_dict(tilde: TildeModel) -> dict:
    return {
        "tilde": True,
        "n_states": tilde.n_states,
        "n_gradual": tilde.n_gradual,
        "actions": [{"kind": a.kind, "index": a.index, "name": a.name} for a in tilde.actions],
        "P": _float_list(tilde.P),
        "weight": _float_list(tilde.weight),
    }


def tilde_from_dict(doc) -> TildeModel:
    if not isinstance(doc, dict) or not doc.get("tilde"):
        raise ParseError("not a reduced-model document", "tilde")
    n = doc.get("n_states")
    actions = doc.get("actions")
    if not isinstance(actions, list):
        raise ParseError("expected a list", "actions")
    try:
        acts = tuple((a["kind"], int(a["index"]), str(a["name"])) for a in actions)
    except (KeyError, TypeError, ValueError):
        raise ParseError("each action needs kind, index and name", "actions") from None
    shape = (n, len(acts), n)
    return TildeModel(_array(doc, "P", shape), _array(doc, "weight", shape), acts,
                      int(doc["n_gradual"]))


def policy_to_dict(policy: StationaryPolicy, model: CtmdpModel) -> dict:
    entries = []
    for c in policy.choice:
        if isinstance(c, Impulse):
            entries.append({"kind": "impulse", "action": model.impulse_actions[c.action]})
        else:
            entries.append({"kind": "gradual", "action": model.gradual_actions[c.action]})
    return {"policy": entries}


def policy_from_dict(doc, model: CtmdpModel) -> StationaryPolicy:
    if not isinstance(doc, dict) or not isinstance(doc.get("policy"), list):
        raise ParseError("expected an object with a 'policy' list", "policy")
    entries = doc["policy"]
    if len(entries) != model.n_states:
        raise ParseError(f"{len(entries)} entries for {model.n_states} states", "policy")
    out = []
    for x, e in enumerate(entries):
        where = f"policy[{x}]"
        if not isinstance(e, dict):
            raise ParseError("expected an object", where)
        kind, name = e.get("kind"), e.get("action")
        names = {"gradual": model.gradual_actions, "impulse": model.impulse_actions}.get(kind)
        if names is None:
            raise ParseError(f"kind must be 'gradual' or 'impulse', got {kind!r}", where)
        if isinstance(name, int) and not isinstance(name, bool) and 0 <= name < len(names):
            idx = name
        elif name in names:
            idx = names.index(name)
        else:
            raise ParseError(f"unknown {kind} action {name!r}", where)
        out.append(Gradual(idx) if kind == "gradual" else Impulse(idx))
    return StationaryPolicy(out)


def load_model(path) -> CtmdpModel:
    doc = load_json(path)
    try:
        return model_from_dict(doc)
    except ParseError as e:
        raise ParseError(str(e), str(path)) from None


def save_model(model: CtmdpModel, path) -> None:
    Path(path).write_text(dumps(model_to_dict(model)))
