"""Exception types and argument checks shared across the package."""

from __future__ import annotations

import math
import operator
from typing import Iterable


class InvalidArgumentError(ValueError):
    """An argument violates an operation's precondition."""


class UnsupportedConfigError(InvalidArgumentError):
    """A scheme configuration that the model does not define."""


class BracketError(ValueError):
    """A root-finding bracket does not straddle a sign change."""


class EmptyKeyError(RuntimeError):
    """A session produced no sifted key bits."""


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool):
        raise InvalidArgumentError(f"{name} must be an integer, got {value!r}")
    try:
        value = operator.index(value)
    except TypeError:
        raise InvalidArgumentError(f"{name} must be an integer, got {value!r}") from None
    if value < 1:
        raise InvalidArgumentError(f"{name} must be >= 1, got {value}")
    return value


def check_probability(value, name: str, lo: float = 0.0, hi: float = 1.0) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"{name} must be a number, got {value!r}") from None
    if math.isnan(value) or not lo <= value <= hi:
        raise InvalidArgumentError(f"{name} must lie in [{lo}, {hi}], got {value}")
    return value


def check_quarter_turns(values: Iterable[int], allowed=None) -> tuple[int, ...]:
    out = []
    for v in values:
        if isinstance(v, bool) or not float(v).is_integer():
            raise InvalidArgumentError(f"phase entries must be integer quarter turns, got {v!r}")
        v = int(v) % 4
        if allowed is not None and v not in allowed:
            raise InvalidArgumentError(f"phase entry {v} not in allowed set {sorted(allowed)}")
        out.append(v)
    return tuple(out)
