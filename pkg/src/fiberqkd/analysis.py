"""Closed-form scheme constants and retained-key-fraction curves.

The retained fraction of transmitted key is::

    R_k = eta_p * (mu_r(p_o) - eta_e * p_o / p_d)

where ``eta_p`` is the protocol efficiency, ``eta_e`` the eavesdropper's
maximal knowledge fraction, ``p_d`` the disturbance her attack causes, and
``mu_r = 1 - h(p_o)`` the Shannon-limit fraction surviving error
reconciliation at measured error rate ``p_o``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._validation import BracketError, InvalidArgumentError, check_probability
from .protocols import Scheme, SchemeConfig

# Breidbart-basis information bound for fiber BB84
BB84_BREIDBART_INFORMATION = 0.585
NBAR_WARN = 0.3

CANONICAL_CONFIGS = {
    Scheme.BB84: SchemeConfig(Scheme.BB84),
    Scheme.IWY: SchemeConfig(Scheme.IWY, 2),
    Scheme.BLT: SchemeConfig(Scheme.BLT, 2),
    Scheme.BLT_PLUS: SchemeConfig(Scheme.BLT_PLUS, 2),
}


@dataclass(frozen=True)
class SchemeMetrics:
    """Constants of one scheme under its strongest modelled attack.

    ``extrapolated`` marks ``eta_e``/``p_d`` values for delay-element counts
    other than two, obtained from the one-known-difference argument
    (``eta_e = 1/(N-1)``) rather than quoted values.
    """

    scheme: Scheme
    m: int
    n_pulses: int
    eta_p: float
    eta_e: float
    p_d: float
    extrapolated: bool = False

    @property
    def ratio(self) -> float:
        return self.eta_e / self.p_d if self.p_d > 0 else math.inf


def scheme_metrics(config: SchemeConfig | str | Scheme) -> SchemeMetrics:
    config = _as_config(config)
    n = config.n_pulses
    if config.scheme is Scheme.BB84:
        return SchemeMetrics(config.scheme, config.m, n, 0.25, BB84_BREIDBART_INFORMATION, 0.25)
    if config.scheme is Scheme.BLT_PLUS:
        return SchemeMetrics(config.scheme, 2, n, 5 / 8, 1 / 5, 2 / 5)
    # Eve learns one of the N - 1 adjacent differences; the rest are random
    eta_e = 1 / (n - 1)
    p_d = (n - 2) / (2 * (n - 1))
    return SchemeMetrics(config.scheme, config.m, n, (n - 1) / n, eta_e, p_d, extrapolated=config.m != 2)


def _as_config(value) -> SchemeConfig:
    if isinstance(value, SchemeConfig):
        return value
    return CANONICAL_CONFIGS[Scheme.parse(value)]


def _as_metrics(value) -> SchemeMetrics:
    return value if isinstance(value, SchemeMetrics) else scheme_metrics(value)


def binary_entropy(p: float) -> float:
    p = check_probability(p, "p")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def mu_r(p_o: float) -> float:
    """Shannon-limit fraction of key surviving reconciliation, ``1 - h(p_o)``."""
    return 1.0 - binary_entropy(p_o)


def key_fraction(metrics, p_o: float, clamp: bool = True) -> float:
    """Retained key fraction at error rate ``p_o``, clamped below at 0.

    A scheme with zero disturbance (``N = 2`` train) leaks to an undetectable
    eavesdropper and retains nothing.
    """
    metrics = _as_metrics(metrics)
    p_o = check_probability(p_o, "p_o", 0.0, 0.5)
    if metrics.p_d == 0:
        return 0.0
    rk = metrics.eta_p * (mu_r(p_o) - metrics.eta_e * p_o / metrics.p_d)
    return max(rk, 0.0) if clamp else rk


def _bisect(f, lo: float, hi: float, tol: float, max_iter: int) -> float:
    f_lo = f(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 2 * tol:
            return mid
        f_mid = f(mid)
        if f_mid == 0:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def crossover(scheme_a, scheme_b, bracket: Sequence[float] = (0.0, 0.5), tol: float = 1e-6, max_iter: int = 200) -> float:
    """Error rate where two schemes retain equal key, by bisection.

    Raises :class:`BracketError` unless the difference of the (clamped)
    key fractions has strictly opposite signs at the bracket ends.
    """
    a, b = _as_metrics(scheme_a), _as_metrics(scheme_b)
    lo, hi = (check_probability(x, "bracket", 0.0, 0.5) for x in bracket)
    if not lo < hi:
        raise InvalidArgumentError(f"bracket must satisfy lo < hi, got {bracket}")

    def diff(p):
        return key_fraction(a, p) - key_fraction(b, p)

    d_lo, d_hi = diff(lo), diff(hi)
    if not d_lo * d_hi < 0:
        raise BracketError(
            f"no sign change of R_k({a.scheme.value}) - R_k({b.scheme.value}) on [{lo}, {hi}]"
            f" (ends {d_lo:.6g}, {d_hi:.6g})"
        )
    return _bisect(diff, lo, hi, tol, max_iter)


def find_crossover(scheme_a, scheme_b, lo: float = 0.0, hi: float = 0.5, step: float = 1e-3) -> float | None:
    """First crossover between ``lo`` and ``hi`` located by a grid sign scan.

    Returns ``None`` if the difference never strictly changes sign.
    """
    a, b = _as_metrics(scheme_a), _as_metrics(scheme_b)
    grid = po_grid(lo, hi, step)
    prev = None
    for p in grid:
        d = key_fraction(a, p) - key_fraction(b, p)
        if prev is not None and prev[1] * d < 0:
            return crossover(a, b, (prev[0], p))
        if d != 0 or prev is None:
            prev = (p, d)
    return None


def multiphoton_leakage(scheme, n_bar: float) -> float | None:
    """Extra key fraction exposed by multiphoton weak-coherent pulses.

    ``None`` where no value is defined (BLT_PLUS).
    """
    scheme = _as_config(scheme).scheme
    if not n_bar >= 0:
        raise InvalidArgumentError(f"n_bar must be >= 0, got {n_bar}")
    if n_bar > NBAR_WARN:
        warnings.warn(f"n_bar={n_bar} is not small; the leakage estimate assumes n_bar << 1", stacklevel=2)
    if scheme in (Scheme.BB84, Scheme.IWY):
        return n_bar / 4
    if scheme is Scheme.BLT:
        return n_bar / 6
    return None


@dataclass(frozen=True)
class SweepRow:
    p_o: float
    mu_r: float
    key_fractions: dict
    clamped: frozenset = frozenset()


def po_grid(lo: float, hi: float, step: float) -> list[float]:
    """Inclusive grid ``lo, lo + step, ..., hi`` without float drift."""
    lo = check_probability(lo, "po-min", 0.0, 0.5)
    hi = check_probability(hi, "po-max", 0.0, 0.5)
    if not step > 0:
        raise InvalidArgumentError(f"po-step must be > 0, got {step}")
    if hi < lo:
        raise InvalidArgumentError(f"po-max ({hi}) is below po-min ({lo})")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [min(round(lo + k * step, 12), hi) for k in range(n)]


def sweep(schemes: Iterable = tuple(CANONICAL_CONFIGS.values()), grid: Sequence[float] = ()) -> list[SweepRow]:
    metrics = [_as_metrics(s) for s in schemes]
    grid = [check_probability(p, "p_o", 0.0, 0.5) for p in grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidArgumentError("p_o grid must be strictly increasing")
    rows = []
    for p in grid:
        values, clamped = {}, set()
        for m in metrics:
            raw = key_fraction(m, p, clamp=False)
            if raw < 0:
                clamped.add(m.scheme)
            values[m.scheme] = max(raw, 0.0)
        rows.append(SweepRow(p, mu_r(p), values, frozenset(clamped)))
    return rows


def leading_scheme(row: SweepRow) -> Scheme | None:
    """Scheme with the largest positive retained fraction in a sweep row."""
    best = max(row.key_fractions.items(), key=lambda kv: kv[1], default=None)
    if best is None or best[1] <= 0:
        return None
    return best[0]


def curve_array(rows: Sequence[SweepRow], scheme) -> np.ndarray:
    scheme = Scheme.parse(scheme)
    return np.array([r.key_fractions[scheme] for r in rows])
