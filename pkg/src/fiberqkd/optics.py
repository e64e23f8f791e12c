"""Discrete-time amplitude model of delay-line interferometers.

Time is measured in bins of one unit delay. A single photon leaving a
transmitter is a :class:`PulseTrain`, an equal-weight superposition over
``N`` bins, each bin carrying a phase that is an integer number of quarter
turns. Receivers are unbalanced Mach-Zehnder interferometers: the train is
split, one copy is delayed by ``d`` bins, and the two copies are recombined
on a 50/50 splitter whose outputs feed detectors ``D0`` and ``D1``.

Everything here is vectorised over leading axes so the session runner can
push whole batches of trains through the same code used for single trains.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from ._validation import InvalidArgumentError, check_positive_int, check_quarter_turns

NORM_TOL = 1e-12
BINARY_PHASES = frozenset({0, 2})


class Detector(enum.IntEnum):
    D0 = 0
    D1 = 1


@dataclass(frozen=True)
class PhasePattern:
    """Per-pulse phases, stored as quarter turns mod 4."""

    quarter_turns: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "quarter_turns", check_quarter_turns(self.quarter_turns))

    def __len__(self) -> int:
        return len(self.quarter_turns)

    @property
    def radians(self) -> np.ndarray:
        return np.asarray(self.quarter_turns, dtype=float) * (np.pi / 2)

    def adjacent_differences(self) -> tuple[int, ...]:
        q = self.quarter_turns
        return tuple((q[j + 1] - q[j]) % 4 for j in range(len(q) - 1))


@dataclass(frozen=True, eq=False)
class PulseTrain:
    """Complex amplitude per time bin for one photon."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if a.size == 0:
            raise InvalidArgumentError("a pulse train needs at least one bin")
        norm = float(np.sum(np.abs(a) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidArgumentError(f"pulse train is not normalised (norm {norm!r})")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    def __len__(self) -> int:
        return self.amplitudes.size

    @property
    def n_pulses(self) -> int:
        return self.amplitudes.size

    def allclose(self, other: "PulseTrain", atol: float = NORM_TOL) -> bool:
        return len(self) == len(other) and bool(
            np.allclose(self.amplitudes, other.amplitudes, rtol=0.0, atol=atol)
        )


@dataclass(frozen=True)
class DelaySpec:
    delay_bins: int = 1
    internal_phase_quarter_turns: int = 0

    def __post_init__(self):
        object.__setattr__(self, "delay_bins", check_positive_int(self.delay_bins, "delay_bins"))
        object.__setattr__(
            self,
            "internal_phase_quarter_turns",
            check_quarter_turns([self.internal_phase_quarter_turns])[0],
        )

    @property
    def internal_phase(self) -> float:
        return self.internal_phase_quarter_turns * np.pi / 2


@dataclass(frozen=True)
class DetectionEvent:
    slot: Hashable
    detector: Detector | None
    branch: int | None = None


@dataclass(frozen=True)
class DetectionDistribution:
    """Outcome probabilities keyed by ``(slot, detector)``.

    For delay-line receivers the slot is the integer arrival bin. For
    fast-switch measurements the slot is the tuple of bins that were
    overlapped; a pass-through bin has detector ``None``.
    """

    entries: Mapping[tuple[Hashable, Detector | None], float] = field(default_factory=dict)

    def total(self) -> float:
        return float(sum(self.entries.values()))

    def probability(self, slot, detector=None) -> float:
        if detector is not None:
            detector = Detector(detector)
        return float(self.entries.get((slot, detector), 0.0))

    def slot_mass(self, slots) -> float:
        slots = set(slots)
        return float(sum(p for (s, _), p in self.entries.items() if s in slots))


# --------------------------------------------------------------------------
# transmitters


def train_amplitudes(quarter_turns) -> np.ndarray:
    """Equal-weight amplitudes for an array of quarter-turn patterns.

    Works on any leading shape; the last axis indexes bins.
    """
    q = np.asarray(quarter_turns)
    n = q.shape[-1]
    return np.exp(1j * (np.pi / 2) * (q % 4)) / np.sqrt(n)


def build_train(n_pulses: int, pattern: PhasePattern | Sequence[int]) -> PulseTrain:
    n_pulses = check_positive_int(n_pulses, "n_pulses")
    pattern = _as_pattern(pattern)
    if len(pattern) != n_pulses:
        raise InvalidArgumentError(
            f"pattern has {len(pattern)} entries but the train has {n_pulses} pulses"
        )
    return PulseTrain(train_amplitudes(pattern.quarter_turns))


def _as_pattern(pattern) -> PhasePattern:
    return pattern if isinstance(pattern, PhasePattern) else PhasePattern(tuple(pattern))


def _stage_kernel(delay: int) -> np.ndarray:
    # 50/50 split, delay one arm, recombine, keep one output port
    k = np.zeros(delay + 1, dtype=complex)
    k[0] = k[delay] = 1 / np.sqrt(2)
    return k


def serial_transmitter_train(m: int, pattern: PhasePattern | Sequence[int]) -> PulseTrain:
    """Train from ``m`` delay elements in series (delays 1, 2, 4, ...).

    Each stage is a two-tap impulse response; cascading them by convolution
    yields a uniform comb of ``2**m`` bins. A single phase modulator after the
    cascade imprints the pattern.
    """
    m = check_positive_int(m, "m")
    pattern = _as_pattern(pattern)
    n = 2**m
    if len(pattern) != n:
        raise InvalidArgumentError(f"serial transmitter with m={m} needs {n} phases, got {len(pattern)}")
    check_quarter_turns(pattern.quarter_turns, BINARY_PHASES)
    response = np.ones(1, dtype=complex)
    for stage in range(m):
        response = np.convolve(response, _stage_kernel(2**stage))
        # discarded port carries half the power
        response /= np.linalg.norm(response)
    return PulseTrain(response * np.exp(1j * pattern.radians))


def parallel_transmitter_train(m: int, pattern: PhasePattern | Sequence[int]) -> PulseTrain:
    """Train from ``m`` parallel delay paths plus the direct path.

    Path ``k`` delays by ``k`` bins. The couplers are assumed to balance the
    path intensities, so the train is uniform. Phase modulators sit only on
    the delayed paths, hence the first phase must be 0.
    """
    m = check_positive_int(m, "m")
    pattern = _as_pattern(pattern)
    n = m + 1
    if len(pattern) != n:
        raise InvalidArgumentError(f"parallel transmitter with m={m} needs {n} phases, got {len(pattern)}")
    check_quarter_turns(pattern.quarter_turns, BINARY_PHASES)
    if pattern.quarter_turns[0] != 0:
        raise InvalidArgumentError("the direct path has no phase modulator; first phase must be 0")
    response = np.full(n, 1 / np.sqrt(n), dtype=complex)
    return PulseTrain(response * np.exp(1j * pattern.radians))


# --------------------------------------------------------------------------
# receivers


def interferometer_probabilities(amplitudes, delay_bins: int, internal_phase=0.0) -> np.ndarray:
    """Detection probabilities of a delay-``d`` interferometer.

    ``amplitudes`` has shape ``(..., N)``; ``internal_phase`` (radians) is a
    scalar or broadcasts against the leading shape. Returns an array of shape
    ``(..., N + d, 2)`` indexed by arrival slot and detector.
    """
    a = np.asarray(amplitudes, dtype=complex)
    d = int(delay_bins)
    n = a.shape[-1]
    pad = [(0, 0)] * (a.ndim - 1)
    direct = np.pad(a, pad + [(0, d)])
    delayed = np.pad(a, pad + [(d, 0)])
    rot = np.exp(1j * np.asarray(internal_phase, dtype=float))[..., None]
    delayed = delayed * rot
    out = np.empty(a.shape[:-1] + (n + d, 2))
    out[..., 0] = np.abs(direct + delayed) ** 2 / 4
    out[..., 1] = np.abs(direct - delayed) ** 2 / 4
    return out


def interferometer_distribution(train: PulseTrain, delay: DelaySpec = DelaySpec()) -> DetectionDistribution:
    probs = interferometer_probabilities(train.amplitudes, delay.delay_bins, delay.internal_phase)
    entries = {}
    for slot in range(probs.shape[0]):
        for det in Detector:
            entries[(slot, det)] = float(probs[slot, det])
    return DetectionDistribution(entries)


def switch_pair_probabilities(amplitudes, left_bins, right_bins=None, phase=0.0) -> np.ndarray:
    """Fast-switch overlap of bin pairs on a 50/50 splitter.

    For each pair ``(p, q)`` the outputs are ``(a[q] +/- e^{i phase} a[p]) / sqrt(2)``.
    ``left_bins`` has shape ``(..., P)``; ``right_bins`` defaults to
    ``left_bins + 1``. Returns shape ``(..., P, 2)``.
    """
    a = np.asarray(amplitudes, dtype=complex)
    left = np.asarray(left_bins)
    right = left + 1 if right_bins is None else np.asarray(right_bins)
    if a.ndim > 1:
        ap = np.take_along_axis(a, left, axis=-1)
        aq = np.take_along_axis(a, right, axis=-1)
    else:
        ap, aq = a[left], a[right]
    rot = np.exp(1j * np.asarray(phase, dtype=float))
    ap = ap * (rot[..., None] if rot.ndim else rot)
    out = np.empty(ap.shape + (2,))
    out[..., 0] = np.abs(aq + ap) ** 2 / 2
    out[..., 1] = np.abs(aq - ap) ** 2 / 2
    return out


def switch_overlap_distribution(train: PulseTrain, schedule, phase: float = 0.0) -> DetectionDistribution:
    """Outcome distribution of a fast-switch receiver.

    ``schedule`` lists disjoint bin pairs to overlap plus 1-tuples naming
    pass-through bins; together they must cover every bin. A pass-through
    bin reveals nothing about phase.
    """
    n = len(train)
    pairs, singles, seen = [], [], set()
    for item in schedule:
        item = tuple(int(b) for b in item)
        if len(item) not in (1, 2):
            raise InvalidArgumentError(f"schedule entries are pairs or single bins, got {item}")
        if len(item) == 2 and item[0] == item[1]:
            raise InvalidArgumentError(f"pair {item} overlaps a bin with itself")
        for b in item:
            if not 0 <= b < n:
                raise InvalidArgumentError(f"bin {b} outside train of length {n}")
            if b in seen:
                raise InvalidArgumentError(f"bin {b} appears twice in the schedule")
            seen.add(b)
        (pairs if len(item) == 2 else singles).append(item)
    missing = sorted(set(range(n)) - seen)
    if missing:
        raise InvalidArgumentError(f"schedule leaves bins {missing} uncovered")

    entries = {}
    if pairs:
        p = np.array([pq[0] for pq in pairs])
        q = np.array([pq[1] for pq in pairs])
        probs = switch_pair_probabilities(train.amplitudes, p, q, phase)
        for k, pq in enumerate(pairs):
            for det in Detector:
                entries[(pq, det)] = float(probs[k, det])
    for (b,) in singles:
        entries[((b,), None)] = float(abs(train.amplitudes[b]) ** 2)
    return DetectionDistribution(entries)


# --------------------------------------------------------------------------
# sampling


def sample_categorical(probs, rng: np.random.Generator) -> np.ndarray:
    """Draw one index per row of ``probs`` (shape ``(n, K)``) by inverse CDF."""
    probs = np.asarray(probs, dtype=float)
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1])[..., None] * cdf[..., -1:]
    idx = np.sum(cdf <= u, axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def sample_detection(dist: DetectionDistribution, rng: np.random.Generator) -> DetectionEvent:
    keys = list(dist.entries)
    if not keys:
        raise InvalidArgumentError("cannot sample from an empty distribution")
    probs = np.fromiter(dist.entries.values(), dtype=float, count=len(keys))
    slot, det = keys[int(sample_categorical(probs[None, :], rng)[0])]
    return DetectionEvent(slot, det)
