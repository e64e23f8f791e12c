"""Scheme definitions, Alice's encoding, Bob's receiver, sifting, sessions.

All four schemes share one physical picture. Alice emits a single photon
as an ``N``-bin :class:`~fiberqkd.optics.PulseTrain`; Bob's receiver is a
delay-line interferometer and a detection in slot ``j`` of a delay-``d``
interferometer is keyed to the phase difference between bins ``j - d`` and
``j``. Fiber BB84 is the ``N = 2`` case where Alice's modulator picks one of
four phases and Bob's interferometer carries an internal phase of 0 or
pi/2 that selects his basis.

Bit convention: a phase difference of 0 lands on ``D0`` (bit 0) and pi on
``D1`` (bit 1).
"""

from __future__ import annotations

import enum
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import optics
from ._validation import (
    EmptyKeyError,
    InvalidArgumentError,
    UnsupportedConfigError,
    check_positive_int,
    check_probability,
)
from .optics import Detector, DetectionEvent, PhasePattern, PulseTrain

SHARD_SIZE = 2**15


class Scheme(str, enum.Enum):
    BB84 = "bb84"
    IWY = "iwy"
    BLT = "blt"
    BLT_PLUS = "blt_plus"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidArgumentError(
                f"unknown scheme {value!r}; choose from {', '.join(s.value for s in cls)}"
            ) from None


@dataclass(frozen=True)
class SchemeConfig:
    """A scheme plus its transmitter delay-element count ``m``.

    ``m`` is ignored for BB84 (always two pulses) and must be 2 for BLT_PLUS.
    """

    scheme: Scheme
    m: int = 2

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        object.__setattr__(self, "m", check_positive_int(self.m, "m"))
        if self.scheme is Scheme.BLT_PLUS and self.m != 2:
            raise UnsupportedConfigError(f"blt_plus is defined only for m=2, got m={self.m}")

    @property
    def n_pulses(self) -> int:
        if self.scheme is Scheme.BB84:
            return 2
        if self.scheme is Scheme.IWY:
            return self.m + 1
        if self.scheme is Scheme.BLT:
            return 2**self.m
        return 4

    @property
    def receiver_delays(self) -> tuple[int, ...]:
        return (1, 2) if self.scheme is Scheme.BLT_PLUS else (1,)

    @property
    def is_train_scheme(self) -> bool:
        return self.scheme is not Scheme.BB84

    def __str__(self) -> str:
        if self.scheme in (Scheme.IWY, Scheme.BLT):
            return f"{self.scheme.value}(m={self.m})"
        return self.scheme.value


@dataclass(frozen=True)
class ChannelModel:
    flip_probability: float = 0.0
    attack_fraction: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "flip_probability", check_probability(self.flip_probability, "flip_probability", 0.0, 0.5)
        )
        object.__setattr__(self, "attack_fraction", check_probability(self.attack_fraction, "attack_fraction"))


@dataclass(frozen=True)
class BB84Outcome:
    slot: int
    detector: Detector
    bob_basis: int


@dataclass(eq=False)
class SiftedKey:
    bits: np.ndarray
    train_index: np.ndarray
    slot: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        self.train_index = np.asarray(self.train_index, dtype=np.int64)
        self.slot = np.asarray(self.slot, dtype=np.int16)
        if not len(self.bits) == len(self.train_index) == len(self.slot):
            raise InvalidArgumentError("sifted key bits and positions differ in length")

    def __len__(self) -> int:
        return len(self.bits)


@dataclass(eq=False)
class SessionRecord:
    """Transcript of one simulated key exchange.

    Per-bit arrays (``eve_known_mask``, ``branch``, ``attacked``,
    ``eve_learned``, ``eve_guess``) are aligned with the sifted keys.
    ``branch`` holds the receiver delay that produced each bit and
    ``eve_guess`` is Eve's Breidbart guess, or -1 where she made none.
    """

    config: SchemeConfig
    trains_sent: int
    alice_key: SiftedKey
    bob_key: SiftedKey
    eve_known_mask: np.ndarray
    discarded_edge_detections: int = 0
    discarded_basis_mismatch: int = 0
    undetected_trains: int = 0
    trains_attacked: int = 0
    branch: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int8))
    attacked: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))
    eve_learned: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))
    eve_guess: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int8))

    def __post_init__(self):
        if len(self.alice_key) != len(self.bob_key) or len(self.eve_known_mask) != len(self.bob_key):
            raise InvalidArgumentError("alice key, bob key and eve mask must have equal length")

    @property
    def sifted_bits(self) -> int:
        return len(self.bob_key)

    def errors(self) -> np.ndarray:
        return self.alice_key.bits != self.bob_key.bits

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.config.scheme.value}:{self.config.m}:{self.trains_sent}".encode())
        h.update(
            np.array(
                [
                    self.discarded_edge_detections,
                    self.discarded_basis_mismatch,
                    self.undetected_trains,
                    self.trains_attacked,
                ],
                dtype=np.int64,
            ).tobytes()
        )
        for key in (self.alice_key, self.bob_key):
            h.update(key.bits.tobytes())
            h.update(key.train_index.tobytes())
            h.update(key.slot.tobytes())
        for arr in (self.eve_known_mask, self.branch, self.attacked, self.eve_learned, self.eve_guess):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class EmpiricalMetrics:
    eta_p_hat: float
    p_o_hat: float
    eve_fraction_hat: float
    sifted_bits: int
    trains_sent: int


# --------------------------------------------------------------------------
# Alice


def bb84_basis_and_bit(quarter_turns: int) -> tuple[int, int]:
    """Basis (0 standard, 1 conjugate) and bit encoded by a BB84 phase."""
    q = int(quarter_turns) % 4
    return q % 2, q // 2


def _alice_patterns(config: SchemeConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    if config.scheme is Scheme.BB84:
        q = np.zeros((n, 2), dtype=np.int8)
        q[:, 1] = rng.integers(0, 4, n)
        return q
    q = 2 * rng.integers(0, 2, (n, config.n_pulses), dtype=np.int8)
    q[:, 0] = 0
    return q


def intended_bits(config: SchemeConfig, pattern: PhasePattern) -> tuple[int, ...]:
    """Key bits carried by a pattern, one per adjacent-pulse boundary.

    For BB84 the single bit is the one encoded by Alice's modulator phase.
    """
    if len(pattern) != config.n_pulses:
        raise InvalidArgumentError(f"{config} trains have {config.n_pulses} pulses, pattern has {len(pattern)}")
    if config.scheme is Scheme.BB84:
        return (bb84_basis_and_bit(pattern.quarter_turns[1])[1],)
    return tuple(d // 2 for d in pattern.adjacent_differences())


def encode_train(config: SchemeConfig, rng: np.random.Generator) -> tuple[PhasePattern, tuple[int, ...]]:
    pattern = PhasePattern(tuple(int(v) for v in _alice_patterns(config, 1, rng)[0]))
    return pattern, intended_bits(config, pattern)


def transmit(config: SchemeConfig, pattern: PhasePattern) -> PulseTrain:
    """The train Alice's transmitter hardware emits for ``pattern``."""
    if config.scheme is Scheme.BLT:
        return optics.serial_transmitter_train(config.m, pattern)
    if config.scheme is Scheme.IWY:
        return optics.parallel_transmitter_train(config.m, pattern)
    if config.scheme is Scheme.BLT_PLUS:
        return optics.serial_transmitter_train(2, pattern)
    return optics.build_train(2, pattern)


# --------------------------------------------------------------------------
# Bob


def _bob_choices(config: SchemeConfig, n: int, rng: np.random.Generator):
    """Per-train receiver delay and internal phase (quarter turns)."""
    coin = rng.integers(0, 2, n, dtype=np.int8)
    if config.scheme is Scheme.BLT_PLUS:
        return (1 + coin).astype(np.int8), np.zeros(n, np.int8)
    if config.scheme is Scheme.BB84:
        return np.ones(n, np.int8), coin
    return np.ones(n, np.int8), np.zeros(n, np.int8)


def _detect(amplitudes, delays, phases_qt, rng: np.random.Generator):
    """Sample (slot, detector) for every train; one uniform draw per train."""
    n = amplitudes.shape[0]
    slot = np.full(n, -1, np.int16)
    det = np.full(n, -1, np.int8)
    for d in np.unique(delays):
        sel = np.flatnonzero(delays == d)
        probs = optics.interferometer_probabilities(
            amplitudes[sel], int(d), phases_qt[sel] * (np.pi / 2)
        )
        idx = optics.sample_categorical(probs.reshape(len(sel), -1), rng)
        slot[sel] = idx // 2
        det[sel] = idx % 2
    return slot, det


def _apply_flips(det, flip_probability: float, rng: np.random.Generator):
    flips = rng.random(det.shape[0]) < flip_probability
    det = det.copy()
    hit = flips & (det >= 0)
    det[hit] ^= 1
    return det


def bob_measure(config: SchemeConfig, train: PulseTrain, channel: ChannelModel = ChannelModel(), rng=None):
    """One detection at Bob's receiver, flipped with ``channel.flip_probability``.

    Returns a :class:`DetectionEvent` (``branch`` is the delay used, set for
    BLT_PLUS) or a :class:`BB84Outcome` carrying Bob's basis.
    """
    rng = np.random.default_rng(rng)
    if len(train) != config.n_pulses:
        raise InvalidArgumentError(f"{config} expects {config.n_pulses}-pulse trains, got {len(train)}")
    delays, phases = _bob_choices(config, 1, rng)
    slot, det = _detect(train.amplitudes[None, :], delays, phases, rng)
    det = _apply_flips(det, channel.flip_probability, rng)
    if config.scheme is Scheme.BB84:
        return BB84Outcome(int(slot[0]), Detector(int(det[0])), int(phases[0]))
    branch = int(delays[0]) if config.scheme is Scheme.BLT_PLUS else None
    return DetectionEvent(int(slot[0]), Detector(int(det[0])), branch)


# --------------------------------------------------------------------------
# sifting


def _sift_arrays(config: SchemeConfig, alice_q, slot, det, delays, phases_qt):
    """Vectorised sifting. Returns (keep mask, alice bits, bob bits)."""
    n_pulses = config.n_pulses
    slot = slot.astype(np.int64)
    delays = delays.astype(np.int64)
    interior = (slot >= delays) & (slot <= n_pulses - 1)
    rows = np.arange(len(slot))
    late = np.where(interior, slot, 0)
    early = np.where(interior, slot - delays, 0)
    diff = (alice_q[rows, late].astype(np.int64) - alice_q[rows, early] - phases_qt) % 4
    keep = interior & (diff % 2 == 0)
    return keep, interior, (diff // 2).astype(np.uint8), det.astype(np.uint8)


def sift(config: SchemeConfig, events: Sequence, alice_patterns: Sequence[PhasePattern]):
    """Apply the public-discussion step to per-train detections.

    ``events[i]`` is the detection for train ``i`` (``None`` when nothing
    clicked). Train schemes keep interior slots of each receiver branch;
    BB84 keeps central-slot detections whose basis matches Alice's.
    """
    if len(events) != len(alice_patterns):
        raise InvalidArgumentError("events and alice patterns must be aligned by train index")
    n = len(events)
    q = np.zeros((n, config.n_pulses), np.int8)
    slot = np.full(n, -1, np.int16)
    det = np.zeros(n, np.int8)
    delays = np.ones(n, np.int8)
    phases = np.zeros(n, np.int8)
    for i, (ev, pat) in enumerate(zip(events, alice_patterns)):
        if len(pat) != config.n_pulses:
            raise InvalidArgumentError(f"pattern {i} has {len(pat)} entries, expected {config.n_pulses}")
        q[i] = pat.quarter_turns
        if ev is None or ev.detector is None:
            continue
        slot[i] = ev.slot
        det[i] = int(ev.detector)
        if isinstance(ev, BB84Outcome):
            phases[i] = ev.bob_basis
        elif config.scheme is Scheme.BLT_PLUS:
            delays[i] = ev.branch or 1
    keep, _, a_bits, b_bits = _sift_arrays(config, q, slot, det, delays, phases)
    idx = np.flatnonzero(keep)
    alice = SiftedKey(a_bits[idx], idx, slot[idx])
    bob = SiftedKey(b_bits[idx], idx, slot[idx])
    return alice, bob


# --------------------------------------------------------------------------
# sessions


def _run_shard(config, n, channel, adversary, seed_seq, offset):
    alice_rng, eve_rng, bob_rng, noise_rng = (np.random.default_rng(s) for s in seed_seq.spawn(4))
    q = _alice_patterns(config, n, alice_rng)
    amps = optics.train_amplitudes(q)
    attack_draw = alice_rng.random(n)

    attacked = np.zeros(n, bool)
    blocked = np.zeros(n, bool)
    boundary = np.full(n, -1, np.int16)
    learned = np.zeros(n, bool)
    guess = np.full(n, -1, np.int8)
    if adversary is not None and channel.attack_fraction > 0:
        attacked = attack_draw < channel.attack_fraction
        sel = np.flatnonzero(attacked)
        if sel.size:
            hit = adversary.intercept(config, amps[sel], eve_rng)
            amps[sel] = hit.resent_amplitudes
            blocked[sel] = hit.blocked
            boundary[sel] = hit.boundary
            learned[sel] = hit.learned
            guess[sel] = hit.guess

    delays, phases = _bob_choices(config, n, bob_rng)
    slot, det = _detect(amps, delays, phases, bob_rng)
    slot[blocked] = -1
    det[blocked] = -1
    det = _apply_flips(det, channel.flip_probability, noise_rng)

    keep, interior, a_bits, b_bits = _sift_arrays(config, q, slot, det, delays, phases)
    detected = slot >= 0
    idx = np.flatnonzero(keep)
    known = learned & (delays == 1) & (boundary == slot.astype(np.int64) - 1)
    return {
        "a_bits": a_bits[idx],
        "b_bits": b_bits[idx],
        "train_index": idx + offset,
        "slot": slot[idx],
        "known": known[idx],
        "branch": delays[idx],
        "attacked": attacked[idx],
        "learned": learned[idx],
        "guess": guess[idx],
        "edge": int(np.sum(detected & ~interior)),
        "mismatch": int(np.sum(interior & ~keep)),
        "undetected": int(np.sum(~detected)),
        "n_attacked": int(np.sum(attacked)),
    }


def run_session(
    config: SchemeConfig,
    n_trains: int,
    channel: ChannelModel = ChannelModel(),
    adversary=None,
    seed: int = 0,
    *,
    workers: int = 1,
) -> SessionRecord:
    """Simulate ``n_trains`` single-photon key exchanges.

    Trains are processed in fixed-size shards, each with its own stream
    spawned from ``seed``; ``workers`` only sets how many shards run at once,
    so the record does not depend on it. When ``adversary`` is given, each
    train is intercepted independently with probability
    ``channel.attack_fraction``.
    """
    n_trains = check_positive_int(n_trains, "n_trains")
    workers = check_positive_int(workers, "workers")
    if adversary is not None:
        adversary.check_compatible(config)
    n_shards = -(-n_trains // SHARD_SIZE)
    seeds = np.random.SeedSequence(seed).spawn(n_shards)
    jobs = [
        (config, min(SHARD_SIZE, n_trains - k * SHARD_SIZE), channel, adversary, seeds[k], k * SHARD_SIZE)
        for k in range(n_shards)
    ]
    if workers == 1 or n_shards == 1:
        parts = [_run_shard(*job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _run_shard(*job), jobs))

    def cat(key):
        return np.concatenate([p[key] for p in parts])

    train_index, slot = cat("train_index"), cat("slot")
    return SessionRecord(
        config=config,
        trains_sent=n_trains,
        alice_key=SiftedKey(cat("a_bits"), train_index, slot),
        bob_key=SiftedKey(cat("b_bits"), train_index, slot),
        eve_known_mask=cat("known"),
        discarded_edge_detections=sum(p["edge"] for p in parts),
        discarded_basis_mismatch=sum(p["mismatch"] for p in parts),
        undetected_trains=sum(p["undetected"] for p in parts),
        trains_attacked=sum(p["n_attacked"] for p in parts),
        branch=cat("branch"),
        attacked=cat("attacked"),
        eve_learned=cat("learned"),
        eve_guess=cat("guess"),
    )


def empirical_metrics(record: SessionRecord) -> EmpiricalMetrics:
    n = record.sifted_bits
    if n == 0:
        raise EmptyKeyError(f"{record.config} session of {record.trains_sent} trains sifted no key bits")
    return EmpiricalMetrics(
        eta_p_hat=n / record.trains_sent,
        p_o_hat=float(np.mean(record.errors())),
        eve_fraction_hat=float(np.mean(record.eve_known_mask)),
        sifted_bits=n,
        trains_sent=record.trains_sent,
    )
