"""Intercept/resend eavesdroppers.

Two strategies are modelled:

``SWITCH_PAIR``
    For the train schemes. Eve replaces the receiver's input splitter by a
    fast switch so that a chosen pair of adjacent bins overlaps completely on
    a 50/50 splitter. A single photon then reveals exactly one adjacent phase
    difference, which she knows with certainty. She resends a full ``N``-bin
    train carrying that difference and uniformly random values for the rest.

``BREIDBART``
    For BB84. Eve measures in the basis halfway between Bob's two bases and
    resends the state she observed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import optics
from ._validation import EmptyKeyError, InvalidArgumentError, check_positive_int
from .optics import PhasePattern, PulseTrain
from .protocols import ChannelModel, Scheme, SchemeConfig, run_session

BREIDBART_ANGLE = math.pi / 4
MIN_ESTIMATE_TRAINS = 10_000


class AttackKind(str, enum.Enum):
    BREIDBART = "breidbart"
    SWITCH_PAIR = "switch_pair"


class PassThrough(str, enum.Enum):
    """What Eve does when the photon lands in an unpaired bin (odd ``N``).

    ``BLOCK`` sends nothing on, so the loss looks like ordinary channel
    loss and every resent train carries one known difference. ``RESEND``
    emits a train with all differences random.
    """

    BLOCK = "block"
    RESEND = "resend"


@dataclass(frozen=True)
class EveRecord:
    """What Eve took away from one train.

    ``boundary`` is the left bin of the adjacent pair she overlapped (the
    difference between bins ``boundary`` and ``boundary + 1``), ``None`` on a
    pass-through. ``guess`` is only set for Breidbart attacks.
    """

    boundary: int | None = None
    known_phase_difference: int | None = None
    resent_pattern: PhasePattern | None = None
    guess: int | None = None


@dataclass
class InterceptBatch:
    resent_amplitudes: np.ndarray
    blocked: np.ndarray
    boundary: np.ndarray
    learned: np.ndarray
    guess: np.ndarray
    resent_quarter_turns: np.ndarray | None = None
    known_difference: np.ndarray | None = None


def switch_schedule_left_bins(n_pulses: int, k: int, rng: np.random.Generator):
    """Left bins of Eve's adjacent pairs for ``k`` trains of ``n_pulses`` bins.

    Even trains use the fixed pairing (0,1), (2,3), ... . Odd trains leave one
    bin unpaired, at an even index drawn uniformly, and pair the rest in
    order. Returns ``(left, unpaired)`` with ``unpaired`` = -1 for even trains.
    """
    n_pairs = n_pulses // 2
    pairs = np.arange(n_pairs)
    if n_pulses % 2 == 0:
        return np.broadcast_to(2 * pairs, (k, n_pairs)).copy(), np.full(k, -1)
    unpaired = 2 * rng.integers(0, n_pairs + 1, k)
    left = np.where(2 * pairs[None, :] < unpaired[:, None], 2 * pairs, 2 * pairs + 1)
    return left, unpaired


def _switch_intercept(amplitudes, rng, pass_through: PassThrough) -> InterceptBatch:
    k, n = amplitudes.shape
    left, unpaired = switch_schedule_left_bins(n, k, rng)
    pair_probs = optics.switch_pair_probabilities(amplitudes, left).reshape(k, -1)
    if n % 2:
        single = np.abs(amplitudes[np.arange(k), unpaired]) ** 2
        probs = np.concatenate([pair_probs, single[:, None]], axis=1)
    else:
        probs = pair_probs
    outcome = optics.sample_categorical(probs, rng)
    learned = outcome < pair_probs.shape[1]
    pair = np.minimum(outcome // 2, left.shape[1] - 1)
    boundary = np.where(learned, left[np.arange(k), pair], -1)
    known = np.where(learned, 2 * (outcome % 2), 0)

    diffs = 2 * rng.integers(0, 2, (k, n - 1))
    rows = np.flatnonzero(learned)
    diffs[rows, boundary[rows]] = known[rows]
    q = np.zeros((k, n), np.int8)
    q[:, 1:] = np.cumsum(diffs, axis=1) % 4
    blocked = ~learned if pass_through is PassThrough.BLOCK else np.zeros(k, bool)
    return InterceptBatch(
        resent_amplitudes=optics.train_amplitudes(q),
        blocked=blocked,
        boundary=boundary.astype(np.int16),
        learned=learned,
        guess=np.full(k, -1, np.int8),
        resent_quarter_turns=q,
        known_difference=known,
    )


def _breidbart_intercept(amplitudes, rng) -> InterceptBatch:
    k = amplitudes.shape[0]
    # overlap the two BB84 bins with the intermediate-basis phase
    probs = optics.switch_pair_probabilities(amplitudes, np.zeros((k, 1), int), phase=BREIDBART_ANGLE)
    det = optics.sample_categorical(probs.reshape(k, 2), rng)
    resent_phase = BREIDBART_ANGLE + math.pi * det
    resent = np.stack([np.ones(k), np.exp(1j * resent_phase)], axis=1) / math.sqrt(2)
    return InterceptBatch(
        resent_amplitudes=resent,
        blocked=np.zeros(k, bool),
        boundary=np.full(k, -1, np.int16),
        learned=np.ones(k, bool),
        guess=det.astype(np.int8),
    )


@dataclass(frozen=True)
class AttackStrategy:
    kind: AttackKind
    pass_through: PassThrough = PassThrough.BLOCK

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        object.__setattr__(self, "pass_through", PassThrough(self.pass_through))

    @classmethod
    def for_scheme(cls, config: SchemeConfig, pass_through=PassThrough.BLOCK) -> "AttackStrategy":
        kind = AttackKind.BREIDBART if config.scheme is Scheme.BB84 else AttackKind.SWITCH_PAIR
        return cls(kind, pass_through)

    def compatible(self, config: SchemeConfig) -> bool:
        return (self.kind is AttackKind.BREIDBART) == (config.scheme is Scheme.BB84)

    def check_compatible(self, config: SchemeConfig) -> None:
        if not self.compatible(config):
            raise InvalidArgumentError(f"{self.kind.value} attack does not apply to {config}")

    def intercept(self, config: SchemeConfig, amplitudes, rng) -> InterceptBatch:
        self.check_compatible(config)
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if self.kind is AttackKind.BREIDBART:
            return _breidbart_intercept(amplitudes, rng)
        return _switch_intercept(amplitudes, rng, self.pass_through)


def switch_intercept_resend(
    config: SchemeConfig, train: PulseTrain, rng=None, pass_through=PassThrough.BLOCK
) -> tuple[EveRecord, PulseTrain | None]:
    """Fast-switch attack on one train; the resent train is ``None`` if blocked."""
    strategy = AttackStrategy(AttackKind.SWITCH_PAIR, pass_through)
    strategy.check_compatible(config)
    if len(train) != config.n_pulses:
        raise InvalidArgumentError(f"{config} expects {config.n_pulses}-pulse trains, got {len(train)}")
    hit = strategy.intercept(config, train.amplitudes[None, :], np.random.default_rng(rng))
    pattern = PhasePattern(tuple(int(v) for v in hit.resent_quarter_turns[0]))
    if hit.learned[0]:
        record = EveRecord(int(hit.boundary[0]), int(hit.known_difference[0]), pattern)
    else:
        record = EveRecord(None, None, None if hit.blocked[0] else pattern)
    resent = None if hit.blocked[0] else PulseTrain(hit.resent_amplitudes[0])
    return record, resent


def breidbart_intercept(alice_phase: int, rng=None) -> tuple[int, float]:
    """Breidbart measurement of a BB84 state given in quarter turns.

    Returns Eve's guessed bit and the phase (radians) of the state she
    resends, which is pi/4 or 5pi/4.
    """
    if isinstance(alice_phase, bool) or alice_phase not in (0, 1, 2, 3):
        raise InvalidArgumentError(f"BB84 phases are 0..3 quarter turns, got {alice_phase!r}")
    amps = optics.train_amplitudes(np.array([[0, alice_phase]]))
    hit = _breidbart_intercept(amps, np.random.default_rng(rng))
    guess = int(hit.guess[0])
    return guess, BREIDBART_ANGLE + math.pi * guess


@dataclass(frozen=True)
class AttackEstimate:
    """Monte Carlo (eta_e, p_d) under full interception.

    ``eta_e_hat`` counts sifted bits Eve knows with certainty.
    ``guess_success_hat`` is the Breidbart guess rate (BB84 only, else NaN).
    The ``*_conditioned`` values restrict to trains on which Eve obtained a
    measurement; they differ from the plain values only for odd-``N``
    trains attacked with pass-through resend.
    """

    config: SchemeConfig
    n_trains: int
    sifted_bits: int
    eta_e_hat: float
    p_d_hat: float
    guess_success_hat: float
    eta_e_conditioned: float
    p_d_conditioned: float

    def sigma(self, p: float) -> float:
        """Binomial standard error at true rate ``p`` for this sample size."""
        return math.sqrt(p * (1 - p) / self.sifted_bits)


def estimate_attack_params(
    config: SchemeConfig,
    n_trains: int,
    seed: int = 0,
    *,
    pass_through=PassThrough.BLOCK,
    workers: int = 1,
) -> AttackEstimate:
    n_trains = check_positive_int(n_trains, "n_trains")
    if n_trains < MIN_ESTIMATE_TRAINS:
        raise InvalidArgumentError(f"attack estimates need at least {MIN_ESTIMATE_TRAINS} trains")
    strategy = AttackStrategy.for_scheme(config, pass_through)
    record = run_session(
        config, n_trains, ChannelModel(attack_fraction=1.0), strategy, seed, workers=workers
    )
    if record.sifted_bits == 0:
        raise EmptyKeyError(f"{config} attack session sifted no key bits")
    errors = record.errors()
    known = record.eve_known_mask
    cond = record.eve_learned
    if config.scheme is Scheme.BB84:
        guess_success = float(np.mean(record.eve_guess == record.alice_key.bits))
    else:
        guess_success = math.nan
    return AttackEstimate(
        config=config,
        n_trains=n_trains,
        sifted_bits=record.sifted_bits,
        eta_e_hat=float(np.mean(known)),
        p_d_hat=float(np.mean(errors)),
        guess_success_hat=guess_success,
        eta_e_conditioned=float(np.mean(known[cond])) if cond.any() else math.nan,
        p_d_conditioned=float(np.mean(errors[cond])) if cond.any() else math.nan,
    )
