"""Simulation and analysis of phase-coded fiber QKD schemes (BB84, IWY, BLT, BLT+)."""

from ._validation import BracketError, EmptyKeyError, InvalidArgumentError, UnsupportedConfigError
from .adversary import (
    AttackEstimate,
    AttackKind,
    AttackStrategy,
    EveRecord,
    PassThrough,
    breidbart_intercept,
    estimate_attack_params,
    switch_intercept_resend,
)
from .analysis import (
    SchemeMetrics,
    SweepRow,
    crossover,
    find_crossover,
    key_fraction,
    mu_r,
    multiphoton_leakage,
    scheme_metrics,
    sweep,
)
from .optics import (
    DelaySpec,
    DetectionDistribution,
    DetectionEvent,
    Detector,
    PhasePattern,
    PulseTrain,
    build_train,
    interferometer_distribution,
    parallel_transmitter_train,
    sample_detection,
    serial_transmitter_train,
    switch_overlap_distribution,
)
from .protocols import (
    BB84Outcome,
    ChannelModel,
    EmpiricalMetrics,
    Scheme,
    SchemeConfig,
    SessionRecord,
    SiftedKey,
    bob_measure,
    empirical_metrics,
    encode_train,
    run_session,
    sift,
)

__version__ = "0.1.0"
