"""Measurement-induced steering of a quantum spin-bath environment.

Sequential qubit coherence measurements act on the probed environment as
repeated applications of a quantum channel.  This package builds that channel
for central-spin models (Kraus, natural and dilation representations),
analyzes its spectrum, fixed points and metastable structure, samples
measurement trajectories with exact conditional-state tracking, and supplies
the closed-form non-i.i.d. measurement statistics the steering produces.
"""

from .channel import (
    ChannelAnalysis,
    CPTPReport,
    FixedPointDecomposition,
    KrausPair,
    MetastableWindow,
    Steering,
    analyze_channel,
    asymptotic_projector,
    choi_matrix,
    classify_steering,
    fixed_points,
    kraus_from_model,
    metastable_window,
    natural_representation,
    stinespring_channel,
    validate_cptp,
)
from .lindblad import NoiseSpec, liouvillian, noisy_rim_instrument, run_noisy_ensemble
from .linalg import (
    devec,
    eig_general,
    expm_general,
    expm_hermitian,
    fidelity,
    hs_inner,
    kron,
    psd_sqrt,
    trace_distance,
    vec,
)
from .models import (
    ModelOperators,
    ModelSpec,
    build_dd_effective,
    build_explicit,
    build_model,
    build_multi_spin,
    build_single_spin,
    cpmg_cycle_time,
    dipolar_tensor,
    evolution_time,
    noncommutativity_eta,
)
from .stats import (
    ExpectationReport,
    PeakReport,
    analytic_expectation_f1,
    analytic_variance_fixed,
    asymptotic_tail_vanishing,
    coherence,
    commuting_peak_distribution,
    fixed_point_peak_centers,
    iid_binomial_baseline,
    peak_report,
)
from .trajectories import (
    BruteForceDistribution,
    MeasurementInstrument,
    TrajectoryEnsemble,
    TrajectoryRecord,
    brute_force_distribution,
    channel_power_state,
    default_class_edges,
    run_ensemble,
    run_trajectory,
    step,
    total_variation,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelAnalysis",
    "CPTPReport",
    "FixedPointDecomposition",
    "KrausPair",
    "MetastableWindow",
    "Steering",
    "analyze_channel",
    "asymptotic_projector",
    "choi_matrix",
    "classify_steering",
    "fixed_points",
    "kraus_from_model",
    "metastable_window",
    "natural_representation",
    "stinespring_channel",
    "validate_cptp",
    "NoiseSpec",
    "liouvillian",
    "noisy_rim_instrument",
    "run_noisy_ensemble",
    "devec",
    "eig_general",
    "expm_general",
    "expm_hermitian",
    "fidelity",
    "hs_inner",
    "kron",
    "psd_sqrt",
    "trace_distance",
    "vec",
    "ModelOperators",
    "ModelSpec",
    "build_dd_effective",
    "build_explicit",
    "build_model",
    "build_multi_spin",
    "build_single_spin",
    "cpmg_cycle_time",
    "dipolar_tensor",
    "evolution_time",
    "noncommutativity_eta",
    "ExpectationReport",
    "PeakReport",
    "analytic_expectation_f1",
    "analytic_variance_fixed",
    "asymptotic_tail_vanishing",
    "coherence",
    "commuting_peak_distribution",
    "fixed_point_peak_centers",
    "iid_binomial_baseline",
    "peak_report",
    "BruteForceDistribution",
    "MeasurementInstrument",
    "TrajectoryEnsemble",
    "TrajectoryRecord",
    "brute_force_distribution",
    "channel_power_state",
    "default_class_edges",
    "run_ensemble",
    "run_trajectory",
    "step",
    "total_variation",
]
