"""Switched banded low-rank adaptive filtering.

A library and CLI for reduced-rank adaptive interference suppression:
constrained banded decompositions with parallel placement branches,
alternating recursive least-squares updates of the basis filters and the
reduced filter bank, covariance-based reference filters, and a DS-CDMA
space-time Monte-Carlo testbench.
"""

from .baselines import (
    CovariancePair,
    FullRankRlsState,
    eigen_subspace,
    estimate_covariances,
    full_rank_rls_step,
    init_full_rank_rls,
    mmse_value,
    optimal_reduced_filter,
)
from .decomposition import (
    DecompositionMatrix,
    ShapingPattern,
    assemble_decomposition,
    build_hankel,
    build_shaping_pattern,
    default_patterns,
    filter_output,
    hankel_window,
    reduce_dimension,
    window_stack,
)
from .experiment import (
    CurvePoint,
    ExperimentConfig,
    emit_csv,
    load_config,
    run_ber_vs_symbols,
    run_mse_vs_rank,
)
from .simulator import (
    MultipathChannel,
    ScenarioState,
    SystemGeometry,
    UserSignature,
    build_convolution_matrix,
    clarke_fading_step,
    draw_user_powers,
    generate_received_vector,
    generate_signatures,
    make_scenario,
    qpsk_decide,
    qpsk_modulate,
    simulate_packet,
)
from .switched_rls import (
    BranchState,
    StepOutput,
    SwitchedRlsState,
    init_state,
    load_state,
    save_state,
    select_branch,
    step,
    update_basis_filters,
    update_filter_bank,
)

__version__ = "0.1.0"
