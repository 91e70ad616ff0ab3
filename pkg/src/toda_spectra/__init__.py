"""Inverse-map series, Gram-block spectra and Laplacian-growth diagnostics."""

from .errors import (
    TodaSpectraError,
    NoConvergence,
    DegenerateSeries,
    NoDominantOrbit,
    BranchJump,
    TailNotConverged,
    InsufficientData,
    TrajectoryStalled,
    UnivalenceLost,
    QuadratureNotConverged,
    Degenerate,
    LogBranchCut,
    NotBracketed,
)
from .series_engine import (
    Leaf,
    ParamPoint,
    PowerSeries,
    CirclePowerTable,
    taylor_branch,
    taylor_branch_x_grid,
    powers_table,
    raney_oracle,
    functional_residual,
    branch_power_rows,
)
from .branch_points import (
    CharPoint,
    DominantData,
    solve_characteristic,
    radius_estimate,
    amplitude_A,
    dominant_data,
    continue_critical,
    critical_parameter,
)
from .hessian_blocks import (
    RenormConfig,
    HermitianMatrix,
    kernel_hessian_oracle,
    tail_cutoff_for,
    gram_block,
    mode_gram_vectors,
    eigensystem,
    eigenvalues,
    hs_norm,
    check_alpha_admissible,
)
from .spectral_scan import (
    BlockSpectrum,
    ScanPoint,
    FitReport,
    log_scale,
    spike_vector,
    scan_path,
    fit_log_scaling,
    default_threads,
)
from .laplacian_growth import (
    TrajectoryState,
    ThresholdReport,
    MomentDriver,
    SliceDriver,
    harmonic_moments,
    univalence_margin,
    initial_state,
    evolve,
    radius_excess,
    detect_thresholds,
    approach_path,
)
from .explicit_leaves import (
    PoleLeafPoint,
    LogLeafPoint,
    LogCharData,
    PhaseCell,
    PhaseTable,
    pole_rho_char,
    pole_germ_radius,
    log_rho_char,
    log_germ_radius,
    log_germ_envelope_radius,
    phase_diagram,
    gamma_c_solve,
)

__version__ = "0.1.0"
