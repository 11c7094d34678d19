"""Pulse-shaping design and ambiguity-function statistics for random-symbol ISAC waveforms."""

from .signal_core import (
    Constellation,
    Esd,
    FrameConfig,
    Pulse,
    discrete_af,
    esd_to_acf,
    esd_to_pulse,
    make_constellation,
    make_rrc_esd,
)
from .af_stats import (
    AfMoments,
    af_moments,
    af_variance,
    alpha0,
    asymptotic_sacf,
    expected_af,
    expected_saf,
    wssus_output_power,
)
from .design_problem import (
    DesignWeights,
    GeneralProblem,
    QpProblem,
    build_general_problem,
    build_nyquist_system,
    build_qp,
    eval_constraints,
    eval_general_wisl,
    make_weights,
    range_to_delay_bins,
)
from .optimizers import (
    AdmmConfig,
    ScaConfig,
    SolveReport,
    admm_solve,
    reference_solve,
    sca_gradient,
    sca_solve,
    sca_subproblem,
)

__version__ = "0.1.0"
