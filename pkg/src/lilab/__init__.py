"""Numerical laboratory for iterated-logarithm behaviour of matrix martingales.

Finite-dimensional tracial algebras, exact conditional expectations,
martingale brackets and dilations, trace-inequality verifiers, and
desk-scale Monte Carlo experiments contrasting the classical sqrt(2)
fluctuation scale with the strictly smaller free/matrix regime.
"""

__version__ = "0.1.0"

from .blocks import (
    Interval,
    Operator,
    Spectrum,
    TracialAlgebra,
    apply_function,
    atom_algebra,
    central_operator,
    herm_fn,
    herm_spectrum,
    hilbert_inner,
    l2_norm,
    lp_norm,
    matrix_algebra,
    operator_norm,
    projection_meet,
    s_number,
    scalar_algebra,
    spectral_indicator,
    trace,
    trace_real,
)
from .expectation import (
    Filtration,
    MarginalSubalgebra,
    Subalgebra,
    compress_projection,
    cond_expect,
    partition_subalgebra,
    span_subalgebra,
    tensor_filtration,
    verify_tower,
)
from .inequalities import (
    IneqReport,
    WitnessTail,
    bennett_bound,
    bennett_check,
    bernstein_bound,
    bernstein_check,
    bernstein_lambda_max,
    chebyshev_witness,
    exp_remainder,
    exp_remainder_ratio,
    golden_thompson_gap,
    power_exp_bound,
    scaling_monotonicity_check,
    triple_gt_gap,
    triple_gt_integral,
)
from .lil import (
    BlockScheme,
    ExperimentReport,
    SlackParameters,
    block_scheme,
    borel_cantelli_budget,
    choose_slack,
    dominating_sequence,
    iid_pipeline,
    kronecker_diagnostic,
    lil_run,
    middle_band_mass,
    middle_band_scan,
)
from .martingale import (
    Martingale,
    ScaleTrack,
    TwoPointLaw,
    bracket,
    dilate,
    gen_dyadic_rademacher,
    gen_gue_sum,
    gen_iid_tower,
    gen_skewed_twopoint,
    gen_tensor_hermitian,
    iterated_log,
    three_band_split,
    truncate_center,
)
from .tensor import Factor, TensorSpace, atom_factor, matrix_factor
