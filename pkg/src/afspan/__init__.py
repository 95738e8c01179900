"""afspan: affine-span approximation experiments and exact measure-theory checks.

The package demonstrates, at desk scale, that dilated and shifted copies of an
arbitrary nonzero square-integrable function can approximate square-integrable
targets, in contrast with the translation-only regime whose reach is limited
by spectral zero sets. The supporting machinery (exact rational ball mapping,
grid-cell measure theory, rational-matrix orbit coverage) is exposed as
ordinary library functions; see ``afspan.cli`` for the experiment front end.
"""

from .l2core import (
    DEFAULT_GRID,
    AffineAtom,
    GridFunction,
    GridSpec,
    SpectrumDiagnostic,
    affine_pullback,
    bandlimited,
    check_scaling_identity,
    fourier_transform,
    gaussian,
    hat_from_relu,
    indicator,
    inner_product,
    l2_norm,
    load_grid_function,
    save_grid_function,
    zero_set_fraction,
)
from .approx import (
    ApproximationResult,
    DictionaryConfig,
    build_dictionary,
    convergence_table,
    default_dictionary_config,
    greedy_fit,
    project_span,
    reconstruct,
    spectral_lower_bound,
    translation_only_baseline,
)
from .ballmap import (
    BallMapReport,
    BallSpec,
    ball_volume,
    choose_delta,
    exact_ball_map,
    gram_schmidt_basis,
    rationalize,
    run_ball_map_pipeline,
    verify_conditions,
)
from .cellmeasure import (
    DiscreteSet,
    chain_inequality_check,
    density_profile,
    enumerate_rational_matrices,
    find_density_point,
    measure,
    orbit_coverage,
)
from .rational import RationalMatrix, best_rational_within

__version__ = "0.1.0"
