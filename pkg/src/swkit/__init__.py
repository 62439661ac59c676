"""Sliced Wasserstein toolkit.

Discrete-measure transport primitives, a family of weighted-slice distance
estimators, closed-form and empirical subspace scale factors, particle flows,
benchmark datasets, and palette-based color transfer.
"""

from .errors import (
    CloudParseError,
    ContractError,
    DegeneratePairError,
    DivergenceError,
    ResourceLimitError,
    UnsupportedInputError,
)
from .measures import (
    OneDimCoupling,
    WeightedCloud,
    coupling_1d,
    exact_w2,
    load_cloud_csv,
    save_cloud_csv,
    wasserstein_1d,
)
from .slicing import (
    SliceSet,
    Subspace,
    phi_es,
    project,
    random_rotation,
    reduce_slice,
    sample_gaussian_raw,
    sample_random_path_slices,
    sample_uniform_sphere,
    save_slices_csv,
)
from .variants import (
    SwEstimate,
    WeightingScheme,
    ebsw,
    max_sw,
    rescaled_sw,
    rpsw,
    sw_mc,
)
from .essf import (
    essf_empirical,
    essf_exact,
    essf_variance_curve,
    projected_norm_moment,
    validate_theorem,
)
from .flow import (
    FlowConfig,
    FlowTrace,
    SweepRow,
    expected_gradient,
    lr_sweep,
    optimal_lr,
    run_flow,
    save_sweep_csv,
    save_trace_csv,
    sw_gradient,
)
from .datasets import (
    EmbeddedPair,
    eight_gaussians_2d,
    embed,
    embedding_subspace,
    gaussian_pair_subspace,
    knot_2d,
    swiss_roll_2d,
)
from .colors import (
    Palette,
    image_to_cloud,
    kmeans_palette,
    read_image,
    synthetic_image_pair,
    transfer_colors,
    write_image,
)

__version__ = "0.1.0"

__all__ = [
    "CloudParseError",
    "ContractError",
    "DegeneratePairError",
    "DivergenceError",
    "ResourceLimitError",
    "UnsupportedInputError",
    "OneDimCoupling",
    "WeightedCloud",
    "coupling_1d",
    "exact_w2",
    "load_cloud_csv",
    "save_cloud_csv",
    "wasserstein_1d",
    "SliceSet",
    "Subspace",
    "phi_es",
    "project",
    "random_rotation",
    "reduce_slice",
    "sample_gaussian_raw",
    "sample_random_path_slices",
    "sample_uniform_sphere",
    "save_slices_csv",
    "SwEstimate",
    "WeightingScheme",
    "ebsw",
    "max_sw",
    "rescaled_sw",
    "rpsw",
    "sw_mc",
    "essf_empirical",
    "essf_exact",
    "essf_variance_curve",
    "projected_norm_moment",
    "validate_theorem",
    "FlowConfig",
    "FlowTrace",
    "SweepRow",
    "expected_gradient",
    "lr_sweep",
    "optimal_lr",
    "run_flow",
    "save_sweep_csv",
    "save_trace_csv",
    "sw_gradient",
    "EmbeddedPair",
    "eight_gaussians_2d",
    "embed",
    "embedding_subspace",
    "gaussian_pair_subspace",
    "knot_2d",
    "swiss_roll_2d",
    "Palette",
    "image_to_cloud",
    "kmeans_palette",
    "read_image",
    "synthetic_image_pair",
    "transfer_colors",
    "write_image",
    "__version__",
]
