"""uhrkit: ultra-high-resolution corpus curation plus the numerics behind it.

The package splits into a curation side (image metrics, manifest
records, aesthetic scoring, selection pipeline) and a numerics side
(soft-weighted spectral loss, Beta timestep sampling, a desk-scale
velocity-prediction trainer for mechanism experiments).  Everything is
reachable from the ``uhrkit`` CLI.
"""

from .config import (
    BetaParams,
    FreqRegConfig,
    RunConfig,
    ScorerSpec,
    SelectionConfig,
    TrainConfig,
    load_run_config,
    run_config_from_dict,
    run_config_to_dict,
)
from .errors import (
    ConfigError,
    InvalidInputError,
    NumericalError,
    ParseError,
    ScorerUnavailableError,
    UhrkitError,
)
from .metrics import (
    GlcmFeatures,
    MetricVector,
    compute_metrics,
    downsample,
    glcm,
    glcm_features,
    glcm_offsets,
    glcm_score,
    laplacian_variance,
    quantize_levels,
    shannon_entropy,
    sobel_edge_density,
    to_grayscale,
)
from .records import MANIFEST_KEYS, ImageRecord, read_manifest, write_manifest
from .freqreg import (
    band_energies,
    dft2,
    freq_loss,
    freq_loss_grad,
    idft2,
    radial_field,
    soft_weight,
    weight_field,
)
from .timesteps import (
    TIME_ORIENTATION,
    BetaSampler,
    beta_cdf,
    beta_pdf,
    ln_beta,
    ln_gamma,
    map_to_discrete,
)
from .textures import TextureSpec, gen_texture, high_band_fraction
from .flowtrain import (
    PredictorParams,
    TrainResult,
    band_error,
    experiment_compare,
    forward_diffuse,
    init_params,
    loss_and_grad,
    make_eval_set,
    predict,
    train,
    velocity_target,
)
from .scoring import SubprocessScorer, apply_aesthetic_scores, heuristic_aesthetic, load_score_file

__version__ = "0.1.0"
