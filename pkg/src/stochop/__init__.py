"""Sampling and identification of stochastic time-varying operators.

Desk-scale machinery: finite Gabor frames (gabor), autocorrelation support
patterns and their classification (patterns, tensor), and a discrete
channel simulator with the delta-train identification pipeline (channel).
"""

from .errors import (
    AsymmetricMask,
    BudgetExceeded,
    CollisionModL,
    FormatError,
    InsufficientExtent,
    MetadataMismatch,
    NotLeftInvertible,
    ResidualTooLarge,
    SingularSubframe,
    StochopError,
    SupportViolation,
    TrainTooShort,
    UnsynthesizablePattern,
)
from .gabor import (
    GaborFrame,
    HaarReport,
    TorusIndex,
    Window,
    build_frame,
    commutation_check,
    haar_check,
    modulate,
    random_window,
    stft_self,
    torus_indices,
    translate,
    window,
)
from .patterns import (
    ConjugateReflect,
    FourierRotate,
    Pattern,
    SupportMask,
    Translate,
    companion_window,
    detect_tall,
    detect_two_squares,
    diagonal_pattern,
    enumerate_spd,
    homology_apply,
    homology_orbit_id,
    pattern,
    pattern_from_graph,
    rectify_support,
    spd_census,
    spd_count,
    tensor_pattern,
    validate_spd,
)
from .tensor import (
    ClassificationResult,
    CovarianceMatrix,
    RestrictedTensorFrame,
    cartesian_split,
    classify_pattern,
    deterministic_solve,
    forward_mixing,
    random_covariance,
    rank_and_left_inverse,
    recover_covariance,
    restricted_tensor_frame,
    unvec,
    vec,
)
from .channel import (
    DeltaTrain,
    GridSpec,
    ResponseRecord,
    SpreadingField,
    StochasticSpreadingModel,
    apply_channel,
    clique_cover_model,
    demix,
    ensemble_autocorrelation,
    exact_autocorrelation,
    random_field,
    reconstruct_R,
    reconstruct_eta_tensor,
    reconstruct_scattering_wssus,
    sample_realization,
    simulate_responses,
    synthesize_model,
    wssus_model,
    zak,
)

__version__ = "0.1.0"
