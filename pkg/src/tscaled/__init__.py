"""Tensor algebra under invertible mode-3 transforms with scaled gradient
descent solvers for low-rank recovery, completion and robust PCA."""

from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptySpectrum,
    EmptyTraceSet,
    ImaginaryResidueTooLarge,
    NegativeThreshold,
    NoConvergence,
    NotOrthogonalUpToScale,
    NotPSDSlice,
    PreconditionerSingular,
    RankDeficientFactor,
    RankOutOfRange,
    SingularSlice,
    SvdFailure,
    TscaledError,
    UnknownKind,
    ZeroReference,
    ZeroSignal,
)
from .metrics import (
    AlignmentResult,
    FactorPair,
    GroundTruth,
    align,
    dist,
    incoherence,
    relative_error,
    singular_extremes,
)
from .solvers import (
    Method,
    ObservationSet,
    RunHistory,
    RunStatus,
    SolverParams,
    ThresholdSchedule,
    completion_step,
    project_observed,
    rpca_step,
    run_completion,
    run_factorization,
    run_rpca,
    scaled_projection,
    soft_threshold,
    spectral_init_completion,
    spectral_init_rpca,
)
from .synth import (
    add_gaussian_noise,
    gen_bernoulli_mask,
    gen_ground_truth,
    gen_sparse_corruption,
    sparsity_fraction,
)
from .talg import (
    MultiRank,
    TSVDFactors,
    conj_transpose,
    identity_tensor,
    multi_rank,
    norm,
    read_tsr3,
    t_inverse,
    t_product,
    t_sqrt,
    t_svd,
    truncate,
    write_tsr3,
)
from .transform import (
    SpectralTensor,
    TransformKind,
    TransformSpec,
    forward,
    inverse,
    make_custom_transform,
    make_transform,
)

__version__ = "0.1.0"
