"""Exception hierarchy shared across the package."""


class TscaledError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(TscaledError):
    pass


class NotOrthogonalUpToScale(TscaledError):
    """The candidate transform matrix violates Phi Phi^H = ell I."""


class ImaginaryResidueTooLarge(TscaledError):
    """Inverse transform produced a significant imaginary part.

    Raised when transform-domain data is not consistent with a real
    spatial-domain tensor (e.g. conjugate symmetry was destroyed).
    """


class SvdFailure(TscaledError):
    """A per-slice SVD did not converge."""


class RankOutOfRange(TscaledError):
    pass


class SingularSlice(TscaledError):
    def __init__(self, slice_index, msg=None):
        self.slice_index = slice_index
        super().__init__(msg or f"transformed frontal slice {slice_index} is singular")


class NotPSDSlice(TscaledError):
    def __init__(self, slice_index, msg=None):
        self.slice_index = slice_index
        super().__init__(msg or f"transformed frontal slice {slice_index} is not Hermitian PSD")


class UnknownKind(TscaledError):
    pass


class EmptySpectrum(TscaledError):
    """No positive singular values found (zero multi-rank)."""


class RankDeficientFactor(TscaledError):
    """A factor has a rank-deficient transformed slice; alignment is ill-posed."""


class NoConvergence(TscaledError):
    """An iterative slice solver hit its iteration cap.

    Carries the residual reached and, when available, the best result
    found so far on the ``result`` attribute.
    """

    def __init__(self, residual, result=None):
        self.residual = residual
        self.result = result
        super().__init__(f"alignment solver did not converge (residual {residual:.3e})")


class ZeroReference(TscaledError):
    pass


class NegativeThreshold(TscaledError):
    pass


class PreconditionerSingular(TscaledError):
    def __init__(self, slice_index, iteration=None):
        self.slice_index = slice_index
        self.iteration = iteration
        where = f" at iteration {iteration}" if iteration is not None else ""
        super().__init__(f"preconditioner slice {slice_index} is numerically singular{where}")


class ZeroSignal(TscaledError):
    pass


class EmptyTraceSet(TscaledError):
    pass


class ConfigError(TscaledError):
    """Invalid experiment configuration; message carries the field path."""
