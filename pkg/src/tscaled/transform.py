"""Invertible linear transforms applied along the third tensor mode.

A transform is defined by a square matrix ``phi`` that is orthogonal up to
a positive scale ``ell``::

    phi @ phi.conj().T == phi.conj().T @ phi == ell * I

The two built-ins are the unnormalized DFT (``ell == n3``) and the
orthonormal type-II DCT (``ell == 1``).  Arbitrary matrices satisfying the
constraint can be supplied through :func:`make_custom_transform`.

Transforms are applied by explicit matrix-tube multiplication so that the
built-ins and custom matrices share one code path.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ImaginaryResidueTooLarge, NotOrthogonalUpToScale

# Relative tolerance of the orthogonality invariant for built-in matrices.
ORTHO_TOL = 1e-10
# Looser acceptance tolerance for user-supplied matrices.
CUSTOM_ORTHO_TOL = 1e-8
# Imaginary residue admitted when mapping transform-domain data back to a
# real tensor, relative to 1 + Frobenius norm.
IMAG_RESIDUE_TOL = 1e-9


class TransformKind(enum.Enum):
    DFT = "dft"
    DCT = "dct"
    CUSTOM = "custom"


@dataclass(frozen=True)
class TransformSpec:
    """An invertible mode-3 transform: matrix, scale and provenance tag."""

    phi: np.ndarray
    ell: float
    kind: TransformKind
    phi_inv: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        phi = np.ascontiguousarray(self.phi, dtype=np.complex128)
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        inv = np.ascontiguousarray(phi.conj().T / self.ell)
        inv.setflags(write=False)
        object.__setattr__(self, "phi_inv", inv)

    @property
    def n3(self) -> int:
        return self.phi.shape[0]


@dataclass(frozen=True)
class SpectralTensor:
    """Transform-domain values of a real tensor, shape (n1, n2, n3) complex."""

    data: np.ndarray


def _orthogonality_defect(phi: np.ndarray, ell: float) -> float:
    eye = np.eye(phi.shape[0])
    d1 = np.max(np.abs(phi @ phi.conj().T - ell * eye))
    d2 = np.max(np.abs(phi.conj().T @ phi - ell * eye))
    return max(d1, d2)


def _validate(phi: np.ndarray, ell: float, tol: float) -> None:
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise NotOrthogonalUpToScale("transform matrix must be square")
    if not ell > 0:
        raise NotOrthogonalUpToScale(f"scale must be positive, got {ell}")
    defect = _orthogonality_defect(phi, ell)
    if defect > tol * ell:
        raise NotOrthogonalUpToScale(
            f"matrix is not orthogonal up to scale {ell}: defect {defect:.3e} > {tol * ell:.3e}"
        )


def dft_matrix(n3: int) -> np.ndarray:
    """Unnormalized DFT matrix, entries omega**(j*k) with omega = exp(-2j*pi/n3)."""
    j, k = np.meshgrid(np.arange(n3), np.arange(n3), indexing="ij")
    return np.exp(-2j * np.pi * j * k / n3)


def dct_matrix(n3: int) -> np.ndarray:
    """Orthonormal type-II DCT matrix (real, DCT @ DCT.T == I)."""
    j, k = np.meshgrid(np.arange(n3), np.arange(n3), indexing="ij")
    mat = np.sqrt(2.0 / n3) * np.cos(np.pi * j * (2 * k + 1) / (2 * n3))
    mat[0, :] = np.sqrt(1.0 / n3)
    return mat.astype(np.complex128)


def make_transform(kind: TransformKind | str, n3: int) -> TransformSpec:
    """Build one of the built-in transforms for tube length ``n3``."""
    if n3 < 1:
        raise DimensionMismatch(f"n3 must be >= 1, got {n3}")
    if isinstance(kind, str):
        kind = TransformKind(kind.lower())
    if kind is TransformKind.DFT:
        phi, ell = dft_matrix(n3), float(n3)
    elif kind is TransformKind.DCT:
        phi, ell = dct_matrix(n3), 1.0
    else:
        raise NotOrthogonalUpToScale("use make_custom_transform for custom matrices")
    _validate(phi, ell, ORTHO_TOL)
    return TransformSpec(phi, ell, kind)


def make_custom_transform(phi: np.ndarray) -> TransformSpec:
    """Wrap an arbitrary matrix, inferring the scale from diag(phi @ phi^H).

    The scale is the mean of the diagonal; any diagonal or off-diagonal
    deviation beyond ``1e-8 * ell`` rejects the matrix.
    """
    phi = np.asarray(phi, dtype=np.complex128)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise NotOrthogonalUpToScale("transform matrix must be square")
    gram = phi @ phi.conj().T
    ell = float(np.real(np.trace(gram)) / phi.shape[0])
    _validate(phi, ell, CUSTOM_ORTHO_TOL)
    return TransformSpec(phi, ell, TransformKind.CUSTOM)


def _check_n3(spec: TransformSpec, arr: np.ndarray) -> None:
    if arr.ndim != 3:
        raise DimensionMismatch(f"expected a 3-way array, got ndim={arr.ndim}")
    if arr.shape[2] != spec.n3:
        raise DimensionMismatch(
            f"third dimension {arr.shape[2]} does not match transform size {spec.n3}"
        )


def fwd_stack(spec: TransformSpec, a: np.ndarray) -> np.ndarray:
    """Apply the transform, returning frontal slices stacked as (n3, n1, n2)."""
    _check_n3(spec, a)
    return np.tensordot(spec.phi, a, axes=(1, 2))


def inv_stack(spec: TransformSpec, stack: np.ndarray, check_imag: bool = True) -> np.ndarray:
    """Invert a (n3, n1, n2) slice stack back to a real (n1, n2, n3) tensor."""
    if stack.ndim != 3 or stack.shape[0] != spec.n3:
        raise DimensionMismatch(
            f"slice stack must have leading dimension {spec.n3}, got {stack.shape}"
        )
    out = np.tensordot(spec.phi_inv, stack, axes=(1, 0))
    out = np.moveaxis(out, 0, 2)
    real = np.ascontiguousarray(out.real)
    if check_imag:
        residue = float(np.max(np.abs(out.imag))) if out.size else 0.0
        bound = IMAG_RESIDUE_TOL * (1.0 + float(np.linalg.norm(real)))
        if residue > bound:
            raise ImaginaryResidueTooLarge(
                f"imaginary residue {residue:.3e} exceeds {bound:.3e}"
            )
    return real


def forward(spec: TransformSpec, a: np.ndarray) -> SpectralTensor:
    """Transform-domain image of ``a``; every mode-3 tube is multiplied by phi."""
    a = np.asarray(a, dtype=np.float64)
    stack = fwd_stack(spec, a)
    return SpectralTensor(np.moveaxis(stack, 0, 2))


def inverse(spec: TransformSpec, abar: SpectralTensor | np.ndarray) -> np.ndarray:
    """Map transform-domain values back to the (real) spatial domain.

    Raises :class:`ImaginaryResidueTooLarge` when the data is not
    consistent with a real tensor.
    """
    data = abar.data if isinstance(abar, SpectralTensor) else np.asarray(abar)
    _check_n3(spec, data)
    return inv_stack(spec, np.moveaxis(data, 2, 0))
