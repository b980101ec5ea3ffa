"""Core tensor algebra under a mode-3 transform.

All operations work on real (n1, n2, n3) arrays; computation happens on the
stack of transformed frontal slices, where the tensor-tensor product is a
batched matrix product.  The inverse transform re-checks that results are
consistent with real tensors.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NotPSDSlice,
    RankOutOfRange,
    SingularSlice,
    SvdFailure,
    UnknownKind,
)
from .transform import TransformSpec, fwd_stack, inv_stack

# Relative floor below which singular values count as zero.
SINGULAR_FLOOR = 1e-12

NORM_KINDS = (
    "fro",
    "spectral",
    "nuclear",
    "inf",
    "l1",
    "two_inf",
    "inf_two",
    "two_two_inf",
)


@dataclass(frozen=True)
class MultiRank:
    """Per-slice ranks of the transformed tensor plus their sum and max."""

    ranks: np.ndarray
    s_r: int
    tubal: int

    @classmethod
    def from_ranks(cls, ranks) -> "MultiRank":
        ranks = np.asarray(ranks, dtype=int)
        return cls(ranks=ranks, s_r=int(ranks.sum()), tubal=int(ranks.max(initial=0)))


@dataclass(frozen=True)
class TSVDFactors:
    """Orthogonal/f-diagonal factorization A = U * G * V^H under ``spec``."""

    u: np.ndarray
    g: np.ndarray
    v: np.ndarray
    spec: TransformSpec

    @property
    def rank(self) -> int:
        return self.u.shape[1]

    def compose(self) -> np.ndarray:
        return t_product(self.u, t_product(self.g, conj_transpose(self.v, self.spec), self.spec), self.spec)


def _as3d(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 3:
        raise DimensionMismatch(f"expected a 3-way array, got ndim={a.ndim}")
    return a


def t_product(a: np.ndarray, b: np.ndarray, spec: TransformSpec) -> np.ndarray:
    """Tensor-tensor product: slice-wise matrix product in the transform domain."""
    a, b = _as3d(a), _as3d(b)
    if a.shape[2] != b.shape[2] or a.shape[2] != spec.n3:
        raise DimensionMismatch(
            f"tube lengths {a.shape[2]}, {b.shape[2]} must both equal {spec.n3}"
        )
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"inner dimensions {a.shape[1]} and {b.shape[0]} differ")
    chat = np.matmul(fwd_stack(spec, a), fwd_stack(spec, b))
    return inv_stack(spec, chat)


def conj_transpose(a: np.ndarray, spec: TransformSpec) -> np.ndarray:
    """Tensor whose transformed slices are the conjugate transposes of a's."""
    a = _as3d(a)
    ahat = fwd_stack(spec, a)
    return inv_stack(spec, ahat.conj().transpose(0, 2, 1))


def identity_tensor(n: int, spec: TransformSpec) -> np.ndarray:
    """The multiplicative identity: every transformed slice is I_n."""
    if n < 1:
        raise DimensionMismatch(f"n must be >= 1, got {n}")
    stack = np.broadcast_to(np.eye(n, dtype=np.complex128), (spec.n3, n, n))
    return inv_stack(spec, np.ascontiguousarray(stack))


def _fix_svd_phases(u: np.ndarray, vh: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Deterministic convention: the largest-magnitude entry of each left
    # singular vector is made real-positive (per transformed slice).  The
    # pivot is the first entry within a relative window of the maximum so
    # that near-ties (e.g. sign-pattern inputs) resolve identically on a
    # slice and its conjugate mirror.
    n3, _, r = u.shape
    mag = np.abs(u)
    top_mag = mag.max(axis=1)
    pivot = np.argmax(mag >= (1.0 - 1e-9) * top_mag[:, None, :], axis=1)
    top = u[np.arange(n3)[:, None], pivot, np.arange(r)[None, :]]
    mag_top = np.abs(top)
    phase = np.where(mag_top > 0, top / np.where(mag_top > 0, mag_top, 1.0), 1.0)
    return u * phase.conj()[:, None, :], vh * phase[:, :, None]


def _gs_complete(basis: np.ndarray, count: int) -> np.ndarray:
    """Greedy Gram-Schmidt completion of an orthonormal column basis.

    Candidate vectors are the canonical coordinate vectors; at each step the
    one with the largest residual is appended.  All arithmetic is
    conjugation-invariant, so conjugate inputs yield conjugate completions.
    """
    m = basis.shape[0]
    cur = basis
    cols = []
    for _ in range(count):
        resid = np.eye(m, dtype=np.complex128) - cur @ cur.conj().T
        norms = np.linalg.norm(resid, axis=0)
        # First index within a relative window of the best residual: exact
        # ties (sign-pattern inputs) must resolve identically on conjugate
        # mirror slices.
        i = int(np.argmax(norms >= (1.0 - 1e-9) * norms.max()))
        v = resid[:, i] / norms[i]
        cur = np.concatenate([cur, v[:, None]], axis=1)
        cols.append(v)
    return np.stack(cols, axis=1)


# Relative window within which singular values count as a degenerate
# cluster whose subspace basis must be canonicalized.
_CLUSTER_TOL = 1e-10


def _canonical_subspace_basis(cols: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(cols).

    Built from the subspace projector (which is basis-independent) by
    greedily orthonormalizing its largest-residual canonical columns, so
    conjugate inputs produce conjugate outputs regardless of the arbitrary
    basis LAPACK returned.
    """
    proj = cols @ cols.conj().T
    take = cols.shape[1]
    out = np.zeros((cols.shape[0], take), dtype=np.complex128)
    have = 0
    while have < take:
        resid = proj - out[:, :have] @ (out[:, :have].conj().T @ proj)
        norms = np.linalg.norm(resid, axis=0)
        i = int(np.argmax(norms >= (1.0 - 1e-9) * norms.max()))
        out[:, have] = resid[:, i] / norms[i]
        have += 1
    return out


def _canonicalize_degenerate_columns(ahat, u, s, vh):
    # Singular vectors are only defined up to phase when singular values
    # are distinct; within (numerically) tied clusters the basis is an
    # arbitrary rotation and LAPACK's choice is not conjugate-consistent
    # across mirrored slices, which would make the spatial factors complex.
    # Rebuild every cluster (including the null space) deterministically.
    n3, _, r = u.shape
    for k in range(n3):
        smax = s[k, 0]
        floor = SINGULAR_FLOOR * smax
        rk = int((s[k] > floor).sum())
        if rk < r:
            u[k, :, rk:] = _gs_complete(u[k, :, :rk], r - rk)
            vh[k, rk:, :] = _gs_complete(vh[k, :rk, :].conj().T, r - rk).conj().T
        j = 0
        while j < rk:
            j2 = j + 1
            while j2 < rk and s[k, j2 - 1] - s[k, j2] <= _CLUSTER_TOL * smax:
                j2 += 1
            if j2 - j > 1:
                basis = _canonical_subspace_basis(u[k, :, j:j2])
                u[k, :, j:j2] = basis
                vh[k, j:j2, :] = (ahat[k].conj().T @ basis).conj().T / s[k, j:j2, None]
            j = j2
    return u, vh


def t_svd(a: np.ndarray, spec: TransformSpec) -> TSVDFactors:
    """Full t-SVD via per-slice SVD of the transformed tensor."""
    a = _as3d(a)
    ahat = fwd_stack(spec, a)
    try:
        u, s, vh = np.linalg.svd(ahat, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(str(exc)) from exc
    u, vh = _fix_svd_phases(u, vh)
    u, vh = _canonicalize_degenerate_columns(ahat, u, s, vh)
    r = s.shape[1]
    ghat = np.zeros((spec.n3, r, r), dtype=np.complex128)
    ghat[:, np.arange(r), np.arange(r)] = s
    return TSVDFactors(
        u=inv_stack(spec, u),
        g=inv_stack(spec, ghat),
        v=inv_stack(spec, vh.conj().transpose(0, 2, 1)),
        spec=spec,
    )


def truncate(f: TSVDFactors, r: int) -> TSVDFactors:
    """Keep the first r singular tubes (top-r t-SVD)."""
    full = f.rank
    if not 1 <= r <= full:
        raise RankOutOfRange(f"rank {r} not in [1, {full}]")
    # Mode-3 transforms do not mix rows/columns, so transform-domain column
    # truncation is plain spatial slicing.
    return TSVDFactors(
        u=np.ascontiguousarray(f.u[:, :r, :]),
        g=np.ascontiguousarray(f.g[:r, :r, :]),
        v=np.ascontiguousarray(f.v[:, :r, :]),
        spec=f.spec,
    )


def t_inverse(a: np.ndarray, spec: TransformSpec) -> np.ndarray:
    """Inverse tensor: per-slice matrix inverse in the transform domain."""
    a = _as3d(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"tensor must be square in its first two modes, got {a.shape}")
    ahat = fwd_stack(spec, a)
    sv = np.linalg.svd(ahat, compute_uv=False)
    bad = np.flatnonzero(sv[:, -1] <= SINGULAR_FLOOR * sv[:, 0])
    if bad.size:
        raise SingularSlice(int(bad[0]))
    return inv_stack(spec, np.linalg.inv(ahat))


def t_sqrt(a: np.ndarray, spec: TransformSpec) -> np.ndarray:
    """Principal square root of a tensor with Hermitian PSD transformed slices."""
    a = _as3d(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"tensor must be square in its first two modes, got {a.shape}")
    ahat = fwd_stack(spec, a)
    scale = np.abs(ahat).max(axis=(1, 2))
    herm_defect = np.abs(ahat - ahat.conj().transpose(0, 2, 1)).max(axis=(1, 2))
    bad = np.flatnonzero(herm_defect > 1e-8 * np.maximum(scale, 1e-300))
    if bad.size:
        raise NotPSDSlice(int(bad[0]))
    w, vec = np.linalg.eigh(ahat)
    neg = np.flatnonzero(w[:, 0] < -1e-8 * np.maximum(scale, 1e-300))
    if neg.size:
        raise NotPSDSlice(int(neg[0]))
    root = np.sqrt(np.maximum(w, 0.0))
    bhat = np.matmul(vec * root[:, None, :], vec.conj().transpose(0, 2, 1))
    return inv_stack(spec, bhat)


def norm(a: np.ndarray, kind: str, spec: TransformSpec | None = None) -> float:
    """Tensor norms; ``spec`` is required for the spectral and nuclear kinds."""
    a = _as3d(a)
    if kind == "fro":
        return float(np.linalg.norm(a))
    if kind == "inf":
        return float(np.abs(a).max(initial=0.0))
    if kind == "l1":
        return float(np.abs(a).sum())
    if kind == "two_inf":
        return float(np.sqrt((a**2).sum(axis=(1, 2))).max(initial=0.0))
    if kind == "inf_two":
        rows = np.sqrt((a**2).sum(axis=(1, 2))).max(initial=0.0)
        cols = np.sqrt((a**2).sum(axis=(0, 2))).max(initial=0.0)
        return float(max(rows, cols))
    if kind == "two_two_inf":
        return float(np.sqrt((a**2).sum(axis=1)).max(initial=0.0))
    if kind in ("spectral", "nuclear"):
        if spec is None:
            raise ValueError(f"norm kind {kind!r} requires a transform spec")
        sv = np.linalg.svd(fwd_stack(spec, a), compute_uv=False)
        if kind == "spectral":
            return float(sv.max(initial=0.0))
        return float(sv.sum() / spec.ell)
    raise UnknownKind(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")


def multi_rank(a: np.ndarray, spec: TransformSpec, tol: float = SINGULAR_FLOOR) -> MultiRank:
    """Per-slice ranks relative to the largest singular value over all slices."""
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    a = _as3d(a)
    sv = np.linalg.svd(fwd_stack(spec, a), compute_uv=False)
    top = sv.max(initial=0.0)
    return MultiRank.from_ranks((sv > tol * top).sum(axis=1))


# ---------------------------------------------------------------------------
# TSR3 file format: 4-byte magic, three u32 little-endian dims, then float64
# little-endian entries in frontal-slice-major order (k, then i, then j).

TSR3_MAGIC = b"TSR3"


def write_tsr3(path, a: np.ndarray) -> None:
    a = _as3d(a)
    n1, n2, n3 = a.shape
    payload = np.ascontiguousarray(np.moveaxis(a, 2, 0), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(TSR3_MAGIC)
        fh.write(struct.pack("<III", n1, n2, n3))
        fh.write(payload.tobytes())


def read_tsr3(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != TSR3_MAGIC:
            raise DimensionMismatch(f"bad TSR3 magic: {magic!r}")
        n1, n2, n3 = struct.unpack("<III", fh.read(12))
        raw = fh.read()
    expected = n1 * n2 * n3 * 8
    if len(raw) != expected:
        raise DimensionMismatch(f"TSR3 payload has {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f8").reshape(n3, n1, n2)
    return np.ascontiguousarray(np.moveaxis(data, 0, 2))
