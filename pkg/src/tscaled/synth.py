"""Synthetic problem instances: planted low-rank tensors with a chosen
condition number, sparse corruptions, Bernoulli masks and SNR-calibrated
Gaussian noise.  All generators are deterministic functions of their seed.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import RankOutOfRange, ZeroSignal
from .metrics import GroundTruth
from .talg import MultiRank, t_product, t_svd, truncate
from .transform import TransformSpec, fwd_stack, inv_stack


def gen_ground_truth(
    n1: int,
    n2: int,
    n3: int,
    r: int,
    kappa: float,
    spec: TransformSpec,
    seed: int,
) -> GroundTruth:
    """Planted tensor with transformed singular values linearly spaced from
    1 down to 1/kappa in every slice.

    The orthogonal factors are the top-r left singular tensors of i.i.d.
    random-sign tensors, one draw for each side.
    """
    if not (1 <= r <= min(n1, n2)):
        raise RankOutOfRange(f"rank {r} not in [1, {min(n1, n2)}]")
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    rng = np.random.default_rng(seed)
    sign_u = rng.integers(0, 2, size=(n1, r, n3)) * 2.0 - 1.0
    sign_v = rng.integers(0, 2, size=(n2, r, n3)) * 2.0 - 1.0
    ustar = truncate(t_svd(sign_u, spec), r).u
    vstar = truncate(t_svd(sign_v, spec), r).u

    sg = np.linspace(1.0, 1.0 / kappa, r)
    ghat = np.zeros((n3, r, r), dtype=np.complex128)
    ghat[:, np.arange(r), np.arange(r)] = sg
    gstar = inv_stack(spec, ghat)
    groot = inv_stack(spec, np.sqrt(ghat))

    mrank = MultiRank.from_ranks(np.full(n3, r))
    return GroundTruth(
        lstar=t_product(ustar, groot, spec),
        rstar=t_product(vstar, groot, spec),
        gstar=gstar,
        ustar=ustar,
        vstar=vstar,
        mrank=mrank,
        spec=spec,
    )


def gen_sparse_corruption(xstar: np.ndarray, alpha: float, seed: int) -> np.ndarray:
    """Uniformly sampled sparse corruption covering floor(alpha * N) entries.

    Magnitudes are i.i.d. uniform on [-m, m] with m the mean absolute entry
    of ``xstar``.  Per-tube sparsity caps are not enforced; use
    :func:`sparsity_fraction` to measure the realized fraction.
    """
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    xstar = np.asarray(xstar, dtype=np.float64)
    total = xstar.size
    count = int(math.floor(alpha * total))
    out = np.zeros(total)
    if count:
        rng = np.random.default_rng(seed)
        idx = rng.choice(total, size=count, replace=False)
        m = float(np.abs(xstar).mean())
        out[idx] = rng.uniform(-m, m, size=count)
    return out.reshape(xstar.shape)


def gen_bernoulli_mask(n1: int, n2: int, n3: int, p: float, seed: int):
    """i.i.d. Bernoulli(p) observation mask; records the nominal p."""
    from .solvers import ObservationSet

    if not 0 < p <= 1:
        raise ValueError(f"p must be in (0, 1], got {p}")
    rng = np.random.default_rng(seed)
    mask = rng.random(size=(n1, n2, n3)) < p
    return ObservationSet(mask=mask, p=p)


def add_gaussian_noise(x: np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    """Add white Gaussian noise at the requested SNR in dB.

    ``snr_db = inf`` is the noiseless sentinel and returns ``x`` unchanged.
    The variance solves SNR = 10 log10(||x||_F^2 / (N sigma^2)).
    """
    x = np.asarray(x, dtype=np.float64)
    if math.isinf(snr_db) and snr_db > 0:
        return x
    energy = float(np.linalg.norm(x)) ** 2
    if energy == 0.0:
        raise ZeroSignal("cannot calibrate noise against a zero tensor")
    sigma = math.sqrt(energy / (x.size * 10.0 ** (snr_db / 10.0)))
    rng = np.random.default_rng(seed)
    return x + sigma * rng.standard_normal(x.shape)


def sparsity_fraction(s: np.ndarray) -> float:
    """Realized per-tube sparsity: the largest fraction of nonzeros along any
    mode-1, mode-2 or mode-3 tube."""
    s = np.asarray(s)
    nz = s != 0
    n1, n2, n3 = s.shape
    f1 = nz.sum(axis=0).max(initial=0) / n1
    f2 = nz.sum(axis=1).max(initial=0) / n2
    f3 = nz.sum(axis=2).max(initial=0) / n3
    return float(max(f1, f2, f3))
