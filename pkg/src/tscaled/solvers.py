"""Scaled gradient descent for low-rank tensor recovery.

Three problems share one update core: plain factorization of a known
tensor, robust PCA with an iteration-decaying soft threshold, and
completion from Bernoulli observations with an optional row-rescaling
projection.  A vanilla gradient descent baseline (preconditioners replaced
by identity, step size eta / sigma_max) is provided for benchmarking.

Both new factors of every update are computed from the previous pair
(Jacobi-style simultaneous update).
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeThreshold,
    NoConvergence,
    PreconditionerSingular,
    TscaledError,
)
from .metrics import FactorPair, GroundTruth, align, relative_error
from .talg import t_product, t_sqrt, t_svd, truncate
from .transform import TransformSpec, fwd_stack, inv_stack

# Runs are terminated once the relative error exceeds this cap.
DIVERGENCE_CAP = 1e2
# Relative condition-number cap for the r x r preconditioner slices.
PRECOND_COND_CAP = 1e12
# Distance to the ground truth is recorded only for instances this small;
# it requires the iterative alignment solver at every iteration.
DIST_MAX_RANK = 6
DIST_MAX_DIM = 32


class Method(enum.Enum):
    SCALED_GD = "scaledgd"
    VANILLA_GD = "vanillagd"


class RunStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    DIVERGED = "diverged"
    FAILED = "failed"


@dataclass(frozen=True)
class ThresholdSchedule:
    """Geometric threshold decay: zeta0 at initialization, then
    zeta1 * rho**(t-1) at iteration t >= 1."""

    zeta0: float
    zeta1: float
    rho: float

    def __post_init__(self):
        if self.zeta0 < 0 or self.zeta1 < 0:
            raise NegativeThreshold("thresholds must be nonnegative")
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must be in (0, 1), got {self.rho}")

    def value(self, t: int) -> float:
        if t == 0:
            return self.zeta0
        return self.zeta1 * self.rho ** (t - 1)


@dataclass(frozen=True)
class SolverParams:
    eta: float
    max_iters: int
    rank: int
    rel_tol: float = 0.0
    method: Method = Method.SCALED_GD
    sigma1_hint: float | None = None
    projection_radius: float | None = None

    def __post_init__(self):
        # The theory wants eta in (0, 1); step-size sweeps go up to 1.2 and
        # eta = 0 is a useful no-op, so [0, 2) is accepted and guarded by
        # the divergence cap.
        if not 0 <= self.eta < 2:
            raise ValueError(f"eta must be in [0, 2), got {self.eta}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.sigma1_hint is not None and not self.sigma1_hint > 0:
            raise ValueError("sigma1_hint must be positive when given")
        if self.projection_radius is not None and not self.projection_radius > 0:
            raise ValueError("projection_radius must be positive when given")

    def step_size(self) -> float:
        """Effective step size: eta for ScaledGD, eta / sigma_max for GD."""
        if self.method is Method.SCALED_GD:
            return self.eta
        if self.sigma1_hint is None:
            raise ValueError("vanilla GD requires sigma1_hint")
        return self.eta / self.sigma1_hint


@dataclass(frozen=True)
class ObservationSet:
    mask: np.ndarray
    p: float

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        object.__setattr__(self, "mask", mask)
        if mask.ndim != 3:
            raise DimensionMismatch("observation mask must be a 3-way array")
        if not 0 < self.p <= 1:
            raise ValueError(f"p must be in (0, 1], got {self.p}")


@dataclass(frozen=True)
class IterRecord:
    iteration: int
    rel_err: float
    dist: float | None
    wall_time_s: float


@dataclass
class RunHistory:
    records: list[IterRecord] = field(default_factory=list)
    status: RunStatus = RunStatus.MAX_ITERS
    error: str | None = None

    def append(self, iteration, rel_err, dist_val, wall_time_s):
        self.records.append(IterRecord(iteration, float(rel_err), dist_val, wall_time_s))

    @property
    def final_rel_err(self) -> float:
        return self.records[-1].rel_err

    def iterations_to(self, threshold: float) -> int | None:
        """First recorded iteration with rel_err <= threshold, if any."""
        for rec in self.records:
            if rec.rel_err <= threshold:
                return rec.iteration
        return None


def soft_threshold(m: np.ndarray, zeta: float) -> np.ndarray:
    """Entrywise shrink-toward-zero: sgn(m) * max(0, |m| - zeta)."""
    if zeta < 0:
        raise NegativeThreshold(f"threshold must be >= 0, got {zeta}")
    m = np.asarray(m, dtype=np.float64)
    return np.sign(m) * np.maximum(0.0, np.abs(m) - zeta)


def project_observed(x: np.ndarray, obs: ObservationSet) -> np.ndarray:
    """Keep entries on the observation set, zero elsewhere (idempotent)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != obs.mask.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {obs.mask.shape} differ")
    return x * obs.mask


def _precondition(stack: np.ndarray, grad: np.ndarray, iteration=None) -> np.ndarray:
    """Solve (stack^H stack) against grad^H slice-wise: grad @ (stack^H stack)^-1."""
    gram = np.matmul(stack.conj().transpose(0, 2, 1), stack)
    sv = np.linalg.svd(gram, compute_uv=False)
    bad = np.flatnonzero(sv[:, -1] * PRECOND_COND_CAP <= sv[:, 0])
    if bad.size:
        raise PreconditionerSingular(int(bad[0]), iteration)
    sol = np.linalg.solve(gram, grad.conj().transpose(0, 2, 1))
    return sol.conj().transpose(0, 2, 1)


def _gradient_pair(pair: FactorPair, resid: np.ndarray, spec: TransformSpec):
    """Transform-domain factors and the two gradient halves for residual * R, residual^H * L."""
    lhat = fwd_stack(spec, pair.left)
    rhat = fwd_stack(spec, pair.right)
    reshat = fwd_stack(spec, resid)
    grad_l = np.matmul(reshat, rhat)
    grad_r = np.matmul(reshat.conj().transpose(0, 2, 1), lhat)
    return lhat, rhat, grad_l, grad_r


def _update_pair(
    pair: FactorPair,
    resid: np.ndarray,
    step: float,
    method: Method,
    spec: TransformSpec,
    iteration=None,
) -> FactorPair:
    lhat, rhat, grad_l, grad_r = _gradient_pair(pair, resid, spec)
    if method is Method.SCALED_GD:
        grad_l = _precondition(rhat, grad_l, iteration)
        grad_r = _precondition(lhat, grad_r, iteration)
    return FactorPair(
        inv_stack(spec, lhat - step * grad_l),
        inv_stack(spec, rhat - step * grad_r),
    )


def spectral_init_rpca(y: np.ndarray, r: int, zeta0: float, spec: TransformSpec):
    """Threshold the obvious outliers, then factor the top-r t-SVD of the rest."""
    s0 = soft_threshold(y, zeta0)
    f = truncate(t_svd(np.asarray(y, dtype=np.float64) - s0, spec), r)
    groot = t_sqrt(f.g, spec)
    pair = FactorPair(t_product(f.u, groot, spec), t_product(f.v, groot, spec))
    return pair, s0


def rpca_step(pair: FactorPair, y: np.ndarray, zeta_next: float, eta: float, spec: TransformSpec):
    """One scaled update of Algorithm-style robust PCA from the old pair."""
    x = pair.compose(spec)
    s_next = soft_threshold(y - x, zeta_next)
    resid = x + s_next - y
    return _update_pair(pair, resid, eta, Method.SCALED_GD, spec), s_next


def scaled_projection(pair: FactorPair, varsigma: float, spec: TransformSpec) -> FactorPair:
    """Row-rescaling projection bounding sqrt(n) * row norms of L * R^H by varsigma.

    Each horizontal slice of L is scaled by min(1, varsigma / (sqrt(n1) *
    ||L(i,:,:) * R^H||_F)) computed from the input pair, and symmetrically
    for R.  The output always satisfies the varsigma bound.
    """
    if not varsigma > 0:
        raise ValueError(f"varsigma must be positive, got {varsigma}")
    x = pair.compose(spec)
    n1, n2 = x.shape[0], x.shape[1]
    # ||L(i,:,:) * R^H||_F is the i-th horizontal slice norm of L * R^H and
    # ||R(j,:,:) * L^H||_F the j-th lateral slice norm, so one compose serves both.
    row_l = np.sqrt((x**2).sum(axis=(1, 2)))
    row_r = np.sqrt((x**2).sum(axis=(0, 2)))
    with np.errstate(divide="ignore"):
        scale_l = np.minimum(1.0, varsigma / np.where(row_l > 0, np.sqrt(n1) * row_l, np.inf))
        scale_r = np.minimum(1.0, varsigma / np.where(row_r > 0, np.sqrt(n2) * row_r, np.inf))
    return FactorPair(pair.left * scale_l[:, None, None], pair.right * scale_r[:, None, None])


def spectral_init_completion(
    yobs: np.ndarray,
    obs: ObservationSet,
    r: int,
    varsigma: float | None,
    spec: TransformSpec,
) -> FactorPair:
    """Factor the top-r t-SVD of the rescaled observations, then project."""
    f = truncate(t_svd(np.asarray(yobs, dtype=np.float64) / obs.p, spec), r)
    groot = t_sqrt(f.g, spec)
    pair = FactorPair(t_product(f.u, groot, spec), t_product(f.v, groot, spec))
    if varsigma is not None:
        pair = scaled_projection(pair, varsigma, spec)
    return pair


def completion_step(
    pair: FactorPair,
    xobs: np.ndarray,
    obs: ObservationSet,
    eta: float,
    varsigma: float | None,
    spec: TransformSpec,
) -> FactorPair:
    """One scaled projected update against the observed entries."""
    x = pair.compose(spec)
    resid = (project_observed(x, obs) - xobs) / obs.p
    new = _update_pair(pair, resid, eta, Method.SCALED_GD, spec)
    if varsigma is not None:
        new = scaled_projection(new, varsigma, spec)
    return new


def _maybe_dist(pair: FactorPair, gt: GroundTruth | None, shape) -> float | None:
    if gt is None:
        return None
    if pair.rank > DIST_MAX_RANK or max(shape) > DIST_MAX_DIM:
        return None
    try:
        return align(pair, gt).dist
    except NoConvergence as exc:
        return exc.result.dist if exc.result is not None else None
    except TscaledError:
        return None


class _Recorder:
    """Shared run bookkeeping: timing, history rows, stop conditions."""

    def __init__(self, params: SolverParams, gt: GroundTruth | None, shape):
        self.params = params
        self.gt = gt
        self.shape = shape
        self.history = RunHistory()
        self.t0 = time.perf_counter()

    def record(self, iteration: int, rel_err: float, pair: FactorPair) -> bool:
        """Append a row; returns True when the run should stop."""
        self.history.append(
            iteration,
            rel_err,
            _maybe_dist(pair, self.gt, self.shape),
            time.perf_counter() - self.t0,
        )
        if not np.isfinite(rel_err) or rel_err > DIVERGENCE_CAP:
            self.history.status = RunStatus.DIVERGED
            return True
        if self.params.rel_tol > 0 and rel_err <= self.params.rel_tol:
            self.history.status = RunStatus.CONVERGED
            return True
        return False

    def fail(self, exc: Exception):
        self.history.status = RunStatus.FAILED
        self.history.error = str(exc)


def run_rpca(
    y: np.ndarray,
    params: SolverParams,
    sched: ThresholdSchedule,
    spec: TransformSpec,
    gt: GroundTruth | None = None,
    init=None,
):
    """Robust PCA driver: spectral initialization plus scaled (or vanilla)
    gradient updates with the decaying threshold schedule.

    Returns (final pair, final sparse estimate, history).  The relative
    error tracks the ground truth when given, otherwise the fit residual
    ||X_t + S_t - Y||_F / ||Y||_F.
    """
    y = np.asarray(y, dtype=np.float64)
    step = params.step_size()
    pair, s = init if init is not None else spectral_init_rpca(y, params.rank, sched.zeta0, spec)
    xstar = gt.xstar() if gt is not None else None
    ynorm = float(np.linalg.norm(y))

    def err(x, s_cur):
        if xstar is not None:
            return relative_error(x, xstar)
        return float(np.linalg.norm(x + s_cur - y)) / max(ynorm, 1e-300)

    rec = _Recorder(params, gt, y.shape)
    x = pair.compose(spec)
    if rec.record(0, err(x, s), pair):
        return pair, s, rec.history
    for t in range(params.max_iters):
        zeta = sched.value(t + 1)
        try:
            s = soft_threshold(y - x, zeta)
            pair = _update_pair(pair, x + s - y, step, params.method, spec, iteration=t)
            x = pair.compose(spec)
        except (PreconditionerSingular, np.linalg.LinAlgError) as exc:
            rec.fail(exc)
            break
        if rec.record(t + 1, err(x, s), pair):
            break
    return pair, s, rec.history


def run_completion(
    xobs: np.ndarray,
    obs: ObservationSet,
    params: SolverParams,
    spec: TransformSpec,
    gt: GroundTruth | None = None,
    init: FactorPair | None = None,
):
    """Completion driver; observed entries only, rescaled by 1/p.

    Without ground truth the relative error is the observed-entry fit
    ||P(X_t) - X_obs||_F / ||X_obs||_F.
    """
    xobs = np.asarray(xobs, dtype=np.float64)
    step = params.step_size()
    pair = (
        init
        if init is not None
        else spectral_init_completion(xobs, obs, params.rank, params.projection_radius, spec)
    )
    xstar = gt.xstar() if gt is not None else None
    onorm = float(np.linalg.norm(xobs))

    def err(x):
        if xstar is not None:
            return relative_error(x, xstar)
        return float(np.linalg.norm(project_observed(x, obs) - xobs)) / max(onorm, 1e-300)

    rec = _Recorder(params, gt, xobs.shape)
    x = pair.compose(spec)
    if rec.record(0, err(x), pair):
        return pair, rec.history
    for t in range(params.max_iters):
        try:
            resid = (project_observed(x, obs) - xobs) / obs.p
            pair = _update_pair(pair, resid, step, params.method, spec, iteration=t)
            if params.projection_radius is not None:
                pair = scaled_projection(pair, params.projection_radius, spec)
            x = pair.compose(spec)
        except (PreconditionerSingular, np.linalg.LinAlgError) as exc:
            rec.fail(exc)
            break
        if rec.record(t + 1, err(x), pair):
            break
    return pair, rec.history


def run_factorization(
    xstar: np.ndarray,
    params: SolverParams,
    f0: FactorPair,
    spec: TransformSpec,
    gt: GroundTruth | None = None,
):
    """Factorization driver for a fully observed target, warm-started at f0."""
    xstar = np.asarray(xstar, dtype=np.float64)
    step = params.step_size()
    pair = f0
    rec = _Recorder(params, gt, xstar.shape)
    x = pair.compose(spec)
    if rec.record(0, relative_error(x, xstar), pair):
        return pair, rec.history
    for t in range(params.max_iters):
        try:
            pair = _update_pair(pair, x - xstar, step, params.method, spec, iteration=t)
            x = pair.compose(spec)
        except (PreconditionerSingular, np.linalg.LinAlgError) as exc:
            rec.fail(exc)
            break
        if rec.record(t + 1, relative_error(x, xstar), pair):
            break
    return pair, rec.history
