"""Experiment orchestration: synthesize, solve, trace to CSV, plot.

Every (method, kappa, seed, eta) cell runs independently; methods within a
(kappa, seed) pair share the synthetic instance and the spectral
initialization so convergence curves are directly comparable.  Traces are
written one CSV per cell plus a summary CSV; reruns with the same
configuration are byte-identical except for wall-clock columns (zeroed by
``no_timing`` for golden-file comparisons).
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .errors import EmptyTraceSet, NotOrthogonalUpToScale, TscaledError
from .metrics import FactorPair, GroundTruth, align, dist, incoherence, singular_extremes
from .solvers import (
    Method,
    RunHistory,
    RunStatus,
    SolverParams,
    ThresholdSchedule,
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
from .talg import norm, t_product, t_svd
from .transform import forward, inverse, make_custom_transform, make_transform

TRACE_COLUMNS = (
    "run_id",
    "method",
    "transform",
    "kappa",
    "eta",
    "seed",
    "iter",
    "rel_err",
    "dist",
    "wall_time_s",
)

SUMMARY_COLUMNS = (
    "run_id",
    "method",
    "transform",
    "kappa",
    "eta",
    "seed",
    "status",
    "final_rel_err",
    "iters_to_1e-10",
    "wall_time_s",
)

SUMMARY_THRESHOLD = 1e-10


@dataclass(frozen=True)
class TraceRow:
    run_id: str
    method: str
    transform: str
    kappa: float
    eta: float
    seed: int
    iteration: int
    rel_err: float
    dist: float | None
    wall_time_s: float


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def data_seeds(base_seed: int, kappa_index: int):
    """Deterministic seed block for one (seed, kappa) instance:
    (ground truth, corruption/mask, noise)."""
    root = base_seed * 10_000 + kappa_index * 10
    return root, root + 1, root + 2


def _history_rows(run_id, method, transform, kappa, eta, seed, history, no_timing):
    rows = []
    for rec in history.records:
        rows.append(
            TraceRow(
                run_id,
                method,
                transform,
                kappa,
                eta,
                seed,
                rec.iteration,
                rec.rel_err,
                rec.dist,
                0.0 if no_timing else rec.wall_time_s,
            )
        )
    return rows


def write_trace(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for r in rows:
            w.writerow(
                [
                    r.run_id,
                    r.method,
                    r.transform,
                    _fmt(r.kappa),
                    _fmt(r.eta),
                    r.seed,
                    r.iteration,
                    _fmt(r.rel_err),
                    "" if r.dist is None else _fmt(r.dist),
                    _fmt(r.wall_time_s),
                ]
            )


def read_trace(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != TRACE_COLUMNS:
            raise EmptyTraceSet(f"{path} is not a trace file")
        for rec in reader:
            rows.append(
                TraceRow(
                    rec["run_id"],
                    rec["method"],
                    rec["transform"],
                    float(rec["kappa"]),
                    float(rec["eta"]),
                    int(rec["seed"]),
                    int(rec["iter"]),
                    float(rec["rel_err"]),
                    float(rec["dist"]) if rec["dist"] else None,
                    float(rec["wall_time_s"]),
                )
            )
    return rows


def _basin_start(gt: GroundTruth, frac: float = 0.08) -> FactorPair:
    """Warm start near the ground truth for the factorization problem.

    The perturbation norm is chosen through the sufficient bound
    dist <= sqrt(2) * sigma_max**0.5 * ||delta||_F, which keeps the start
    inside the contraction basin without running the alignment solver.
    """
    smax, smin, _ = singular_extremes(gt.gstar, gt.mrank, gt.spec)
    target = frac * smin / math.sqrt(gt.spec.ell)
    rng = np.random.default_rng(deterministic_hash(gt.lstar))
    dl = rng.standard_normal(gt.lstar.shape)
    dr = rng.standard_normal(gt.rstar.shape)
    scale = target / (math.sqrt(2.0) * math.sqrt(smax) * max(np.linalg.norm(dl), np.linalg.norm(dr)))
    return FactorPair(gt.lstar + scale * dl, gt.rstar + scale * dr)


def deterministic_hash(arr: np.ndarray) -> int:
    return int(np.abs(arr * 1e6).sum()) % (2**32)


def run_experiment(cfg: ExperimentConfig):
    """Run every configured cell; returns (trace paths, summary path, statuses)."""
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    spec = make_transform(cfg.transform, cfg.n3)
    trace_paths = []
    summary = []
    statuses = []

    for seed in cfg.seeds:
        for k_idx, kappa in enumerate(cfg.kappas):
            gt_seed, obs_seed, noise_seed = data_seeds(seed, k_idx)
            gt = gen_ground_truth(cfg.n1, cfg.n2, cfg.n3, cfg.rank, kappa, spec, gt_seed)
            xstar = gt.xstar()
            smax, _, _ = singular_extremes(gt.gstar, gt.mrank, spec)
            signal = xstar if math.isinf(cfg.snr_db) else add_gaussian_noise(xstar, cfg.snr_db, noise_seed)

            if cfg.problem == "rpca":
                sched = ThresholdSchedule(cfg.zeta0, cfg.zeta1, cfg.rho)
                y = signal + gen_sparse_corruption(xstar, cfg.alpha, obs_seed)
                shared_init = spectral_init_rpca(y, cfg.rank, sched.zeta0, spec)
            elif cfg.problem == "completion":
                obs = gen_bernoulli_mask(cfg.n1, cfg.n2, cfg.n3, cfg.p, obs_seed)
                yobs = signal * obs.mask
                shared_init = spectral_init_completion(yobs, obs, cfg.rank, cfg.varsigma, spec)
            else:
                f0 = _basin_start(gt)

            for method_name in cfg.methods:
                method = Method(method_name)
                for eta in cfg.etas:
                    params = SolverParams(
                        eta=eta,
                        max_iters=cfg.max_iters,
                        rank=cfg.rank,
                        rel_tol=cfg.rel_tol,
                        method=method,
                        sigma1_hint=smax,
                        projection_radius=cfg.varsigma,
                    )
                    if cfg.problem == "rpca":
                        _, _, history = run_rpca(y, params, sched, spec, gt=gt, init=shared_init)
                    elif cfg.problem == "completion":
                        _, history = run_completion(yobs, obs, params, spec, gt=gt, init=shared_init)
                    else:
                        _, history = run_factorization(xstar, params, f0, spec, gt=gt)

                    run_id = (
                        f"{cfg.problem}_{method.value}_{cfg.transform}"
                        f"_k{kappa:g}_eta{eta:g}_s{seed}"
                    )
                    rows = _history_rows(
                        run_id, method.value, cfg.transform, kappa, eta, seed, history, cfg.no_timing
                    )
                    path = os.path.join(cfg.out_dir, f"{run_id}.csv")
                    write_trace(path, rows)
                    trace_paths.append(path)
                    statuses.append(history.status)
                    hit = history.iterations_to(SUMMARY_THRESHOLD)
                    summary.append(
                        [
                            run_id,
                            method.value,
                            cfg.transform,
                            _fmt(kappa),
                            _fmt(eta),
                            seed,
                            history.status.value,
                            _fmt(history.final_rel_err),
                            "" if hit is None else hit,
                            _fmt(0.0 if cfg.no_timing else history.records[-1].wall_time_s),
                        ]
                    )

    summary.sort(key=lambda row: row[0])
    summary_path = os.path.join(cfg.out_dir, "summary.csv")
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(summary)
    return trace_paths, summary_path, statuses


PLOT_KINDS = ("err_vs_iter", "err_vs_time", "err_vs_eta")


def emit_plot(trace_paths, kind: str, out_path) -> None:
    """Render traces to a self-contained vector-graphics (SVG) file.

    One curve per (method, kappa); log-scale error axis; deterministic
    output for identical inputs.
    """
    if kind not in PLOT_KINDS:
        raise EmptyTraceSet(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    rows = []
    for path in trace_paths:
        rows.extend(read_trace(path))
    if not rows:
        raise EmptyTraceSet("no trace rows to plot")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "tscaled"

    groups: dict[tuple, list[TraceRow]] = {}
    for r in rows:
        groups.setdefault((r.method, r.kappa), []).append(r)

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for (method, kappa) in sorted(groups):
        grp = groups[(method, kappa)]
        if kind == "err_vs_iter":
            grp.sort(key=lambda r: r.iteration)
            x = [r.iteration for r in grp]
            y = [max(r.rel_err, 1e-300) for r in grp]
            ax.set_xlabel("iteration")
        elif kind == "err_vs_time":
            grp.sort(key=lambda r: r.wall_time_s)
            x = [r.wall_time_s for r in grp]
            y = [max(r.rel_err, 1e-300) for r in grp]
            ax.set_xlabel("wall time (s)")
        else:
            final: dict[float, TraceRow] = {}
            for r in grp:
                cur = final.get(r.eta)
                if cur is None or r.iteration > cur.iteration:
                    final[r.eta] = r
            if len(final) < 2:
                raise EmptyTraceSet("err_vs_eta needs traces spanning several step sizes")
            pts = sorted(final.items())
            x = [eta for eta, _ in pts]
            y = [max(r.rel_err, 1e-300) for _, r in pts]
            ax.set_xlabel("step size")
        ax.semilogy(x, y, label=f"{method} k={kappa:g}")
    ax.set_ylabel("relative error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


@dataclass
class CheckResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"[{tag}] {self.name}: margin {self.margin:.3e}{extra}"


def validate_suite(seed: int = 0, trials: int = 20):
    """Cross-module invariant checks with measured margins.

    Returns a list of CheckResult; the CLI exits nonzero when any fails.
    Margins are 'distance from violation': nonnegative means the check holds.
    """
    rng = np.random.default_rng(seed)
    results = []

    def check(name, margin, detail=""):
        results.append(CheckResult(name, bool(margin >= 0), float(margin), detail))

    # Transform round trips and the norm/inner-product identities.
    worst_rt, worst_par = math.inf, math.inf
    for kind in ("dft", "dct"):
        for _ in range(trials):
            n1, n2, n3 = rng.integers(2, 8, size=3)
            spec = make_transform(kind, int(n3))
            a = rng.standard_normal((n1, n2, n3))
            b = rng.standard_normal((n1, n2, n3))
            back = inverse(spec, forward(spec, a))
            worst_rt = min(worst_rt, 1e-12 - np.linalg.norm(back - a) / np.linalg.norm(a))
            abar, bbar = forward(spec, a).data, forward(spec, b).data
            par = abs(np.linalg.norm(a) - np.linalg.norm(abar) / math.sqrt(spec.ell))
            inner = abs(np.vdot(a, b) - np.real(np.vdot(abar, bbar)) / spec.ell)
            scale = max(np.linalg.norm(a) * np.linalg.norm(b), 1.0)
            worst_par = min(worst_par, 1e-10 - max(par / np.linalg.norm(a), inner / scale))
    check("transform round trip (1e-12)", worst_rt)
    check("norm/inner-product identities (1e-10)", worst_par)

    # Custom transforms: orthogonal-up-to-scale accepted, generic rejected.
    ortho = np.linalg.qr(rng.standard_normal((5, 5)))[0] * 2.0
    try:
        spec_c = make_custom_transform(ortho)
        accept = 1.0 if abs(spec_c.ell - 4.0) < 1e-8 else -1.0
    except NotOrthogonalUpToScale:
        accept = -1.0
    check("custom transform accepts scaled orthogonal", accept)
    try:
        make_custom_transform(rng.standard_normal((4, 4)))
        reject = -1.0
    except NotOrthogonalUpToScale:
        reject = 1.0
    check("custom transform rejects generic matrix", reject)

    # t-SVD reconstruction and factor orthogonality.
    worst_recon, worst_orth = math.inf, math.inf
    from .talg import conj_transpose, identity_tensor

    for kind in ("dft", "dct"):
        for _ in range(trials):
            n1, n2, n3 = rng.integers(2, 8, size=3)
            spec = make_transform(kind, int(n3))
            a = rng.standard_normal((n1, n2, n3))
            f = t_svd(a, spec)
            worst_recon = min(
                worst_recon, 1e-9 - np.linalg.norm(f.compose() - a) / np.linalg.norm(a)
            )
            utu = t_product(conj_transpose(f.u, spec), f.u, spec)
            ident = identity_tensor(f.rank, spec)
            worst_orth = min(worst_orth, 1e-9 - float(np.abs(utu - ident).max()))
    check("t-SVD reconstruction (1e-9)", worst_recon)
    check("t-SVD factor orthogonality (1e-9)", worst_orth)

    # Product norm inequalities, generic and sparse instances.
    m_sparse, m_inf, m_fro, m_2inf = math.inf, math.inf, math.inf, math.inf
    for kind in ("dft", "dct"):
        for _ in range(trials):
            n1, n2, n3, n4 = rng.integers(2, 8, size=4)
            spec = make_transform(kind, int(n3))
            s = gen_sparse_corruption(rng.standard_normal((n1, n2, n3)), 0.2, int(rng.integers(1 << 31)))
            alpha_real = sparsity_fraction(s)
            if alpha_real > 0:
                lhs = norm(s, "spectral", spec)
                rhs = alpha_real * math.sqrt(spec.ell) / 2 * (n1 + n2 * n3) * norm(s, "inf")
                m_sparse = min(m_sparse, rhs - lhs)
                lhs2 = norm(s, "two_inf")
                rhs2 = math.sqrt(alpha_real * n2 * n3) * norm(s, "inf")
                m_sparse = min(m_sparse, rhs2 - lhs2)
            a = rng.standard_normal((n1, n2, n3))
            b = rng.standard_normal((n4, n2, n3))
            prod = t_product(a, conj_transpose(b, spec), spec)
            m_inf = min(
                m_inf,
                math.sqrt(spec.ell) * norm(a, "two_inf") * norm(b, "two_inf") - norm(prod, "inf"),
            )
            # The lower Frobenius bound needs full row rank of the second
            # factor's transformed slices, so draw wide-or-square slices.
            c = rng.standard_normal((n2, int(n2 + rng.integers(0, 3)), n3))
            ac = t_product(a, c, spec)
            m_fro = min(m_fro, np.linalg.norm(a) * norm(c, "spectral", spec) - np.linalg.norm(ac))
            sv = np.linalg.svd(
                np.transpose(forward(spec, c).data, (2, 0, 1)), compute_uv=False
            )
            m_fro = min(m_fro, np.linalg.norm(ac) - np.linalg.norm(a) * sv.min())
            m_2inf = min(
                m_2inf,
                math.sqrt(n2 * spec.ell) * norm(a, "two_inf") * norm(c, "two_inf")
                - norm(ac, "two_inf"),
            )
    check("sparse spectral/row-norm bounds", m_sparse)
    check("product entrywise bound", m_inf)
    check("product Frobenius bounds", m_fro)
    check("product row-norm bound", m_2inf)

    # Distance upper bound via the reconstruction gap.
    worst_gap = math.inf
    for kind in ("dft", "dct"):
        spec = make_transform(kind, 4)
        gt = gen_ground_truth(10, 9, 4, 2, 6.0, spec, int(rng.integers(1 << 31)))
        xs = gt.xstar()
        for _ in range(trials // 2):
            f = FactorPair(
                gt.lstar + 0.02 * rng.standard_normal(gt.lstar.shape),
                gt.rstar + 0.02 * rng.standard_normal(gt.rstar.shape),
            )
            bound = math.sqrt(math.sqrt(2.0) + 1.0) * np.linalg.norm(f.compose(spec) - xs)
            worst_gap = min(worst_gap, bound - dist(f, gt))
    check("distance-to-reconstruction bound", worst_gap)

    # Scaled projection: non-expansiveness plus the row-norm clause.
    worst_ne, worst_inc = math.inf, math.inf
    for kind in ("dft", "dct"):
        spec = make_transform(kind, 3)
        gt = gen_ground_truth(8, 8, 3, 2, 4.0, spec, int(rng.integers(1 << 31)))
        smax, smin, _ = singular_extremes(gt.gstar, gt.mrank, spec)
        mu = incoherence(gt)
        eps = 0.02
        varsigma = (1 + eps) * math.sqrt(mu * gt.mrank.s_r / (gt.spec.n3 * spec.ell)) * smax
        for _ in range(trials // 2):
            dl = rng.standard_normal(gt.lstar.shape)
            dr = rng.standard_normal(gt.rstar.shape)
            pre = eps * smin / (math.sqrt(2 * spec.ell * smax) * max(np.linalg.norm(dl), np.linalg.norm(dr)))
            f = FactorPair(gt.lstar + pre * dl, gt.rstar + pre * dr)
            d_before = dist(f, gt)
            if d_before > eps * smin / math.sqrt(spec.ell):
                continue
            proj = scaled_projection(f, varsigma, spec)
            worst_ne = min(worst_ne, d_before * (1 + 1e-8) - dist(proj, gt))
            x = proj.compose(spec)
            reach = max(
                math.sqrt(x.shape[0]) * norm(x, "two_inf"),
                math.sqrt(x.shape[1]) * float(np.sqrt((x**2).sum(axis=(0, 2))).max()),
            )
            worst_inc = min(worst_inc, varsigma * (1 + 1e-12) - reach)
    check("scaled projection non-expansive", worst_ne)
    check("scaled projection row-norm clause", worst_inc)

    # Threshold schedule keeps the sparse support contained.
    worst_supp = math.inf
    spec = make_transform("dft", 4)
    for _ in range(trials):
        gt = gen_ground_truth(12, 12, 4, 2, 3.0, spec, int(rng.integers(1 << 31)))
        xs = gt.xstar()
        ss = gen_sparse_corruption(xs, 0.08, int(rng.integers(1 << 31)))
        xt = xs + 0.05 * norm(xs, "inf") * rng.uniform(-1, 1, xs.shape)
        zeta = norm(xs - xt, "inf") * 1.05
        s_next = soft_threshold(xs + ss - xt, zeta)
        ok_supp = np.all((s_next != 0) <= (ss != 0))
        bound = 2 * zeta - norm(s_next - ss, "inf")
        worst_supp = min(worst_supp, bound if ok_supp else -1.0)
    check("threshold support containment", worst_supp)

    # Determinism of the generators.
    spec_d = make_transform("dct", 3)
    g1 = gen_ground_truth(6, 5, 3, 2, 2.0, spec_d, 123)
    g2 = gen_ground_truth(6, 5, 3, 2, 2.0, spec_d, 123)
    same = np.array_equal(g1.lstar, g2.lstar) and np.array_equal(g1.rstar, g2.rstar)
    same = same and np.array_equal(
        gen_sparse_corruption(g1.xstar(), 0.1, 9).ravel(),
        gen_sparse_corruption(g2.xstar(), 0.1, 9).ravel(),
    )
    check("generator determinism", 1.0 if same else -1.0)

    return results
