import math

import numpy as np
import pytest

from tscaled.errors import (
    DimensionMismatch,
    EmptySpectrum,
    NoConvergence,
    RankDeficientFactor,
    ZeroReference,
)
from tscaled.metrics import (
    FactorPair,
    align,
    dist,
    incoherence,
    relative_error,
    singular_extremes,
)
from tscaled.synth import gen_ground_truth
from tscaled.talg import (
    MultiRank,
    conj_transpose,
    identity_tensor,
    norm,
    t_inverse,
    t_product,
)
from tscaled.transform import fwd_stack, inv_stack, make_transform


def perturbed_pair(gt, scale, seed):
    rng = np.random.default_rng(seed)
    return FactorPair(
        gt.lstar + scale * rng.standard_normal(gt.lstar.shape),
        gt.rstar + scale * rng.standard_normal(gt.rstar.shape),
    )


class TestSingularExtremes:
    def test_identity(self, spec4):
        g = identity_tensor(3, spec4)
        mr = MultiRank.from_ranks([3] * 4)
        assert singular_extremes(g, mr, spec4) == pytest.approx((1.0, 1.0, 1.0))

    def test_linearly_spaced(self, kind):
        spec = make_transform(kind, 5)
        r = 4
        ghat = np.zeros((5, r, r), dtype=complex)
        ghat[:, np.arange(r), np.arange(r)] = np.linspace(1.0, 0.1, r)
        g = inv_stack(spec, ghat)
        smax, smin, kappa = singular_extremes(g, MultiRank.from_ranks([r] * 5), spec)
        assert kappa == pytest.approx(10.0, abs=1e-9)

    def test_single_slice(self):
        spec = make_transform("dct", 1)
        g = np.zeros((2, 2, 1))
        ghat = fwd_stack(spec, g)
        ghat[0] = np.diag([3.0, 2.0])
        g = inv_stack(spec, ghat)
        assert singular_extremes(g, MultiRank.from_ranks([2]), spec) == pytest.approx(
            (3.0, 2.0, 1.5)
        )

    def test_empty_spectrum(self, spec4):
        g = np.zeros((2, 2, 4))
        with pytest.raises(EmptySpectrum):
            singular_extremes(g, MultiRank.from_ranks([0] * 4), spec4)


class TestIncoherence:
    def test_consistent_with_row_norm_identity(self, kind):
        # max_i ||U^H * e_i||_F equals the largest horizontal-slice norm.
        spec = make_transform(kind, 4)
        gt = gen_ground_truth(10, 9, 4, 3, 5.0, spec, seed=5)
        n1 = gt.ustar.shape[0]
        worst = 0.0
        for i in range(n1):
            e_hat = np.zeros((4, n1, 1), dtype=complex)
            e_hat[:, i, 0] = 1.0
            e_i = inv_stack(spec, e_hat)
            prod = t_product(conj_transpose(gt.ustar, spec), e_i, spec)
            worst = max(worst, float(np.linalg.norm(prod)))
        assert worst == pytest.approx(norm(gt.ustar, "two_inf"), rel=1e-9)

    def test_equality_attained_at_returned_mu(self, kind):
        spec = make_transform(kind, 4)
        gt = gen_ground_truth(12, 10, 4, 3, 2.0, spec, seed=6)
        mu = incoherence(gt)
        n1, n2, n3, ell = gt.ustar.shape[0], gt.vstar.shape[0], 4, spec.ell
        bound_u = math.sqrt(mu * gt.mrank.s_r / (n1 * n3 * ell))
        bound_v = math.sqrt(mu * gt.mrank.s_r / (n2 * n3 * ell))
        u_norm = norm(gt.ustar, "two_inf")
        v_norm = norm(gt.vstar, "two_inf")
        assert u_norm <= bound_u * (1 + 1e-12)
        assert v_norm <= bound_v * (1 + 1e-12)
        assert max(u_norm / bound_u, v_norm / bound_v) == pytest.approx(1.0)

    def test_spiky_factor_dominates(self):
        # A factor with one dominant row pushes mu toward n1*n3*ell/s_r times
        # that row's energy.
        spec = make_transform("dct", 2)
        n1, r = 8, 2
        uhat = np.zeros((2, n1, r), dtype=complex)
        uhat[:, 0, 0] = 1.0
        uhat[:, 1, 1] = 1.0
        u = inv_stack(spec, uhat)
        gt = gen_ground_truth(n1, n1, 2, r, 1.0, spec, seed=0)
        spiky = type(gt)(
            lstar=gt.lstar, rstar=gt.rstar, gstar=gt.gstar,
            ustar=u, vstar=gt.vstar, mrank=gt.mrank, spec=spec,
        )
        mu = incoherence(spiky)
        row_mass = norm(u, "two_inf") ** 2
        assert mu == pytest.approx(n1 * 2 * spec.ell * row_mass / gt.mrank.s_r)


class TestAlign:
    def test_ground_truth_pair(self, kind):
        spec = make_transform(kind, 3)
        gt = gen_ground_truth(8, 7, 3, 2, 5.0, spec, seed=7)
        res = align(gt.factor_pair(), gt)
        assert res.dist <= 1e-10
        assert np.abs(res.q - identity_tensor(2, spec)).max() <= 1e-6

    def test_gauge_symmetry_gives_zero(self, kind, rng):
        spec = make_transform(kind, 3)
        gt = gen_ground_truth(8, 7, 3, 2, 5.0, spec, seed=8)
        c = 0.3 * rng.standard_normal((2, 2, 3)) + identity_tensor(2, spec)
        c_invh = conj_transpose(t_inverse(c, spec), spec)
        pair = FactorPair(
            t_product(gt.lstar, c, spec), t_product(gt.rstar, c_invh, spec)
        )
        res = align(pair, gt)
        assert res.dist <= 1e-8
        # Q recovers the inverse gauge.
        assert np.abs(res.q - t_inverse(c, spec)).max() <= 1e-5

    def test_sign_flip_gives_zero(self, kind):
        spec = make_transform(kind, 3)
        gt = gen_ground_truth(6, 6, 3, 2, 2.0, spec, seed=9)
        assert dist(FactorPair(-gt.lstar, -gt.rstar), gt) <= 1e-10

    def test_matches_direct_minimization_oracle(self, kind):
        # Independent check: minimize the alignment objective over the real
        # entries of Q with a generic optimizer.
        from scipy.optimize import minimize

        spec = make_transform(kind, 2)
        gt = gen_ground_truth(6, 5, 2, 2, 3.0, spec, seed=10)
        pair = perturbed_pair(gt, 0.02, seed=11)
        res = align(pair, gt)

        groot_hat = np.sqrt(fwd_stack(spec, gt.gstar))
        lhat, rhat = fwd_stack(spec, pair.left), fwd_stack(spec, pair.right)
        lshat, rshat = fwd_stack(spec, gt.lstar), fwd_stack(spec, gt.rstar)

        def objective(x):
            q = x.reshape(2, 2, 2)
            qhat = fwd_stack(spec, q)
            total = 0.0
            for k in range(2):
                qk = qhat[k]
                pk = np.linalg.inv(qk).conj().T
                total += np.linalg.norm((lhat[k] @ qk - lshat[k]) @ groot_hat[k]) ** 2
                total += np.linalg.norm((rhat[k] @ pk - rshat[k]) @ groot_hat[k]) ** 2
            return total / spec.ell

        best = math.inf
        for start_seed in range(4):
            x0 = identity_tensor(2, spec).ravel()
            if start_seed:
                x0 = x0 + 0.05 * np.random.default_rng(start_seed).standard_normal(x0.shape)
            out = minimize(objective, x0, method="Nelder-Mead",
                           options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
            best = min(best, out.fun)
        assert res.dist == pytest.approx(math.sqrt(best), abs=1e-6)

    def test_stationarity_criterion_tensor_form(self, kind):
        spec = make_transform(kind, 3)
        gt = gen_ground_truth(9, 8, 3, 2, 4.0, spec, seed=12)
        pair = perturbed_pair(gt, 0.03, seed=13)
        res = align(pair, gt)
        smax, _, _ = singular_extremes(gt.gstar, gt.mrank, spec)
        q = res.q
        q_invh = conj_transpose(t_inverse(q, spec), spec)
        lq = t_product(pair.left, q, spec)
        rq = t_product(pair.right, q_invh, spec)
        lhs = t_product(
            conj_transpose(lq, spec), t_product(lq - gt.lstar, gt.gstar, spec), spec
        )
        rhs = t_product(
            gt.gstar,
            t_product(conj_transpose(rq - gt.rstar, spec), rq, spec),
            spec,
        )
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * smax**2

    def test_gauge_invariance_of_dist(self, kind, rng):
        spec = make_transform(kind, 3)
        gt = gen_ground_truth(8, 7, 3, 2, 5.0, spec, seed=14)
        pair = perturbed_pair(gt, 0.02, seed=15)
        d0 = dist(pair, gt)
        c = 0.2 * rng.standard_normal((2, 2, 3)) + identity_tensor(2, spec)
        c_invh = conj_transpose(t_inverse(c, spec), spec)
        moved = FactorPair(
            t_product(pair.left, c, spec), t_product(pair.right, c_invh, spec)
        )
        assert dist(moved, gt) == pytest.approx(d0, rel=1e-8, abs=1e-12)

    def test_rank_deficient_rejected(self, spec4):
        gt = gen_ground_truth(6, 6, 4, 2, 2.0, spec4, seed=16)
        bad = FactorPair(np.zeros_like(gt.lstar), gt.rstar)
        with pytest.raises(RankDeficientFactor):
            align(bad, gt)

    def test_far_pair_reports_no_convergence_with_result(self, spec4, rng):
        gt = gen_ground_truth(6, 6, 4, 2, 2.0, spec4, seed=17)
        far = FactorPair(
            5.0 * rng.standard_normal(gt.lstar.shape),
            5.0 * rng.standard_normal(gt.rstar.shape),
        )
        try:
            align(far, gt)
        except NoConvergence as exc:
            assert exc.result is not None
            assert exc.result.dist > 0


class TestDistBound:
    def test_reconstruction_gap_bound(self, kind):
        spec = make_transform(kind, 4)
        gt = gen_ground_truth(10, 9, 4, 3, 8.0, spec, seed=18)
        xs = gt.xstar()
        c = math.sqrt(math.sqrt(2.0) + 1.0)
        for seed in range(8):
            pair = perturbed_pair(gt, 0.03, seed=100 + seed)
            gap = np.linalg.norm(pair.compose(spec) - xs)
            assert dist(pair, gt) <= c * gap * (1 + 1e-9)


class TestRelativeError:
    def test_exact(self, rng):
        x = rng.standard_normal((3, 3, 2))
        assert relative_error(x, x) == 0.0

    def test_zero_estimate(self, rng):
        x = rng.standard_normal((3, 3, 2))
        assert relative_error(np.zeros_like(x), x) == pytest.approx(1.0)

    def test_scaled(self, rng):
        x = rng.standard_normal((3, 3, 2))
        assert relative_error(1.1 * x, x) == pytest.approx(0.1, abs=1e-12)

    def test_zero_reference(self):
        with pytest.raises(ZeroReference):
            relative_error(np.ones((2, 2, 2)), np.zeros((2, 2, 2)))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            relative_error(np.ones((2, 2, 2)), np.ones((2, 2, 3)))
