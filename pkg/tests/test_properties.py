"""Property-based invariants on randomly drawn tensors."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tscaled.metrics import FactorPair
from tscaled.solvers import ObservationSet, project_observed, scaled_projection, soft_threshold
from tscaled.talg import conj_transpose, norm, t_product
from tscaled.transform import forward, inverse, make_transform

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)


def tensor3(n1, n2, n3):
    return arrays(np.float64, (n1, n2, n3), elements=finite)


dims = st.integers(min_value=1, max_value=4)
kinds = st.sampled_from(["dft", "dct"])


@settings(max_examples=60, deadline=None)
@given(kinds, dims, dims, dims, st.data())
def test_round_trip(kind, n1, n2, n3, data):
    a = data.draw(tensor3(n1, n2, n3))
    spec = make_transform(kind, n3)
    back = inverse(spec, forward(spec, a))
    assert np.linalg.norm(back - a) <= 1e-12 * (1 + np.linalg.norm(a))


@settings(max_examples=60, deadline=None)
@given(kinds, dims, dims, dims, st.data())
def test_norm_preserved_up_to_scale(kind, n1, n2, n3, data):
    a = data.draw(tensor3(n1, n2, n3))
    spec = make_transform(kind, n3)
    abar = forward(spec, a).data
    assert abs(np.linalg.norm(a) - np.linalg.norm(abar) / np.sqrt(spec.ell)) <= 1e-10 * (
        1 + np.linalg.norm(a)
    )


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0, max_value=10), st.data())
def test_soft_threshold_shrinks_and_zeroes(zeta, data):
    m = data.draw(tensor3(3, 3, 2))
    out = soft_threshold(m, zeta)
    assert np.all(np.abs(out) <= np.maximum(np.abs(m) - zeta, 0) + 1e-12)
    assert np.all((np.abs(m) <= zeta) <= (out == 0))
    assert np.all(np.sign(out) * np.sign(m) >= 0)


@settings(max_examples=40, deadline=None)
@given(dims, dims, dims, st.data())
def test_projection_idempotent(n1, n2, n3, data):
    x = data.draw(tensor3(n1, n2, n3))
    mask = data.draw(arrays(np.bool_, (n1, n2, n3)))
    obs = ObservationSet(mask, 0.5)
    once = project_observed(x, obs)
    assert np.array_equal(project_observed(once, obs), once)


@settings(max_examples=30, deadline=None)
@given(kinds, st.integers(min_value=2, max_value=4), st.floats(min_value=1e-2, max_value=10.0), st.data())
def test_scaled_projection_bound_holds(kind, n3, varsigma, data):
    spec = make_transform(kind, n3)
    left = data.draw(tensor3(5, 2, n3))
    right = data.draw(tensor3(4, 2, n3))
    # Degenerate all-zero factors are excluded: the pair is the zero tensor.
    if np.linalg.norm(left) < 1e-9 or np.linalg.norm(right) < 1e-9:
        return
    pair = FactorPair(left, right)
    out = scaled_projection(pair, varsigma, spec)
    x = out.compose(spec)
    reach = max(
        np.sqrt(5) * norm(x, "two_inf"),
        np.sqrt(4) * float(np.sqrt((x**2).sum(axis=(0, 2))).max()),
    )
    assert reach <= varsigma * (1 + 1e-9)


@settings(max_examples=30, deadline=None)
@given(kinds, st.integers(min_value=1, max_value=3), st.data())
def test_t_product_bilinear(kind, n3, data):
    spec = make_transform(kind, n3)
    a = data.draw(tensor3(3, 2, n3))
    b = data.draw(tensor3(2, 4, n3))
    c = data.draw(tensor3(2, 4, n3))
    lin = t_product(a, 1.5 * b - 2.0 * c, spec)
    ref = 1.5 * t_product(a, b, spec) - 2.0 * t_product(a, c, spec)
    scale = 1 + np.linalg.norm(a) * (np.linalg.norm(b) + np.linalg.norm(c))
    assert np.linalg.norm(lin - ref) <= 1e-10 * scale


@settings(max_examples=30, deadline=None)
@given(kinds, st.integers(min_value=1, max_value=3), st.data())
def test_conj_transpose_involution(kind, n3, data):
    spec = make_transform(kind, n3)
    a = data.draw(tensor3(3, 4, n3))
    assert np.allclose(
        conj_transpose(conj_transpose(a, spec), spec), a, atol=1e-10 * (1 + np.abs(a).max())
    )
