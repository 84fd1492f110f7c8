import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lagrangian_bottleneck.advection import FlowMap, advect
from lagrangian_bottleneck.fields import FlowField, FlowSequence, ScalarField
from lagrangian_bottleneck.ftle import (
    EIGEN_FLOOR,
    BufferNotReady,
    FtleField,
    FtleRingBuffer,
    ftle_from_map,
    lower_median,
    max_eigenvalue_sym2,
    median_filter,
)


def ftle_oracle(grad, tau):
    """Direct symmetric eigen solve of G^T G for a single 2x2 gradient."""
    lam = np.linalg.eigvalsh(grad.T @ grad).max()
    return math.log(math.sqrt(max(lam, EIGEN_FLOOR))) / tau


def test_identity_map_gives_zero():
    fmap = FlowMap.from_function(lambda x, y: (x, y), 8, 6, tau=7)
    assert np.all(ftle_from_map(fmap).values == 0.0)


def test_uniform_translation_gives_zero_interior():
    seq = FlowSequence([FlowField.uniform(30, 20, 1.0, 0.5)] * 6, "forward")
    values = ftle_from_map(advect(seq, 0, 6)).values
    assert np.abs(values[:10, :20]).max() <= 1e-12


def test_saddle_ftle_is_log_growth_rate():
    w, h, a, tau = 161, 121, 0.1, 10
    ys, xs = np.mgrid[0:h, 0:w].astype(float)
    vec = np.stack([a * (xs - 80), -a * (ys - 60)], -1)
    fld = ftle_from_map(advect(FlowSequence([FlowField(vec)] * tau, "forward"), 0, tau))
    np.testing.assert_allclose(fld.values[40:81, 65:96], math.log(1.1), atol=1e-6)
    assert math.log(1.1) == pytest.approx(0.095310, abs=1e-6)


@pytest.mark.parametrize("tau", [1, 4, 15])
def test_pure_shear(tau):
    fmap = FlowMap.from_function(lambda x, y: (x + y, y), 9, 9, tau=tau)
    values = ftle_from_map(fmap).values
    oracle = ftle_oracle(np.array([[1.0, 1.0], [0.0, 1.0]]), tau)
    np.testing.assert_allclose(values[1:-1, 1:-1], oracle, rtol=1e-12)
    assert oracle == pytest.approx(math.log(math.sqrt((3 + math.sqrt(5)) / 2)) / tau, rel=1e-12)


@given(arrays(np.float64, (2, 2), elements=st.floats(-5, 5)))
def test_closed_form_eigenvalue_matches_eigvalsh(g):
    c = g.T @ g
    lam = max_eigenvalue_sym2(c[0, 0], c[0, 1], c[1, 1])
    assert lam == pytest.approx(np.linalg.eigvalsh(c).max(), rel=1e-9, abs=1e-9)


def test_degenerate_gradient_floored():
    fmap = FlowMap.from_function(lambda x, y: (0 * x + 2.0, 0 * y + 3.0), 5, 5, tau=5)
    values = ftle_from_map(fmap).values
    np.testing.assert_allclose(values, math.log(math.sqrt(1e-12)) / 5)


def test_rotation_invariance(rng):
    n = 24
    ys, xs = np.mgrid[0:n, 0:n].astype(float)
    px = xs + 1.5 * np.sin(ys / 3) + 0.2 * rng.normal(size=xs.shape)
    py = ys + 0.8 * np.cos(xs / 4) + 0.2 * rng.normal(size=xs.shape)
    fmap = FlowMap(np.stack([px, py], -1), 0, 5, "forward")
    # rotate the seed grid by 90 degrees: new (x, y) = (n-1-y, x), end points likewise
    rx = (n - 1) - py
    ry = px
    rot = np.stack([np.rot90(rx, -1), np.rot90(ry, -1)], -1)
    rotated = FlowMap(rot, 0, 5, "forward")
    np.testing.assert_allclose(
        ftle_from_map(rotated).values, np.rot90(ftle_from_map(fmap).values, -1), atol=1e-9
    )


def _field(values, frame=0, direction="forward", tau=15):
    return FtleField(ScalarField(np.asarray(values, float)), direction, frame, tau)


def _filled(stack, delta_t=4):
    buf = FtleRingBuffer(len(stack), delta_t)
    for k, values in enumerate(stack):
        buf.push(_field(values, frame=k * delta_t))
    return buf


def test_median_of_identical_fields(rng):
    values = rng.normal(size=(5, 6))
    out = median_filter(_filled([values] * 5))
    np.testing.assert_array_equal(out.values, values)
    assert out.filtered and out.reference_frame == 16


def test_median_rejects_outlier():
    out = median_filter(_filled([[[0.0]], [[0.0]], [[5.0]]]))
    assert out.values[0, 0] == 0.0


def test_even_buffer_takes_lower_middle():
    out = median_filter(_filled([[[1.0]], [[10.0]], [[3.0]], [[2.0]]]))
    assert out.values[0, 0] == 2.0


def test_underfilled_buffer_not_ready():
    buf = FtleRingBuffer(3)
    buf.push(_field([[1.0]]))
    with pytest.raises(BufferNotReady):
        median_filter(buf)


def test_buffer_evicts_oldest():
    buf = FtleRingBuffer(2, delta_t=1)
    for k in range(4):
        buf.push(_field([[float(k)]], frame=k))
    assert [e.reference_frame for e in buf.entries] == [2, 3]
    assert median_filter(buf).values[0, 0] == 2.0


def test_buffer_rejects_mismatches():
    buf = FtleRingBuffer(3, delta_t=4)
    buf.push(_field([[1.0]], frame=0))
    with pytest.raises(ValueError):
        buf.push(_field([[1.0]], frame=8))
    with pytest.raises(ValueError):
        buf.push(_field([[1.0]], frame=4, direction="backward"))
    with pytest.raises(ValueError):
        buf.push(_field([[1.0]], frame=4, tau=3))
    with pytest.raises(ValueError):
        buf.push(_field([[1.0, 2.0]], frame=4))


@given(
    arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 4)), elements=st.floats(-10, 10)),
    st.data(),
)
def test_median_monotone(stack, data):
    i = data.draw(st.integers(0, stack.shape[0] - 1))
    j = data.draw(st.integers(0, stack.shape[1] - 1))
    bump = data.draw(st.floats(0, 10))
    raised = stack.copy()
    raised[i, j] += bump
    assert np.all(lower_median(raised) >= lower_median(stack))


@given(arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 4)), elements=st.floats(-10, 10)))
def test_lower_median_is_an_input_value(stack):
    med = lower_median(stack)
    for j in range(stack.shape[1]):
        col = np.sort(stack[:, j])
        assert med[j] == col[(len(col) - 1) // 2]
