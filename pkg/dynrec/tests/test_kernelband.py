"""
Tests for kernels, smoothing weights and the plug-in bandwidth.
"""
import math

import numpy as np
import pytest

from dynrec.conf import dynrec_setting
from dynrec.exceptions import InvalidDims, UnsupportedKernel
from dynrec.kernelband import (
    BandwidthPlan,
    KernelKind,
    KernelSpec,
    PanelSummary,
    half_window,
    kernel_constants,
    kernel_constants_by_quadrature,
    plug_in_bandwidth,
    smooth_sequence,
    smoothing_condition,
    summarize_responses,
    theory_bandwidth_constant,
    unclamped_bandwidth,
    weights,
)

EPANECHNIKOV = KernelSpec(KernelKind.EPANECHNIKOV)
UNIFORM = KernelSpec(KernelKind.UNIFORM)
DEGENERATE = KernelSpec(KernelKind.DEGENERATE)


def test_degenerate_weights_are_one_hot():
    """Test T=5, t=3 with the degenerate kernel gives (0,0,1,0,0)."""
    np.testing.assert_array_equal(weights(3, 5, 0.4, DEGENERATE), [0, 0, 1, 0, 0])
    np.testing.assert_array_equal(weights(3, 5, 0.0, EPANECHNIKOV), [0, 0, 1, 0, 0])


def test_uniform_full_window():
    """Test T=5, t=3, uniform kernel, h=1 gives equal weights."""
    np.testing.assert_allclose(weights(3, 5, 1.0, UNIFORM), [0.2] * 5, atol=1e-15)


def test_epanechnikov_against_direct_summation():
    """Test T=7, t=4, h=3/7 weights are K((j-4)/3) normalised."""
    raw = np.array([0.75 * (1 - ((j - 4) / 3) ** 2) if abs(j - 4) < 3 else 0.0 for j in range(1, 8)])
    np.testing.assert_allclose(weights(4, 7, 3 / 7, EPANECHNIKOV), raw / raw.sum(), atol=1e-12)


@pytest.mark.parametrize('kind', [KernelKind.EPANECHNIKOV, KernelKind.UNIFORM, KernelKind.TRIANGULAR])
def test_weights_sum_to_one_and_are_symmetric(kind):
    """Test normalisation everywhere and symmetry at interior times."""
    k = KernelSpec(kind)
    T, h = 40, 0.1
    window = half_window(T, h)
    for t in range(1, T + 1):
        w = weights(t, T, h, k)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(w >= 0)
        assert np.all(w[np.abs(np.arange(1, T + 1) - t) >= T * h] == 0)
        if t - window >= 1 and t + window <= T:
            for d in range(1, window + 1):
                assert w[t - 1 + d] == pytest.approx(w[t - 1 - d], abs=1e-15)


def test_weights_reject_bad_time():
    """Test t outside 1..T is refused."""
    with pytest.raises(InvalidDims):
        weights(0, 5, 0.2, EPANECHNIKOV)
    with pytest.raises(InvalidDims):
        weights(6, 5, 0.2, EPANECHNIKOV)


def test_closed_form_constants():
    """Test alpha(K) and R(K) for the three kernels."""
    assert kernel_constants(EPANECHNIKOV) == pytest.approx((1 / 5, 3 / 5))
    assert kernel_constants(UNIFORM) == pytest.approx((1 / 3, 1 / 2))
    assert kernel_constants(KernelSpec(KernelKind.TRIANGULAR)) == pytest.approx((1 / 6, 2 / 3))
    with pytest.raises(UnsupportedKernel):
        kernel_constants(DEGENERATE)


@pytest.mark.parametrize('kind', [KernelKind.EPANECHNIKOV, KernelKind.UNIFORM, KernelKind.TRIANGULAR])
def test_quadrature_matches_closed_form(kind):
    """Test quadrature gives unit mass and the closed-form constants to 1e-10."""
    k = KernelSpec(kind)
    mass, alpha, r_k = kernel_constants_by_quadrature(k)
    assert mass == pytest.approx(1.0, abs=1e-10)
    assert alpha == pytest.approx(k.alpha_k, abs=1e-10)
    assert r_k == pytest.approx(k.r_k, abs=1e-10)


def test_kernel_is_symmetric_and_compact():
    """Test K(x) = K(-x) and K vanishes outside (-1, 1)."""
    x = np.linspace(-1.5, 1.5, 61)
    for kind in (KernelKind.EPANECHNIKOV, KernelKind.UNIFORM, KernelKind.TRIANGULAR):
        k = KernelSpec(kind)
        np.testing.assert_allclose(k(x), k(-x))
        assert np.all(k(x[np.abs(x) >= 1]) == 0)


def test_from_name():
    """Test kernel names parse case-insensitively and unknown names fail."""
    assert KernelSpec.from_name(' Uniform ') == UNIFORM
    with pytest.raises(UnsupportedKernel):
        KernelSpec.from_name('gaussian')


def test_smooth_sequence_of_constant_is_constant():
    """Test smoothing a constant sequence returns the constant."""
    mats = [np.full((2, 2), 3.0)] * 9
    np.testing.assert_allclose(smooth_sequence(mats, 1, 0.3, EPANECHNIKOV), mats[0])
    np.testing.assert_allclose(smooth_sequence(mats, 5, 0.3, EPANECHNIKOV), mats[0])


def test_summary_plug_ins():
    """Test the top-decile mean and absolute-difference D2 plug-ins."""
    responses = [np.array([9.0] * 5 + [1.0] * 5), np.full(10, 2.0), np.full(10, 4.0)]
    summary = summarize_responses(responses)
    np.testing.assert_allclose(summary.response_means, [5.0, 2.0, 4.0])
    assert summary.plug_in_d2 == pytest.approx(3.0 + 2.0)
    assert summary.plug_in_scale == pytest.approx(9.0)


def test_unclamped_bandwidth_closed_form():
    """Test the completion formula at m1=500, m2=300, r=10, n=30000, T=100."""
    plan = BandwidthPlan(c_h=1.0, plug_in_scale=40.0, rank_guess=10)
    h = unclamped_bandwidth((500, 300), 30000, 100, plan)
    expected = (40.0 ** 2 * 10 * 500 * math.log(800) / (30000 * 100)) ** 0.2
    assert h == pytest.approx(expected)


def test_bandwidth_is_linear_in_ch():
    """Test doubling c_h doubles the unclamped bandwidth."""
    base = BandwidthPlan(c_h=1.0, plug_in_scale=2.0, rank_guess=3)
    doubled = BandwidthPlan(c_h=2.0, plug_in_scale=2.0, rank_guess=3)
    assert unclamped_bandwidth((50, 40), 200, 30, doubled) == pytest.approx(
        2.0 * unclamped_bandwidth((50, 40), 200, 30, base))


def test_bandwidth_fifth_root_scaling():
    """Test doubling n*T multiplies the unclamped bandwidth by 2^(-1/5)."""
    plan = BandwidthPlan(plug_in_scale=2.0, rank_guess=3)
    h1 = unclamped_bandwidth((50, 40), 200, 30, plan)
    h2 = unclamped_bandwidth((50, 40), 400, 30, plan)
    assert h2 / h1 == pytest.approx(2 ** -0.2)


def test_bandwidth_monotonicity():
    """Test h grows with rank_guess and plug-in scale."""
    def h(scale, rank):
        return unclamped_bandwidth((50, 40), 200, 30, BandwidthPlan(plug_in_scale=scale, rank_guess=rank))

    assert h(2.0, 1) < h(2.0, 2) < h(2.0, 4)
    assert h(1.0, 2) < h(2.0, 2) < h(4.0, 2)


def test_sensing_form_uses_eta():
    """Test the sensing bandwidth uses (scale / sigma_x)^2 and min(m1, m2)."""
    plan = BandwidthPlan(plug_in_scale=3.0, rank_guess=2)
    h = unclamped_bandwidth((50, 40), 200, 30, plan, design_kind='sensing', sigma_x=1.5)
    expected = ((3.0 / 1.5) ** 2 * 2 * math.log(90) / (40 * 200 * 30)) ** 0.2
    assert h == pytest.approx(expected)


def test_plug_in_bandwidth_clamps_to_horizon():
    """Test a large closed-form value is clamped to 1 and a tiny one to 1/T."""
    summary = PanelSummary(response_means=np.array([1.0, 2.0]), top_decile_mean=50.0)
    assert plug_in_bandwidth(summary, (100, 80), 20, 40, BandwidthPlan()) == 1.0
    tiny = BandwidthPlan(c_h=1e-6)
    assert plug_in_bandwidth(summary, (100, 80), 20, 40, tiny) == pytest.approx(1 / 40)


def test_project_ch_keeps_desk_bandwidth_inside_horizon():
    """Test the configured C_H leaves the 120x80, rank 5, T = 50 plug-in h unclamped where C_h = 1 clamps it."""
    summary = PanelSummary(response_means=np.linspace(0.0, 1.0, 50), top_decile_mean=7.0)
    desk = ((120, 80), 1920, 50)
    assert plug_in_bandwidth(summary, *desk, BandwidthPlan(c_h=1.0, rank_guess=5)) == 1.0
    h = plug_in_bandwidth(summary, *desk, BandwidthPlan(c_h=dynrec_setting('C_H'), rank_guess=5))
    assert 1 / 50 < h < 1.0


def test_plug_in_bandwidth_degenerate_when_smoothing_cannot_help():
    """Test h = 0 when the smoothing condition fails or T = 1."""
    summary = PanelSummary(response_means=np.array([1.0]), top_decile_mean=1.0)
    # n mu^2 m1 m2 / (T^4 ...) with mu = 1/(m1 m2) and a huge n
    assert smoothing_condition((2, 2), 10 ** 9, 2, 0.25, 1.0, 1) >= 1.0
    assert plug_in_bandwidth(summary, (2, 2), 10 ** 9, 2, BandwidthPlan()) == 0.0
    assert plug_in_bandwidth(summary, (20, 20), 100, 1, BandwidthPlan()) == 0.0


def test_plug_in_bandwidth_rejects_bad_dims():
    """Test nonpositive sizes raise InvalidDims."""
    summary = PanelSummary(response_means=np.array([1.0]), top_decile_mean=1.0)
    with pytest.raises(InvalidDims):
        plug_in_bandwidth(summary, (0, 5), 10, 5, BandwidthPlan())
    with pytest.raises(InvalidDims):
        plug_in_bandwidth(summary, (5, 5), 0, 5, BandwidthPlan())


def test_theory_bandwidth_constant():
    """Test C_h = [(2 + 2 sqrt 2) C1 / (alpha D2)]^(2/5)."""
    expected = ((2 + 2 * math.sqrt(2)) * 1.5 / (0.2 * 3.0)) ** 0.4
    assert theory_bandwidth_constant(EPANECHNIKOV, 3.0, 1.5) == pytest.approx(expected)
    with pytest.raises(InvalidDims):
        theory_bandwidth_constant(EPANECHNIKOV, 0.0)
