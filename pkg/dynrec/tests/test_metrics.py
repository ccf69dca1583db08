"""
Tests for error metrics and theory diagnostics.
"""
import math

import numpy as np
import pytest

from dynrec import metrics
from dynrec.designs import DesignFamily, DesignKind, Panel
from dynrec.exceptions import DegenerateFit, DimMismatch, EmptyTestBatch, UnsupportedFamily
from dynrec.kernelband import KernelKind, KernelSpec, weights

from .conftest import full_coverage_batch


def test_mse_t():
    """Test the per-entry mean squared error."""
    assert metrics.mse_t(np.ones((2, 3)), np.zeros((2, 3))) == 1.0
    assert metrics.mse_t(np.array([[2.0, 0.0]]), np.zeros((1, 2))) == 2.0
    with pytest.raises(DimMismatch):
        metrics.mse_t(np.ones((2, 2)), np.ones((2, 3)))
    with pytest.raises(DimMismatch):
        metrics.mse_path([np.ones((2, 2))], [])


def test_heldout_mse_reports_missing_times_as_none():
    """Test held-out MSE per time with None where nothing was held out."""
    family = DesignFamily(DesignKind.COMPLETION, (2, 2))
    full = full_coverage_batch(np.eye(2))
    empty = full.subset(np.zeros(4, dtype=bool))
    heldout = Panel(family, (full, empty))
    scores = metrics.test_mse([np.zeros((2, 2)), np.zeros((2, 2))], heldout)
    assert scores == [0.5, None]
    with pytest.raises(DimMismatch):
        metrics.test_mse([np.zeros((2, 2))], heldout)


def test_batch_mse_raises_on_empty_batch():
    """Test an empty held-out batch raises EmptyTestBatch naming its time."""
    full = full_coverage_batch(np.eye(2))
    assert metrics.batch_mse(np.zeros((2, 2)), full, 1) == 0.5
    with pytest.raises(EmptyTestBatch, match='t=3'):
        metrics.batch_mse(np.zeros((2, 2)), full.subset(np.zeros(4, dtype=bool)), 3)


def test_bias_vanishes_for_linear_paths():
    """Test symmetric weights leave no bias on a linear path at interior times."""
    base = np.arange(6.0).reshape(2, 3)
    truths = [base + 0.1 * t for t in range(11)]
    w = weights(6, 11, 0.3, KernelSpec(KernelKind.EPANECHNIKOV))
    assert metrics.bias_diagnostic(truths, w, 6) == pytest.approx(0.0, abs=1e-12)
    edge = weights(1, 11, 0.3, KernelSpec(KernelKind.EPANECHNIKOV))
    assert metrics.bias_diagnostic(truths, edge, 1) > 0.0


def test_noise_diagnostic_is_zero_without_noise_or_sampling_error():
    """Test full noiseless coverage gives a zero noise term."""
    truth = np.array([[1.0, -2.0], [0.5, 3.0]])
    family = DesignFamily(DesignKind.COMPLETION, (2, 2))
    panel = Panel(family, (full_coverage_batch(truth), full_coverage_batch(truth)))
    assert metrics.noise_diagnostic(panel, [truth, truth], np.array([0.5, 0.5])) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(UnsupportedFamily):
        metrics.expected_response_design(truth, DesignFamily(DesignKind.CONVOLUTION, (2, 2)))


def test_error_bound():
    """Test the bound shape at a hand-computed point."""
    bound = metrics.error_bound(1.0, 0.5, 4.0, 0.25, (2, 4))
    assert bound == pytest.approx((1.0 + math.sqrt(1.0 + 16.0)) ** 2 / 8)


def test_fit_log_slope():
    """Test a power law is recovered exactly and degenerate inputs fail."""
    xs = [0.5, 1.0, 2.0, 4.0]
    ys = [3.0 * x ** -0.5 for x in xs]
    slope, intercept = metrics.fit_log_slope(xs, ys)
    assert slope == pytest.approx(-0.5)
    assert intercept == pytest.approx(math.log(3.0))
    with pytest.raises(DegenerateFit):
        metrics.fit_log_slope([1.0], [1.0])
    with pytest.raises(DegenerateFit):
        metrics.fit_log_slope([1.0, 1.0], [1.0, 2.0])
    with pytest.raises(DegenerateFit):
        metrics.fit_log_slope([1.0, 2.0], [0.0, 2.0])
