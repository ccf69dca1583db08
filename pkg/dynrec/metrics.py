"""
Error metrics and theory diagnostics for recovered paths.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .designs import DesignKind, ObservationBatch, Panel
from .exceptions import DegenerateFit, DimMismatch, EmptyTestBatch, InvalidDims, UnsupportedFamily
from .matcore import check_same_shape, frob_norm, spectral_norm

logger = logging.getLogger(__name__)


def mse_t(estimate: np.ndarray, truth: np.ndarray) -> float:
    """(m1 m2)^-1 ||estimate - truth||_F^2."""
    check_same_shape(estimate, truth)
    diff = estimate - truth
    return float(np.vdot(diff, diff)) / diff.size


def mse_path(estimates: Sequence[np.ndarray], truths: Sequence[np.ndarray]) -> List[float]:
    if len(estimates) != len(truths):
        raise DimMismatch(f"{len(estimates)} estimates for {len(truths)} truths")
    return [mse_t(e, m) for e, m in zip(estimates, truths)]


def batch_mse(estimate: np.ndarray, batch: ObservationBatch, t: int) -> float:
    """Mean squared prediction error of one held-out batch at 1-based time t."""
    if not len(batch):
        raise EmptyTestBatch(f"no held-out observations at t={t}")
    residual = batch.designs.predict(estimate) - batch.y
    return float(residual @ residual) / len(batch)


def test_mse(estimates: Sequence[np.ndarray], heldout: Panel) -> List[Optional[float]]:
    """Per-time mean squared prediction error on held-out observations.

    Times without held-out data are reported as None rather than zero.
    """
    if len(estimates) != heldout.T:
        raise DimMismatch(f"{len(estimates)} estimates for a panel of T={heldout.T}")
    out: List[Optional[float]] = []
    for t, (estimate, batch) in enumerate(zip(estimates, heldout.batches), start=1):
        try:
            out.append(batch_mse(estimate, batch, t))
        except EmptyTestBatch as exc:
            logger.warning("%s; reported as missing", exc)
            out.append(None)
    return out


def bias_diagnostic(truths: Sequence[np.ndarray], weights: np.ndarray, t: int) -> float:
    """||M_t - sum_j w_j M_j||_F, the smoothing bias at 1-based time t."""
    if len(weights) != len(truths):
        raise DimMismatch(f"{len(weights)} weights for {len(truths)} truths")
    smoothed = sum(float(w) * truths[j] for j, w in enumerate(weights) if w != 0)
    return frob_norm(truths[t - 1] - smoothed)


def expected_response_design(truth: np.ndarray, family) -> np.ndarray:
    """E[Y X] for a single observation of ``truth``."""
    if family.kind is DesignKind.CONVOLUTION:
        raise UnsupportedFamily("no closed-form E[YX] for convolution designs")
    return family.mu * truth


def noise_diagnostic(panel: Panel, truths: Sequence[np.ndarray], weights: np.ndarray) -> float:
    """||sum_j w_j Delta_j||_2 with Delta_j = (1/n_j) sum_i (y X - E[y X])."""
    if len(weights) != panel.T or len(truths) != panel.T:
        raise DimMismatch("weights, truths and panel must share T")
    total = np.zeros(panel.dims)
    for w, batch, truth in zip(weights, panel.batches, truths):
        if w == 0:
            continue
        if not len(batch):
            raise InvalidDims("noise diagnostic needs a nonempty batch inside the window")
        delta = batch.designs.adjoint(batch.y) / len(batch) - expected_response_design(truth, panel.family)
        total += float(w) * delta
    return spectral_norm(total)


def error_bound(delta_h: float, lam: float, nuclear_truth: float, mu: float, dims: Tuple[int, int]) -> float:
    """(delta + sqrt(delta^2 + 2 lam ||M_t||_* / mu))^2 / (m1 m2): the MSE bound shape
    that holds when lam dominates twice the noise diagnostic."""
    root = math.sqrt(delta_h ** 2 + 2.0 * lam * nuclear_truth / mu)
    return (delta_h + root) ** 2 / (dims[0] * dims[1])


def fit_log_slope(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float]:
    """Least-squares line through (log x, log y); returns (slope, intercept)."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise DegenerateFit("need at least two (x, y) pairs of equal length")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DegenerateFit("log-log fit needs positive values")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise DegenerateFit("all x values are equal")
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)
