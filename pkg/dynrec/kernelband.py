"""
Kernel functions, local-smoothing weights and plug-in bandwidth selection.

Time indices are 1-based here (``t`` in ``1..T``) to match the way a
horizon is usually described; every array returned is 0-based.
"""
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .exceptions import EmptyWindow, InvalidDims, UnsupportedKernel

logger = logging.getLogger(__name__)


class KernelKind(str, Enum):
    EPANECHNIKOV = 'epanechnikov'
    UNIFORM = 'uniform'
    TRIANGULAR = 'triangular'
    DEGENERATE = 'degenerate'


# (alpha(K), R(K)) = (int x^2 K, int K^2) over [-1, 1].
CLOSED_FORM_CONSTANTS = {
    KernelKind.EPANECHNIKOV: (1.0 / 5.0, 3.0 / 5.0),
    KernelKind.UNIFORM: (1.0 / 3.0, 1.0 / 2.0),
    KernelKind.TRIANGULAR: (1.0 / 6.0, 2.0 / 3.0),
}


@dataclass(frozen=True)
class KernelSpec:
    """A symmetric density on [-1, 1], or the degenerate point mass at 0."""

    kind: KernelKind = KernelKind.EPANECHNIKOV

    @classmethod
    def from_name(cls, name: str) -> 'KernelSpec':
        try:
            return cls(KernelKind(name.strip().lower()))
        except ValueError as exc:
            choices = ', '.join(k.value for k in KernelKind)
            raise UnsupportedKernel(f"unknown kernel '{name}' (expected one of {choices})") from exc

    @property
    def is_degenerate(self) -> bool:
        return self.kind is KernelKind.DEGENERATE

    def __call__(self, x) -> np.ndarray:
        """Evaluate K on the open support |x| < 1."""
        x = np.asarray(x, dtype=np.float64)
        inside = np.abs(x) < 1.0
        if self.kind is KernelKind.EPANECHNIKOV:
            values = 0.75 * (1.0 - x ** 2)
        elif self.kind is KernelKind.UNIFORM:
            values = np.full_like(x, 0.5)
        elif self.kind is KernelKind.TRIANGULAR:
            values = 1.0 - np.abs(x)
        else:
            return np.where(x == 0.0, 1.0, 0.0)
        return np.where(inside, values, 0.0)

    @property
    def alpha_k(self) -> float:
        return kernel_constants(self)[0]

    @property
    def r_k(self) -> float:
        return kernel_constants(self)[1]


def kernel_constants(k: KernelSpec) -> Tuple[float, float]:
    """Closed-form ``(alpha(K), R(K))``."""
    if k.is_degenerate:
        raise UnsupportedKernel("the degenerate kernel has no moment constants")
    return CLOSED_FORM_CONSTANTS[k.kind]


def kernel_constants_by_quadrature(k: KernelSpec) -> Tuple[float, float, float]:
    """``(int K, alpha(K), R(K))`` by adaptive quadrature on [-1, 1]."""
    if k.is_degenerate:
        raise UnsupportedKernel("the degenerate kernel has no moment constants")

    def density(x):
        return float(k(x))

    opts = dict(points=[0.0], epsabs=1e-13, epsrel=1e-13, limit=200)
    mass, _ = integrate.quad(density, -1.0, 1.0, **opts)
    alpha, _ = integrate.quad(lambda x: x * x * density(x), -1.0, 1.0, **opts)
    r_k, _ = integrate.quad(lambda x: density(x) ** 2, -1.0, 1.0, **opts)
    return mass, alpha, r_k


def half_window(T: int, h: float) -> int:
    """Effective half-window ceil(T*h); 0 for the degenerate bandwidth."""
    return int(math.ceil(T * h)) if h > 0 else 0


def weights(t: int, T: int, h: float, k: KernelSpec) -> np.ndarray:
    """Normalised kernel weights omega_h(j - t) for j = 1..T.

    Weights are renormalised over the truncated window at the edges.
    """
    if T < 1 or not 1 <= t <= T:
        raise InvalidDims(f"time index t={t} outside 1..{T}")
    if h < 0:
        raise InvalidDims(f"bandwidth must be nonnegative, got {h}")
    if k.is_degenerate or h == 0:
        point = np.zeros(T)
        point[t - 1] = 1.0
        return point
    offsets = np.arange(1, T + 1, dtype=np.float64) - t
    raw = k(offsets / (T * h))
    total = raw.sum()
    if total <= 0:
        raise EmptyWindow(f"all kernel weights vanish at t={t} (T={T}, h={h})")
    return raw / total


def smooth_sequence(mats: Sequence[np.ndarray], t: int, h: float, k: KernelSpec) -> np.ndarray:
    """Kernel average sum_j omega_h(j - t) mats[j] of a length-T sequence."""
    w = weights(t, len(mats), h, k)
    support = np.flatnonzero(w)
    return sum(w[j] * mats[j] for j in support)


@dataclass(frozen=True)
class PanelSummary:
    """Per-time response statistics used by the plug-in bandwidth."""

    response_means: np.ndarray
    top_decile_mean: float

    @property
    def plug_in_scale(self) -> float:
        """Estimate of C_M v sigma_xi: mean of the top 10% largest responses."""
        return self.top_decile_mean

    @property
    def plug_in_d2(self) -> float:
        """Sum of absolute successive differences of per-time response means."""
        return float(np.sum(np.abs(np.diff(self.response_means))))


def summarize_responses(responses: Sequence[np.ndarray]) -> PanelSummary:
    nonempty = [np.asarray(y, dtype=np.float64) for y in responses if len(y)]
    if not nonempty:
        raise InvalidDims("cannot summarise a panel without responses")
    means = np.array([float(np.mean(y)) for y in nonempty])
    pooled = np.sort(np.concatenate(nonempty))[::-1]
    top = pooled[: max(1, int(math.ceil(0.1 * pooled.size)))]
    return PanelSummary(response_means=means, top_decile_mean=float(np.mean(top)))


def summarize_panel(panel) -> PanelSummary:
    return summarize_responses([batch.y for batch in panel.batches])


@dataclass(frozen=True)
class BandwidthPlan:
    """Inputs of the plug-in rule; ``h`` is filled in once resolved.

    ``plug_in_scale`` / ``plug_in_d2`` left as None are taken from the
    panel summary.
    """

    h: Optional[float] = None
    c_h: float = 1.0
    plug_in_scale: Optional[float] = None
    plug_in_d2: Optional[float] = None
    rank_guess: int = 1

    def __post_init__(self):
        if self.h is not None and self.h < 0:
            raise InvalidDims(f"bandwidth must be nonnegative, got {self.h}")
        if self.rank_guess < 1:
            raise InvalidDims("rank_guess must be a positive integer")

    def with_summary(self, summary: PanelSummary) -> 'BandwidthPlan':
        return replace(
            self,
            plug_in_scale=self.plug_in_scale if self.plug_in_scale is not None else summary.plug_in_scale,
            plug_in_d2=self.plug_in_d2 if self.plug_in_d2 is not None else summary.plug_in_d2,
        )


def theory_bandwidth_constant(k: KernelSpec, d2: float, c1: float = 1.0) -> float:
    """C_h = [(2 + 2*sqrt(2)) C1 / (alpha(K) D2)]^(2/5)."""
    if d2 <= 0:
        raise InvalidDims(f"D2 plug-in must be positive, got {d2}")
    alpha_k, _ = kernel_constants(k)
    return ((2.0 + 2.0 * math.sqrt(2.0)) * c1 / (alpha_k * d2)) ** 0.4


def _check_dims(dims: Tuple[int, int], n: int, T: int) -> Tuple[int, int]:
    m1, m2 = dims
    if min(m1, m2, n, T) <= 0:
        raise InvalidDims(f"dims={dims}, n={n}, T={T} must all be positive")
    return m1, m2


def unclamped_bandwidth(
    dims: Tuple[int, int],
    n: int,
    T: int,
    plan: BandwidthPlan,
    *,
    design_kind: str = 'completion',
    sigma_x: float = 1.0,
) -> float:
    """The closed-form bandwidth before clamping to [1/T, 1].

    Completion: c_h * (scale^2 r (m1 v m2) log(m1+m2) / (nT))^(1/5).
    Sensing:    c_h * (eta^2 r log(m1+m2) / ((m1 ^ m2) nT))^(1/5), eta = scale / sigma_x.
    """
    m1, m2 = _check_dims(dims, n, T)
    scale = plan.plug_in_scale
    if scale is None or scale <= 0:
        raise InvalidDims(f"plug-in scale must be positive, got {scale}")
    log_term = math.log(m1 + m2)
    if design_kind == 'sensing':
        eta = scale / sigma_x
        base = eta ** 2 * plan.rank_guess * log_term / (min(m1, m2) * n * T)
    else:
        base = scale ** 2 * plan.rank_guess * max(m1, m2) * log_term / (n * T)
    return plan.c_h * base ** 0.2


def smoothing_condition(dims: Tuple[int, int], n: int, T: int, mu: float, scale: float, rank: int) -> float:
    """n mu^2 m1 m2 / (T^4 scale^2 r log(m1+m2)); smoothing pays off while this is below 1."""
    m1, m2 = _check_dims(dims, n, T)
    return n * mu ** 2 * m1 * m2 / (T ** 4 * scale ** 2 * rank * math.log(m1 + m2))


def plug_in_bandwidth(
    summary: PanelSummary,
    dims: Tuple[int, int],
    n: int,
    T: int,
    plan: BandwidthPlan,
    *,
    design_kind: str = 'completion',
    sigma_x: float = 1.0,
) -> float:
    """Plug-in bandwidth, clamped to [1/T, 1]; 0 when smoothing cannot help."""
    m1, m2 = _check_dims(dims, n, T)
    plan = plan.with_summary(summary)
    mu = sigma_x ** 2 if design_kind == 'sensing' else 1.0 / (m1 * m2)
    if T == 1 or smoothing_condition(dims, n, T, mu, plan.plug_in_scale, plan.rank_guess) >= 1.0:
        logger.info("Smoothing condition fails for n=%d, T=%d; using degenerate bandwidth", n, T)
        return 0.0
    raw = unclamped_bandwidth(dims, n, T, plan, design_kind=design_kind, sigma_x=sigma_x)
    h = min(max(raw, 1.0 / T), 1.0)
    if h != raw:
        logger.warning("Plug-in bandwidth %.4g clamped to %.4g", raw, h)
    return h
