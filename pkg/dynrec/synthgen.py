"""
Synthetic ground truth, noise processes and dependent design sequences.

The ground truth is ``M(t) = U(t) D(t) V(t)^T`` on t in [0, 1] with

    U(t) = cos(t pi / 2) U0 + sin(t pi / 2) U1
    V(t) = cos(t pi / 2) V0 + sin(t pi / 2) V1
    D(t) = 10 * diag(k^2 + t k), k = r, ..., 1

U0 and U1 are disjoint column blocks of one random orthonormal frame, so
U(t) keeps orthonormal columns for every t (likewise for V).
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .designs import DesignBatch, DesignFamily, DesignKind, ObservationBatch, Panel, sample_batch
from .exceptions import IndexOutOfRange, InvalidDims, UnsupportedFamily

logger = logging.getLogger(__name__)


def _orthonormal_frame(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    # Sign fix makes the frame a deterministic function of the draw.
    return q * np.sign(np.diag(r))


@dataclass(frozen=True)
class GroundTruthPath:
    dims: Tuple[int, int]
    rank: int
    seed: int = 0

    def __post_init__(self):
        m1, m2 = self.dims
        if self.rank < 1 or 2 * self.rank > min(m1, m2):
            raise InvalidDims(f"rank {self.rank} needs 2*rank <= min(m1, m2) for dims {self.dims}")

    @cached_property
    def frames(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        rng = np.random.default_rng(self.seed)
        u = _orthonormal_frame(rng, self.dims[0], 2 * self.rank)
        v = _orthonormal_frame(rng, self.dims[1], 2 * self.rank)
        r = self.rank
        return u[:, :r], u[:, r:], v[:, :r], v[:, r:]

    def singular_values(self, t: float) -> np.ndarray:
        k = np.arange(self.rank, 0, -1, dtype=np.float64)
        return 10.0 * (k ** 2 + t * k)

    def factors(self, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        u0, u1, v0, v1 = self.frames
        c, s = math.cos(t * math.pi / 2), math.sin(t * math.pi / 2)
        return c * u0 + s * u1, self.singular_values(t), c * v0 + s * v1

    def at(self, t: float) -> np.ndarray:
        u, d, v = self.factors(t)
        return (u * d) @ v.T

    def lipschitz_bound(self) -> float:
        """Upper bound on ||M'(t)||_F over [0, 1]."""
        k = np.arange(self.rank, 0, -1, dtype=np.float64)
        d_max = float(np.linalg.norm(self.singular_values(1.0)))
        return math.pi * d_max + float(np.linalg.norm(10.0 * k))

    def grid(self, T: int) -> List[np.ndarray]:
        return [eval_truth(self, j, T) for j in range(1, T + 1)]


def eval_truth(path: GroundTruthPath, t_index: int, T: int) -> np.ndarray:
    """M_j = M(j / T) for j in 1..T."""
    if not 1 <= t_index <= T:
        raise IndexOutOfRange(f"time index {t_index} outside 1..{T}")
    return path.at(t_index / T)


class NoiseKind(str, Enum):
    IID = 'iid'
    PHI_MIXING_AR = 'ar'


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind = NoiseKind.IID
    sigma_xi: float = 1.0
    beta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_xi < 0:
            raise InvalidDims("sigma_xi must be nonnegative")
        if not 0.0 <= self.beta < 1.0:
            raise InvalidDims(f"beta must lie in [0, 1), got {self.beta}")


def ar_fields(spec: NoiseSpec, dims: Tuple[int, int], T: int, rng: np.random.Generator):
    """Yield the latent fields E_1..E_T one at a time.

    E_0 is white noise; E_t = beta E_{t-1} + sqrt(1 - beta^2) U_t keeps
    every entry at variance sigma_xi^2.
    """
    field = spec.sigma_xi * rng.standard_normal(dims)
    innovation_scale = math.sqrt(1.0 - spec.beta ** 2)
    for _ in range(T):
        field = spec.beta * field + innovation_scale * spec.sigma_xi * rng.standard_normal(dims)
        yield field


def gen_noise(spec: NoiseSpec, designs: Sequence[DesignBatch], dims: Tuple[int, int]) -> List[np.ndarray]:
    """Response noise per time point, deterministic given ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind is NoiseKind.IID:
        return [spec.sigma_xi * rng.standard_normal(len(batch)) for batch in designs]
    return [batch.predict(field) for batch, field in zip(designs, ar_fields(spec, dims, len(designs), rng))]


@dataclass(frozen=True)
class DependentDesignSpec:
    alpha: float
    family: DesignFamily
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise InvalidDims(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.family.kind is not DesignKind.COMPLETION:
            raise UnsupportedFamily("dependent designs are defined for completion only")


def gen_dependent_designs(spec: DependentDesignSpec, n: int, T: int) -> List[DesignBatch]:
    """Batch t carries floor(alpha n) designs of batch t-1 (listed first), the rest fresh."""
    if spec.family.kind is not DesignKind.COMPLETION:
        raise UnsupportedFamily("dependent designs are defined for completion only")
    rng = np.random.default_rng(spec.seed)
    carried = int(math.floor(spec.alpha * n))
    batches = [sample_batch(spec.family, n, rng)]
    for _ in range(1, T):
        previous = batches[-1]
        keep = previous.subset(np.sort(rng.choice(n, size=carried, replace=False)))
        fresh = sample_batch(spec.family, n - carried, rng) if n > carried else DesignBatch.empty(
            spec.family.kind, spec.family.dims)
        batches.append(keep.concat(fresh))
    return batches


def sample_size(family: DesignFamily, rho: Optional[float] = None, n: Optional[int] = None) -> int:
    """n directly, or rho * m1 * m2 rounded."""
    if n is None:
        if rho is None or rho <= 0:
            raise InvalidDims("either n or a positive rho is required")
        n = int(round(rho * family.dims[0] * family.dims[1]))
    if n < 1:
        raise InvalidDims(f"sample size must be positive, got {n}")
    return n


def build_panel(
    path: GroundTruthPath,
    family: DesignFamily,
    *,
    rho: Optional[float] = None,
    n: Optional[int] = None,
    noise: NoiseSpec = NoiseSpec(),
    dep: Optional[DependentDesignSpec] = None,
    T: int,
    seed: int = 0,
) -> Tuple[Panel, List[np.ndarray]]:
    """Sample designs, evaluate responses y = <X, M(j/T)> + xi; return panel and truths."""
    if tuple(path.dims) != tuple(family.dims):
        raise InvalidDims(f"path dims {path.dims} differ from family dims {family.dims}")
    if T < 1:
        raise InvalidDims(f"T must be positive, got {T}")
    n = sample_size(family, rho, n)
    if dep is not None:
        designs = gen_dependent_designs(dep, n, T)
    else:
        rng = np.random.default_rng(seed)
        designs = [sample_batch(family, n, rng) for _ in range(T)]
    truths = path.grid(T)
    noises = gen_noise(noise, designs, family.dims)
    batches = [
        ObservationBatch(batch, batch.predict(truth) + xi)
        for batch, truth, xi in zip(designs, truths, noises)
    ]
    logger.info("Built %s panel: dims=%s, n=%d, T=%d, noise=%s", family.kind.value, family.dims, n, T,
                noise.kind.value)
    return Panel(family, tuple(batches)), truths
