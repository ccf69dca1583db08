"""
Measurement operators of trace regression.

Three design families are supported:

* completion  - entry indicators ``e_row e_col^T``
* sensing     - dense Gaussian matrices with entry variance ``sigma_x^2``
* convolution - a 3x3 stencil (center 4, edge neighbours 2, corners 1)
  truncated at the matrix border

Single designs (:class:`EntryIndex`, :class:`DenseMat`,
:class:`ConvKernel`) are convenient for small inputs and tests. Solvers work
on :class:`DesignBatch`, the vectorised form of all designs observed at one
time point. All indices are 0-based.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import DimMismatch, InvalidDims, NonFiniteValues, UnsupportedFamily
from .matcore import as_mat

logger = logging.getLogger(__name__)

Dims = Tuple[int, int]


class DesignKind(str, Enum):
    COMPLETION = 'completion'
    SENSING = 'sensing'
    CONVOLUTION = 'convolution'


# (row offset, col offset, weight)
STENCIL = (
    (0, 0, 4.0),
    (-1, 0, 2.0), (1, 0, 2.0), (0, -1, 2.0), (0, 1, 2.0),
    (-1, -1, 1.0), (-1, 1, 1.0), (1, -1, 1.0), (1, 1, 1.0),
)


def _check_index(row: int, col: int, dims: Dims) -> None:
    if not (0 <= row < dims[0] and 0 <= col < dims[1]):
        raise DimMismatch(f"index ({row}, {col}) outside a {dims[0]}x{dims[1]} matrix")


@dataclass(frozen=True)
class EntryIndex:
    row: int
    col: int

    kind = DesignKind.COMPLETION

    def check(self, dims: Dims) -> None:
        _check_index(self.row, self.col, dims)

    def inner(self, m: np.ndarray) -> float:
        self.check(m.shape)
        return float(m[self.row, self.col])

    def accumulate_adjoint(self, acc: np.ndarray, scalar: float) -> None:
        self.check(acc.shape)
        acc[self.row, self.col] += scalar

    def dense(self, dims: Dims) -> np.ndarray:
        out = np.zeros(dims)
        self.accumulate_adjoint(out, 1.0)
        return out


@dataclass(frozen=True, eq=False)
class DenseMat:
    x: np.ndarray

    kind = DesignKind.SENSING

    def check(self, dims: Dims) -> None:
        if self.x.shape != tuple(dims):
            raise DimMismatch(f"design shape {self.x.shape} does not match {dims}")

    def inner(self, m: np.ndarray) -> float:
        self.check(m.shape)
        return float(np.vdot(self.x, m))

    def accumulate_adjoint(self, acc: np.ndarray, scalar: float) -> None:
        self.check(acc.shape)
        acc += scalar * self.x

    def dense(self, dims: Dims) -> np.ndarray:
        self.check(dims)
        return np.array(self.x, dtype=np.float64)


@dataclass(frozen=True)
class ConvKernel:
    center_row: int
    center_col: int

    kind = DesignKind.CONVOLUTION

    def check(self, dims: Dims) -> None:
        _check_index(self.center_row, self.center_col, dims)

    def support(self, dims: Dims):
        """Stencil cells inside the matrix; cells past the border are dropped."""
        for dr, dc, w in STENCIL:
            r, c = self.center_row + dr, self.center_col + dc
            if 0 <= r < dims[0] and 0 <= c < dims[1]:
                yield r, c, w

    def inner(self, m: np.ndarray) -> float:
        self.check(m.shape)
        return float(sum(w * m[r, c] for r, c, w in self.support(m.shape)))

    def accumulate_adjoint(self, acc: np.ndarray, scalar: float) -> None:
        self.check(acc.shape)
        for r, c, w in self.support(acc.shape):
            acc[r, c] += scalar * w

    def dense(self, dims: Dims) -> np.ndarray:
        out = np.zeros(dims)
        self.accumulate_adjoint(out, 1.0)
        return out


Design = Union[EntryIndex, DenseMat, ConvKernel]


def inner(d: Design, m: np.ndarray) -> float:
    """``<X, M> = Tr(X^T M)`` using the cheap path of each variant."""
    return d.inner(m)


def accumulate_adjoint(acc: np.ndarray, d: Design, scalar: float) -> None:
    """``acc += scalar * X`` touching only the support of sparse variants."""
    d.accumulate_adjoint(acc, scalar)


@dataclass(frozen=True)
class DesignFamily:
    kind: DesignKind
    dims: Dims
    sigma_x: float = 1.0

    def __post_init__(self):
        if min(self.dims) <= 0:
            raise InvalidDims(f"dims must be positive, got {self.dims}")
        if self.sigma_x <= 0:
            raise InvalidDims(f"sigma_x must be positive, got {self.sigma_x}")

    @property
    def mu(self) -> float:
        """Smallest eigenvalue of the design second moment Sigma."""
        if self.kind is DesignKind.COMPLETION:
            return 1.0 / (self.dims[0] * self.dims[1])
        if self.kind is DesignKind.SENSING:
            return self.sigma_x ** 2
        raise UnsupportedFamily("convolution designs have no closed-form second moment")

    @property
    def mu_max(self) -> float:
        # Sigma is a multiple of the identity for both closed-form families.
        return self.mu

    @property
    def has_closed_form_moment(self) -> bool:
        return self.kind is not DesignKind.CONVOLUTION


def second_moment_gradient(m: np.ndarray, family: DesignFamily) -> np.ndarray:
    """Sigma applied to M, i.e. the gradient of vec(M)^T Sigma vec(M) / 2."""
    if m.shape != tuple(family.dims):
        raise DimMismatch(f"matrix shape {m.shape} does not match family dims {family.dims}")
    return family.mu * m


@dataclass(frozen=True, eq=False)
class DesignBatch:
    """All designs observed at one time point, stored column-wise.

    ``rows``/``cols`` hold entry indices (completion) or stencil centers
    (convolution); ``xs`` holds the stacked dense matrices (sensing).
    """

    kind: DesignKind
    dims: Dims
    rows: Optional[np.ndarray] = None
    cols: Optional[np.ndarray] = None
    xs: Optional[np.ndarray] = None

    def __post_init__(self):
        m1, m2 = self.dims
        if self.kind is DesignKind.SENSING:
            if self.xs is None or self.xs.ndim != 3 or self.xs.shape[1:] != (m1, m2):
                raise DimMismatch(f"sensing designs must have shape (n, {m1}, {m2})")
            return
        if self.rows is None or self.cols is None or self.rows.shape != self.cols.shape:
            raise DimMismatch("index designs need equally long rows and cols arrays")
        if self.rows.size and (
            self.rows.min() < 0 or self.rows.max() >= m1 or self.cols.min() < 0 or self.cols.max() >= m2
        ):
            raise DimMismatch(f"design indices fall outside a {m1}x{m2} matrix")

    @classmethod
    def from_designs(cls, designs: Sequence[Design], dims: Dims) -> 'DesignBatch':
        if not designs:
            raise InvalidDims("cannot infer the kind of an empty design list")
        kind = designs[0].kind
        if any(d.kind is not kind for d in designs):
            raise UnsupportedFamily("a batch must hold a single design kind")
        for d in designs:
            d.check(dims)
        if kind is DesignKind.SENSING:
            return cls(kind, dims, xs=np.stack([d.x for d in designs]).astype(np.float64))
        if kind is DesignKind.COMPLETION:
            pairs = [(d.row, d.col) for d in designs]
        else:
            pairs = [(d.center_row, d.center_col) for d in designs]
        rows, cols = (np.array(v, dtype=np.int64) for v in zip(*pairs))
        return cls(kind, dims, rows=rows, cols=cols)

    @classmethod
    def empty(cls, kind: DesignKind, dims: Dims) -> 'DesignBatch':
        if kind is DesignKind.SENSING:
            return cls(kind, dims, xs=np.zeros((0,) + tuple(dims)))
        return cls(kind, dims, rows=np.zeros(0, dtype=np.int64), cols=np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return self.xs.shape[0] if self.kind is DesignKind.SENSING else self.rows.shape[0]

    def design(self, i: int) -> Design:
        if self.kind is DesignKind.COMPLETION:
            return EntryIndex(int(self.rows[i]), int(self.cols[i]))
        if self.kind is DesignKind.CONVOLUTION:
            return ConvKernel(int(self.rows[i]), int(self.cols[i]))
        return DenseMat(self.xs[i])

    def designs(self) -> List[Design]:
        return [self.design(i) for i in range(len(self))]

    def subset(self, index) -> 'DesignBatch':
        if self.kind is DesignKind.SENSING:
            return DesignBatch(self.kind, self.dims, xs=self.xs[index])
        return DesignBatch(self.kind, self.dims, rows=self.rows[index], cols=self.cols[index])

    def concat(self, other: 'DesignBatch') -> 'DesignBatch':
        if self.kind is DesignKind.SENSING:
            return DesignBatch(self.kind, self.dims, xs=np.concatenate([self.xs, other.xs]))
        return DesignBatch(
            self.kind, self.dims,
            rows=np.concatenate([self.rows, other.rows]),
            cols=np.concatenate([self.cols, other.cols]),
        )

    def _stencil_terms(self):
        """Valid (row, col, weight, mask) arrays for every stencil offset."""
        m1, m2 = self.dims
        for dr, dc, w in STENCIL:
            r = self.rows + dr
            c = self.cols + dc
            mask = (r >= 0) & (r < m1) & (c >= 0) & (c < m2)
            yield r, c, w, mask

    def predict(self, m: np.ndarray) -> np.ndarray:
        """``<X_i, M>`` for every design in the batch."""
        if m.shape != tuple(self.dims):
            raise DimMismatch(f"matrix shape {m.shape} does not match design dims {self.dims}")
        if self.kind is DesignKind.COMPLETION:
            return m[self.rows, self.cols]
        if self.kind is DesignKind.SENSING:
            return np.einsum('nij,ij->n', self.xs, m)
        out = np.zeros(len(self))
        for r, c, w, mask in self._stencil_terms():
            out[mask] += w * m[r[mask], c[mask]]
        return out

    def adjoint(self, coef: np.ndarray) -> np.ndarray:
        """``sum_i coef_i X_i`` as a dense matrix."""
        coef = np.asarray(coef, dtype=np.float64)
        if coef.shape != (len(self),):
            raise DimMismatch(f"expected {len(self)} coefficients, got {coef.shape}")
        m1, m2 = self.dims
        if self.kind is DesignKind.SENSING:
            return np.tensordot(coef, self.xs, axes=1) if len(self) else np.zeros(self.dims)
        if self.kind is DesignKind.COMPLETION:
            flat = np.bincount(self.rows * m2 + self.cols, weights=coef, minlength=m1 * m2)
            return flat.reshape(m1, m2)
        flat = np.zeros(m1 * m2)
        for r, c, w, mask in self._stencil_terms():
            flat += np.bincount(r[mask] * m2 + c[mask], weights=w * coef[mask], minlength=m1 * m2)
        return flat.reshape(m1, m2)

    def frob_norms(self) -> np.ndarray:
        """``||X_i||_F`` for every design."""
        if self.kind is DesignKind.COMPLETION:
            return np.ones(len(self))
        if self.kind is DesignKind.SENSING:
            return np.sqrt(np.einsum('nij,nij->n', self.xs, self.xs))
        sq = np.zeros(len(self))
        for _, _, w, mask in self._stencil_terms():
            sq += np.where(mask, w * w, 0.0)
        return np.sqrt(sq)


@dataclass(frozen=True, eq=False)
class Observation:
    design: Design
    y: float


@dataclass(frozen=True, eq=False)
class ObservationBatch:
    """Designs and responses observed at one time point."""

    designs: DesignBatch
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        if y.shape != (len(self.designs),):
            raise DimMismatch(f"{len(self.designs)} designs but {y.shape} responses")
        if not np.all(np.isfinite(y)):
            raise NonFiniteValues("responses contain NaN or Inf")
        object.__setattr__(self, 'y', y)

    def __len__(self) -> int:
        return len(self.designs)

    def observations(self) -> List[Observation]:
        return [Observation(self.designs.design(i), float(self.y[i])) for i in range(len(self))]

    def subset(self, index) -> 'ObservationBatch':
        return ObservationBatch(self.designs.subset(index), self.y[index])


@dataclass(frozen=True, eq=False)
class Panel:
    """T batches of observations sharing dimensions and a design family."""

    family: DesignFamily
    batches: Tuple[ObservationBatch, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'batches', tuple(self.batches))
        for t, batch in enumerate(self.batches):
            if batch.designs.kind is not self.family.kind or tuple(batch.designs.dims) != tuple(self.family.dims):
                raise DimMismatch(f"batch {t} does not match the panel family")

    @property
    def dims(self) -> Dims:
        return tuple(self.family.dims)

    @property
    def T(self) -> int:
        return len(self.batches)

    @property
    def batch_sizes(self) -> List[int]:
        return [len(b) for b in self.batches]

    def with_batches(self, batches: Sequence[ObservationBatch]) -> 'Panel':
        return Panel(self.family, tuple(batches))


def sample_batch(family: DesignFamily, n: int, rng: np.random.Generator) -> DesignBatch:
    """n i.i.d. designs of the family drawn from ``rng``."""
    if n < 1:
        raise InvalidDims(f"need at least one design, got n={n}")
    m1, m2 = family.dims
    if family.kind is DesignKind.SENSING:
        return DesignBatch(family.kind, family.dims, xs=family.sigma_x * rng.standard_normal((n, m1, m2)))
    cells = rng.integers(0, m1 * m2, size=n)
    rows, cols = np.divmod(cells, m2)
    return DesignBatch(family.kind, family.dims, rows=rows, cols=cols)


def sample_designs(family: DesignFamily, n: int, rng_seed) -> List[Design]:
    """n i.i.d. designs, deterministic given the seed."""
    return sample_batch(family, n, np.random.default_rng(rng_seed)).designs()
