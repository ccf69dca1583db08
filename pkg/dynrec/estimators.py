"""
The three estimators and cross-validation of the penalty level.

* DLR     - kernel-weighted solve at every time point (warm-started path)
* Static  - the same solve with the degenerate kernel (one time point only)
* TwoStep - Static estimates followed by kernel smoothing across time

One lambda is shared by every time point.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .conf import dynrec_setting, thread_cap
from .designs import DesignFamily, Panel
from .exceptions import EmptyGrid, InvalidCvPlan, InvalidDims
from .kernelband import KernelKind, KernelSpec, half_window, smooth_sequence
from .metrics import batch_mse
from .solver import SolverConfig, SolveTrace, solve_path

logger = logging.getLogger(__name__)

DEGENERATE = KernelSpec(KernelKind.DEGENERATE)


class EstimatorKind(str, Enum):
    DLR = 'dlr'
    STATIC = 'static'
    TWOSTEP = 'twostep'


@dataclass
class EstimatorResult:
    estimates: List[np.ndarray]
    traces: List[SolveTrace]

    @property
    def total_iterations(self) -> int:
        return sum(trace.iters_used for trace in self.traces)


def run_estimator(
    panel: Panel,
    kind: EstimatorKind,
    h: float,
    k: KernelSpec,
    cfg: SolverConfig,
    warm_start: bool = True,
) -> EstimatorResult:
    if kind is EstimatorKind.DLR:
        estimates, traces = solve_path(panel, h, k, cfg, warm_start)
        return EstimatorResult(estimates, traces)
    estimates, traces = solve_path(panel, 0.0, DEGENERATE, cfg, warm_start)
    if kind is EstimatorKind.TWOSTEP:
        estimates = [smooth_sequence(estimates, t, h, k) for t in range(1, panel.T + 1)]
    return EstimatorResult(estimates, traces)


def recover(panel: Panel, kind: EstimatorKind, h: float, k: KernelSpec, cfg: SolverConfig) -> List[np.ndarray]:
    """Recovered M_t for t = 1..T (``h`` is ignored for Static)."""
    return run_estimator(panel, kind, h, k, cfg).estimates


def theory_lambda(family: DesignFamily, n: int, T: int, h: float, sigma_star: float, c1: float = 1.0) -> float:
    """lambda = 2 C1 sigma* sqrt(log(m1 + m2) / (n ceil(T h)))."""
    if n < 1 or T < 1:
        raise InvalidDims(f"n={n} and T={T} must be positive")
    effective = n * max(1, half_window(T, h))
    m1, m2 = family.dims
    return 2.0 * c1 * sigma_star * math.sqrt(math.log(m1 + m2) / effective)


@dataclass(frozen=True)
class LambdaScale:
    """The quantities the theoretical lambda depends on."""

    dims: Tuple[int, int]
    n: int
    T: int
    h: float


def rescale_lambda(lam: float, old: LambdaScale, new: LambdaScale) -> float:
    """Carry a selected lambda to a new setting along the sqrt(log(m1+m2)/(n ceil(Th))) law."""
    def scale(s: LambdaScale) -> float:
        return math.sqrt(math.log(sum(s.dims)) / (s.n * max(1, half_window(s.T, s.h))))

    return lam * scale(new) / scale(old)


def penalty_anchor(theory_value: float) -> float:
    """The solver lambda matching a penalty stated for the full squared loss.

    The solver minimises half the loss plus 2 * lam * ||M||_*, so its
    threshold is four times that of the full-loss objective.
    """
    return 0.25 * theory_value


def default_grid(anchor: float, size: Optional[int] = None, span: Optional[Tuple[float, float]] = None) -> Tuple[float, ...]:
    """Log-spaced multiples of the theoretical anchor."""
    size = size or dynrec_setting('CV_GRID_SIZE')
    low, high = span or dynrec_setting('CV_GRID_SPAN')
    return tuple(float(anchor * m) for m in np.logspace(low, high, size))


@dataclass(frozen=True)
class CvPlan:
    lambda_grid: Tuple[float, ...]
    folds: int = 5
    split_seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise InvalidCvPlan(f"need at least 2 folds, got {self.folds}")
        if not self.lambda_grid:
            raise EmptyGrid("the lambda grid is empty")
        if any(lam <= 0 for lam in self.lambda_grid):
            raise InvalidCvPlan("grid values must be positive")
        object.__setattr__(self, 'lambda_grid', tuple(sorted(float(v) for v in self.lambda_grid)))


@dataclass
class CvResult:
    lambda_star: float
    scores: List[Tuple[float, float]] = field(default_factory=list)


def assign_folds(panel: Panel, folds: int, split_seed: int) -> List[Optional[np.ndarray]]:
    """Fold label per observation, stratified by time batch.

    Batches smaller than ``folds`` get None: they train in every fold and
    are never held out.
    """
    rng = np.random.default_rng(split_seed)
    labels = []
    for batch in panel.batches:
        n = len(batch)
        if n < folds:
            labels.append(None)
            continue
        fold_of = np.empty(n, dtype=np.int64)
        fold_of[rng.permutation(n)] = np.arange(n) % folds
        labels.append(fold_of)
    return labels


def split_fold(panel: Panel, labels, fold: int) -> Tuple[Panel, Panel]:
    train, test = [], []
    for batch, fold_of in zip(panel.batches, labels):
        if fold_of is None:
            train.append(batch)
            test.append(batch.subset(np.zeros(len(batch), dtype=bool)))
            continue
        held = fold_of == fold
        train.append(batch.subset(~held))
        test.append(batch.subset(held))
    return panel.with_batches(train), panel.with_batches(test)


def heldout_score(estimates: Sequence[np.ndarray], test: Panel) -> float:
    """Mean over times with held-out data of the mean squared prediction error."""
    errors = [batch_mse(estimate, batch, t)
              for t, (estimate, batch) in enumerate(zip(estimates, test.batches), start=1) if len(batch)]
    return float(np.mean(errors)) if errors else float('nan')


def cross_validate_lambda(
    panel: Panel,
    kind: EstimatorKind,
    h: float,
    k: KernelSpec,
    plan: CvPlan,
    cfg: SolverConfig,
) -> CvResult:
    """K-fold CV over the grid; ties go to the larger lambda."""
    labels = assign_folds(panel, plan.folds, plan.split_seed)
    splits = [split_fold(panel, labels, fold) for fold in range(plan.folds)]
    jobs = [(lam, fold) for lam in plan.lambda_grid for fold in range(plan.folds)]

    def fit_and_score(job):
        lam, fold = job
        train, test = splits[fold]
        estimates = run_estimator(train, kind, h, k, replace(cfg, lam=lam)).estimates
        return heldout_score(estimates, test)

    workers = min(thread_cap(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fold_scores = list(pool.map(fit_and_score, jobs))
    else:
        fold_scores = [fit_and_score(job) for job in jobs]

    result = CvResult(lambda_star=plan.lambda_grid[0])
    best = math.inf
    for i, lam in enumerate(plan.lambda_grid):
        per_fold = fold_scores[i * plan.folds:(i + 1) * plan.folds]
        score = float(np.nanmean(per_fold))
        result.scores.append((lam, score))
        logger.info("CV lambda=%.6g score=%.6g", lam, score)
        if score <= best:
            best = score
            result.lambda_star = lam
    return result


def refine_grid(result: CvResult, size: int = 5) -> Tuple[float, ...]:
    """A finer log grid between the neighbours of the coarse optimum."""
    grid = [lam for lam, _ in result.scores]
    i = grid.index(result.lambda_star)
    low = grid[max(i - 1, 0)]
    high = grid[min(i + 1, len(grid) - 1)]
    if low == high:
        return (result.lambda_star,)
    return tuple(float(v) for v in np.geomspace(low, high, size))


def extend_grid(grid: Sequence[float], count: int, downward: bool) -> Tuple[float, ...]:
    """``count`` further points past one end of a sorted log grid, at the grid's own ratio."""
    ratio = (grid[-1] / grid[0]) ** (1.0 / (len(grid) - 1)) if len(grid) > 1 else 10.0
    if downward:
        return tuple(float(grid[0] / ratio ** i) for i in range(count, 0, -1))
    return tuple(float(grid[-1] * ratio ** i) for i in range(1, count + 1))


def best_lambda(scores: Dict[float, float]) -> float:
    """Lowest score over ascending lambda; ties go to the larger lambda."""
    grid = sorted(scores)
    choice, best = grid[0], math.inf
    for lam in grid:
        if scores[lam] <= best:
            choice, best = lam, scores[lam]
    return choice


def select_lambda(
    panel: Panel,
    kind: EstimatorKind,
    h: float,
    k: KernelSpec,
    plan: CvPlan,
    cfg: SolverConfig,
    max_extensions: Optional[int] = None,
    refine: Optional[int] = None,
) -> CvResult:
    """Cross-validate over the plan's grid, then chase an edge optimum and refine.

    While the choice sits on the smallest grid value the grid is extended
    downward. It is extended upward only when the largest value scores
    strictly better than its neighbour. The final pass evaluates
    ``refine`` points between the neighbours of the choice.
    """
    max_extensions = dynrec_setting('CV_EXTENSIONS') if max_extensions is None else max_extensions
    refine = dynrec_setting('CV_REFINE') if refine is None else refine
    scores = dict(cross_validate_lambda(panel, kind, h, k, plan, cfg).scores)
    count = max(len(plan.lambda_grid) - 1, 1)

    def evaluate(values: Sequence[float]) -> None:
        fresh = tuple(v for v in values if not any(math.isclose(v, s) for s in scores))
        if fresh:
            sub = CvPlan(fresh, folds=plan.folds, split_seed=plan.split_seed)
            scores.update(cross_validate_lambda(panel, kind, h, k, sub, cfg).scores)

    for _ in range(max_extensions):
        grid = sorted(scores)
        if len(grid) < 2:
            break
        choice = best_lambda(scores)
        if choice == grid[0]:
            downward = True
        elif choice == grid[-1] and scores[grid[-1]] < scores[grid[-2]]:
            downward = False
        else:
            break
        extra = extend_grid(grid, count, downward)
        logger.info("CV optimum %.6g is on the grid edge; extending %s to %.6g",
                    choice, 'down' if downward else 'up', extra[0] if downward else extra[-1])
        evaluate(extra)

    if refine and len(scores) > 1:
        coarse = CvResult(best_lambda(scores), sorted(scores.items()))
        evaluate(refine_grid(coarse, refine))

    result = CvResult(best_lambda(scores), sorted(scores.items()))
    logger.info("CV selected lambda=%.6g from %d grid values", result.lambda_star, len(result.scores))
    return result
