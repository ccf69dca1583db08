"""
Warm-started accelerated proximal gradient over a kernel window.

At time t the solver minimises, over the window of nonzero kernel weights,

    F_t(M) = q_t(M) + 2 * lam * ||M||_*

where ``q_t`` has gradient

    empirical: sum_j (w_j / n_j) sum_i X_ji (<X_ji, M> - y_ji)
    exact:     Sigma M - sum_j (w_j / n_j) sum_i y_ji X_ji

Each step is ``M <- svt(N - grad(N) / L_f, 2 lam / L_f)``; the recorded
objective includes the same factor 2 on the penalty.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .conf import dynrec_setting, thread_cap
from .designs import DesignFamily, DesignKind, ObservationBatch, Panel, second_moment_gradient
from .exceptions import DimMismatch, DynrecError, EmptyWindow, InvalidDims, PathSolveError
from .kernelband import KernelSpec, weights
from .matcore import nuclear_norm, spectral_norm, svt

logger = logging.getLogger(__name__)


class GradientMode(str, Enum):
    EXACT = 'exact'
    EMPIRICAL = 'empirical'


def default_gradient_mode(family: DesignFamily) -> GradientMode:
    return GradientMode.EXACT if family.has_closed_form_moment else GradientMode.EMPIRICAL


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.0
    max_iters: int = 500
    tol: float = 1e-3
    gradient_mode: Optional[GradientMode] = None
    lipschitz_override: Optional[float] = None

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidDims(f"lambda must be nonnegative, got {self.lam}")
        if self.tol <= 0:
            raise InvalidDims(f"tolerance must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise InvalidDims(f"max_iters must be positive, got {self.max_iters}")
        if self.lipschitz_override is not None and self.lipschitz_override <= 0:
            raise InvalidDims("lipschitz_override must be positive")

    @classmethod
    def from_settings(cls, **overrides) -> 'SolverConfig':
        values = {'max_iters': dynrec_setting('MAX_ITERS'), 'tol': dynrec_setting('TOL')}
        values.update(overrides)
        return cls(**values)

    def mode_for(self, family: DesignFamily) -> GradientMode:
        return self.gradient_mode or default_gradient_mode(family)


@dataclass
class SolveTrace:
    iters_used: int = 0
    objective_path: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def final_objective(self) -> float:
        return self.objective_path[-1]


@dataclass(frozen=True, eq=False)
class WindowProblem:
    """The observations inside the kernel window around time ``t`` (1-based)."""

    family: DesignFamily
    t: int
    batches: Tuple[ObservationBatch, ...]
    weights: np.ndarray
    times: Tuple[int, ...] = ()

    def __post_init__(self):
        if not self.batches:
            raise EmptyWindow(f"no observations in the window at t={self.t}")
        if abs(float(np.sum(self.weights)) - 1.0) > 1e-9:
            object.__setattr__(self, 'weights', self.weights / np.sum(self.weights))

    @property
    def dims(self) -> Tuple[int, int]:
        return tuple(self.family.dims)

    @cached_property
    def scaled_weights(self) -> List[float]:
        """w_j / n_j for every batch in the window."""
        return [float(w) / len(b) for w, b in zip(self.weights, self.batches)]

    @cached_property
    def data_term(self) -> np.ndarray:
        """sum_j (w_j / n_j) sum_i y_ji X_ji, assembled once per window."""
        return sum(c * b.designs.adjoint(b.y) for c, b in zip(self.scaled_weights, self.batches))

    @cached_property
    def response_energy(self) -> float:
        """Half the weighted mean square response; the constant of q_t."""
        return 0.5 * sum(c * float(b.y @ b.y) for c, b in zip(self.scaled_weights, self.batches))


def build_window(panel: Panel, t: int, h: float, kernel: KernelSpec) -> WindowProblem:
    """Window problem at 1-based time ``t``; empty batches drop out with renormalisation."""
    w = weights(t, panel.T, h, kernel)
    support = [j for j in np.flatnonzero(w) if len(panel.batches[j])]
    if not support:
        raise EmptyWindow(f"no observations in the kernel window at t={t}")
    logger.debug("Window at t=%d covers %d time points", t, len(support))
    return WindowProblem(
        family=panel.family,
        t=t,
        batches=tuple(panel.batches[j] for j in support),
        weights=w[support] / w[support].sum(),
        times=tuple(int(j) + 1 for j in support),
    )


def lipschitz_constant(w: WindowProblem, mode: GradientMode) -> float:
    """L_f for the step size 1/L_f.

    Exact mode: 2 * largest eigenvalue of Sigma. Empirical mode:
    2 * || sum_j (w_j / n_j) sum_i ||X_ji||_F X_ji ||_2.
    """
    if mode is GradientMode.EXACT:
        return 2.0 * w.family.mu_max
    acc = sum(c * b.designs.adjoint(b.designs.frob_norms()) for c, b in zip(w.scaled_weights, w.batches))
    l_f = 2.0 * spectral_norm(acc)
    if l_f <= 0:
        raise EmptyWindow(f"zero Lipschitz constant at t={w.t}")
    return l_f


def gradient(n: np.ndarray, w: WindowProblem, mode: GradientMode) -> np.ndarray:
    """Gradient of q_t at ``n`` (no leading factor 2)."""
    if n.shape != w.dims:
        raise DimMismatch(f"iterate shape {n.shape} does not match {w.dims}")
    if mode is GradientMode.EXACT:
        return second_moment_gradient(n, w.family) - w.data_term
    total = np.zeros(w.dims)
    for c, b in zip(w.scaled_weights, w.batches):
        total += c * b.designs.adjoint(b.designs.predict(n) - b.y)
    return total


def smooth_part(m: np.ndarray, w: WindowProblem, mode: GradientMode) -> float:
    """q_t(M): half the weighted squared residual, or its expectation form."""
    if mode is GradientMode.EXACT:
        quad = 0.5 * float(np.vdot(m, second_moment_gradient(m, w.family)))
        return quad - float(np.vdot(w.data_term, m)) + w.response_energy
    total = 0.0
    for c, b in zip(w.scaled_weights, w.batches):
        r = b.designs.predict(m) - b.y
        total += 0.5 * c * float(r @ r)
    return total


def objective(m: np.ndarray, w: WindowProblem, cfg: SolverConfig) -> float:
    mode = cfg.mode_for(w.family)
    penalty = 2.0 * cfg.lam * nuclear_norm(m) if cfg.lam > 0 else 0.0
    return smooth_part(m, w, mode) + penalty


def next_momentum(s: float) -> float:
    return (1.0 + math.sqrt(1.0 + 4.0 * s * s)) / 2.0


def dfista_step(
    m_prev: np.ndarray,
    m_curr: np.ndarray,
    s_prev: float,
    s_curr: float,
    w: WindowProblem,
    cfg: SolverConfig,
    l_f: float,
) -> Tuple[np.ndarray, float]:
    """One extrapolate / gradient / threshold step; returns (M_next, s_next)."""
    if l_f <= 0:
        raise InvalidDims(f"Lipschitz constant must be positive, got {l_f}")
    n = m_curr + ((s_prev - 1.0) / s_curr) * (m_curr - m_prev)
    g = n - gradient(n, w, cfg.mode_for(w.family)) / l_f
    return svt(g, 2.0 * cfg.lam / l_f), next_momentum(s_curr)


def solve_at(w: WindowProblem, init: np.ndarray, cfg: SolverConfig) -> Tuple[np.ndarray, SolveTrace]:
    """Iterate from ``init`` until successive objectives differ by at most ``tol``."""
    init = np.asarray(init, dtype=np.float64)
    if init.shape != w.dims:
        raise DimMismatch(f"initial matrix {init.shape} does not match {w.dims}")
    mode = cfg.mode_for(w.family)
    l_f = cfg.lipschitz_override or lipschitz_constant(w, mode)
    trace = SolveTrace(objective_path=[objective(init, w, cfg)])
    m_prev, m_curr = init, init
    s_prev, s_curr = 1.0, 1.0
    for k in range(cfg.max_iters):
        m_next, s_next = dfista_step(m_prev, m_curr, s_prev, s_curr, w, cfg, l_f)
        m_prev, m_curr = m_curr, m_next
        s_prev, s_curr = s_curr, s_next
        trace.objective_path.append(objective(m_curr, w, cfg))
        trace.iters_used = k + 1
        logger.debug("t=%d iter=%d objective=%.10g", w.t, k + 1, trace.objective_path[-1])
        if abs(trace.objective_path[-1] - trace.objective_path[-2]) <= cfg.tol:
            trace.converged = True
            break
    if not trace.converged:
        logger.warning("Solve at t=%d stopped at max_iters=%d without reaching tol=%g",
                       w.t, cfg.max_iters, cfg.tol)
    return m_curr, trace


def initial_matrix(batch: ObservationBatch, family: DesignFamily) -> np.ndarray:
    """Observed entries hold their (averaged) responses for completion; zero otherwise."""
    if family.kind is not DesignKind.COMPLETION or not len(batch):
        return np.zeros(family.dims)
    designs = batch.designs
    sums = designs.adjoint(batch.y)
    counts = designs.adjoint(np.ones(len(batch)))
    return np.divide(sums, counts, out=np.zeros(family.dims), where=counts > 0)


def solve_path(
    panel: Panel,
    h: float,
    kernel: KernelSpec,
    cfg: SolverConfig,
    warm_start: bool = True,
) -> Tuple[List[np.ndarray], List[SolveTrace]]:
    """Solve every time point of the panel in order.

    With ``warm_start`` each time is seeded with the previous solution;
    otherwise every time is seeded from its own observations, which makes
    the per-time solves independent and lets them run concurrently.
    """
    def solve_one(t: int, init: np.ndarray):
        try:
            window = build_window(panel, t, h, kernel)
            return solve_at(window, init, cfg)
        except DynrecError as exc:
            raise PathSolveError(t, exc) from exc

    def seed(t: int) -> np.ndarray:
        return initial_matrix(panel.batches[t - 1], panel.family)

    times = range(1, panel.T + 1)
    if warm_start:
        results = []
        init = seed(1)
        for t in times:
            estimate, trace = solve_one(t, init)
            logger.info("t=%d: %d iterations, objective %.6g", t, trace.iters_used, trace.final_objective)
            results.append((estimate, trace))
            init = estimate
    else:
        workers = min(thread_cap(), panel.T)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda t: solve_one(t, seed(t)), times))
        else:
            results = [solve_one(t, seed(t)) for t in times]
    estimates = [r[0] for r in results]
    traces = [r[1] for r in results]
    return estimates, traces


def shrink_all_threshold(w: WindowProblem, cfg: SolverConfig) -> float:
    """Smallest lambda for which zero is a fixed point, hence the minimiser."""
    mode = cfg.mode_for(w.family)
    return 0.5 * spectral_norm(-gradient(np.zeros(w.dims), w, mode))
