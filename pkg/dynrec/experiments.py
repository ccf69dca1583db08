"""
Experiment orchestration: synthetic scenarios and real-data pipelines.

A run expands its configuration into grid points, runs every
(grid point, replicate seed) pair as an independent job, and merges the
results in grid order into:

* ``mse_by_t.csv``   - point, seed, estimator, t, mse
* ``replicates.csv`` - one row per (point, seed, estimator)
* ``summary.csv``    - averages per (point, estimator), plus slope rows
* ``figure_*.csv``   - plot-ready long-format frames
* ``summary.xlsx``   - the summary and figure frames as styled sheets
* ``config.json``    - the configuration and its hash

On failure whatever finished is flushed with a ``.partial`` suffix and an
``ExperimentStageError`` naming the stage is raised.
"""
import hashlib
import json
import logging
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from . import figure_data, reports
from .conf import dynrec_setting, thread_cap
from .designs import DesignFamily, DesignKind, Panel
from .estimators import (
    CvPlan,
    EstimatorKind,
    LambdaScale,
    default_grid,
    penalty_anchor,
    rescale_lambda,
    run_estimator,
    select_lambda,
    theory_lambda,
)
from .exceptions import DegenerateFit, DynrecError, ExperimentStageError, InvalidConfig
from .ingest import IngestFilters, ingest_triplets
from .kernelband import (
    BandwidthPlan,
    KernelSpec,
    plug_in_bandwidth,
    summarize_panel,
    theory_bandwidth_constant,
    weights,
)
from .matcore import nuclear_norm
from .metrics import (
    bias_diagnostic,
    error_bound,
    fit_log_slope,
    mse_path,
    noise_diagnostic,
    test_mse as heldout_mse,
)
from .solver import SolverConfig
from .synthgen import (
    DependentDesignSpec,
    GroundTruthPath,
    NoiseKind,
    NoiseSpec,
    build_panel,
)

logger = logging.getLogger(__name__)


class Scenario(str, Enum):
    RHO_TAU_SWEEP = 'rho_tau_sweep'
    NOISE_DEPENDENCE = 'noise_dependence'
    DESIGN_DEPENDENCE = 'design_dependence'
    BASELINE_COMPARISON = 'baseline_comparison'
    REAL_DATA = 'real_data'


LAMBDA_MODES = ('cv', 'theory')


def _desk_dims() -> Tuple[int, int]:
    return tuple(dynrec_setting('DESK_DIMS'))


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario
    dims: Tuple[int, int] = field(default_factory=_desk_dims)
    rank: int = field(default_factory=lambda: dynrec_setting('DESK_RANK'))
    T: int = field(default_factory=lambda: dynrec_setting('DESK_T'))
    rho: Optional[float] = None
    n: Optional[int] = None
    design: str = 'completion'
    sigma_x: float = 1.0
    kernel: str = field(default_factory=lambda: dynrec_setting('KERNEL'))
    bandwidth: Union[str, float] = 'auto'
    c_h: Union[str, float] = field(default_factory=lambda: dynrec_setting('C_H'))
    lam: Union[str, float] = 'cv'
    c1: float = field(default_factory=lambda: dynrec_setting('C1'))
    cv_folds: int = field(default_factory=lambda: dynrec_setting('CV_FOLDS'))
    estimators: Tuple[str, ...] = ('dlr',)
    rho_tau_pairs: Tuple[Tuple[float, int], ...] = ()
    sigma_values: Tuple[float, ...] = (1.0,)
    beta_values: Tuple[float, ...] = (0.0,)
    alpha_values: Tuple[float, ...] = (0.0,)
    baseline_rho: Optional[float] = None
    data_path: Optional[str] = None
    T_values: Tuple[int, ...] = ()
    split: float = 0.8
    min_col_count: Optional[int] = None
    min_row_count: Optional[int] = None
    max_rows: Optional[int] = None
    seeds: Tuple[int, ...] = (1,)
    max_iters: int = field(default_factory=lambda: dynrec_setting('MAX_ITERS'))
    tol: float = field(default_factory=lambda: dynrec_setting('TOL'))
    diagnostics: bool = False
    output_dir: str = field(default_factory=lambda: str(Path(dynrec_setting('OUTPUT_ROOT')) / 'experiment'))
    notes: str = ''

    def __post_init__(self):
        self._normalize()
        self._validate()

    def _normalize(self):
        def put(name, value):
            object.__setattr__(self, name, value)

        try:
            put('scenario', Scenario(self.scenario))
        except ValueError as exc:
            raise InvalidConfig(f"unknown scenario {self.scenario!r}") from exc
        put('dims', tuple(int(d) for d in self.dims))
        put('estimators', tuple(str(e) for e in self.estimators))
        put('rho_tau_pairs', tuple((float(rho), int(T)) for rho, T in self.rho_tau_pairs))
        for name in ('sigma_values', 'beta_values', 'alpha_values'):
            put(name, tuple(float(v) for v in getattr(self, name)))
        put('T_values', tuple(int(v) for v in self.T_values))
        put('seeds', tuple(int(s) for s in self.seeds))
        put('output_dir', str(self.output_dir))
        for name in ('rank', 'T', 'cv_folds', 'max_iters'):
            put(name, int(getattr(self, name)))
        for name in ('sigma_x', 'c1', 'split', 'tol'):
            put(name, float(getattr(self, name)))
        for name in ('rho', 'baseline_rho'):
            if getattr(self, name) is not None:
                put(name, float(getattr(self, name)))
        if self.n is not None:
            put('n', int(self.n))
        for name in ('lam', 'bandwidth', 'c_h'):
            value = getattr(self, name)
            if not isinstance(value, str):
                put(name, float(value))

    def _validate(self):
        if len(self.dims) != 2 or min(self.dims) < 1:
            raise InvalidConfig(f"dims must be two positive integers, got {self.dims}")
        if not self.seeds:
            raise InvalidConfig("at least one replicate seed is required")
        for name in self.estimators:
            if name not in {kind.value for kind in EstimatorKind}:
                raise InvalidConfig(f"unknown estimator {name!r}")
        if isinstance(self.lam, str) and self.lam not in LAMBDA_MODES:
            raise InvalidConfig(f"lam must be 'cv', 'theory' or a positive number, got {self.lam!r}")
        if isinstance(self.lam, float) and self.lam < 0:
            raise InvalidConfig("lam must be nonnegative")
        if isinstance(self.bandwidth, str) and self.bandwidth != 'auto':
            raise InvalidConfig(f"bandwidth must be 'auto' or a number, got {self.bandwidth!r}")
        if isinstance(self.bandwidth, float) and self.bandwidth < 0:
            raise InvalidConfig("bandwidth must be nonnegative")
        if isinstance(self.c_h, str) and self.c_h != 'auto':
            raise InvalidConfig(f"c_h must be 'auto' or a number, got {self.c_h!r}")
        if isinstance(self.c_h, float) and self.c_h <= 0:
            raise InvalidConfig("c_h must be positive")
        if not 0.0 < self.split <= 1.0:
            raise InvalidConfig(f"split must lie in (0, 1], got {self.split}")
        if self.design not in {kind.value for kind in DesignKind}:
            raise InvalidConfig(f"unknown design family {self.design!r}")

        scenario = self.scenario
        if scenario is Scenario.RHO_TAU_SWEEP and not self.rho_tau_pairs:
            raise InvalidConfig("rho_tau_sweep needs rho_tau_pairs")
        if scenario in (Scenario.NOISE_DEPENDENCE, Scenario.DESIGN_DEPENDENCE, Scenario.BASELINE_COMPARISON):
            if self.rho is None and self.n is None:
                raise InvalidConfig(f"{scenario.value} needs rho or n")
        if scenario is Scenario.NOISE_DEPENDENCE and not (self.beta_values and self.sigma_values):
            raise InvalidConfig("noise_dependence needs sigma_values and beta_values")
        if scenario is Scenario.DESIGN_DEPENDENCE:
            if not self.alpha_values:
                raise InvalidConfig("design_dependence needs alpha_values")
            if self.design != DesignKind.COMPLETION.value:
                raise InvalidConfig("design_dependence is defined for completion designs only")
        if scenario is Scenario.REAL_DATA and not self.data_path:
            raise InvalidConfig("real_data needs data_path")
        if scenario is not Scenario.REAL_DATA and not self.sigma_values:
            raise InvalidConfig("sigma_values must not be empty")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], **overrides) -> 'ExperimentConfig':
        """Merge ``overrides`` (None values ignored) over ``data`` and validate."""
        values = dict(data)
        values.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise InvalidConfig(f"unknown config fields: {unknown}")
        if 'scenario' not in values:
            raise InvalidConfig("config must name a scenario")
        return cls(**values)

    @classmethod
    def from_json(cls, path: Union[str, Path], **overrides) -> 'ExperimentConfig':
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data, **overrides)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['scenario'] = self.scenario.value
        return json.loads(json.dumps(data))

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    @property
    def family(self) -> DesignFamily:
        return DesignFamily(DesignKind(self.design), self.dims, self.sigma_x)

    @property
    def kernel_spec(self) -> KernelSpec:
        return KernelSpec.from_name(self.kernel)

    @property
    def filters(self) -> IngestFilters:
        return IngestFilters(self.min_col_count, self.min_row_count, self.max_rows)

    def solver_config(self, lam: float = 0.0) -> SolverConfig:
        return SolverConfig(lam=lam, max_iters=self.max_iters, tol=self.tol)


@dataclass(frozen=True)
class GridPoint:
    label: str
    T: int
    rho: Optional[float] = None
    n: Optional[int] = None
    sigma_xi: float = 1.0
    beta: float = 0.0
    alpha: float = 0.0


def grid_points(cfg: ExperimentConfig) -> List[GridPoint]:
    sigma = cfg.sigma_values[0] if cfg.sigma_values else 1.0
    scenario = cfg.scenario
    if scenario is Scenario.RHO_TAU_SWEEP:
        return [GridPoint(f"rho={rho:g},T={T}", T=T, rho=rho, sigma_xi=sigma) for rho, T in cfg.rho_tau_pairs]
    if scenario is Scenario.NOISE_DEPENDENCE:
        return [
            GridPoint(f"sigma={s:g},beta={b:g}", T=cfg.T, rho=cfg.rho, n=cfg.n, sigma_xi=s, beta=b)
            for s in cfg.sigma_values
            for b in cfg.beta_values
        ]
    if scenario is Scenario.DESIGN_DEPENDENCE:
        return [
            GridPoint(f"alpha={a:g}", T=cfg.T, rho=cfg.rho, n=cfg.n, sigma_xi=sigma, alpha=a)
            for a in cfg.alpha_values
        ]
    if scenario is Scenario.BASELINE_COMPARISON:
        return [GridPoint("baseline", T=cfg.T, rho=cfg.rho, n=cfg.n, sigma_xi=sigma)]
    return [GridPoint(f"T={T}", T=T) for T in (cfg.T_values or (cfg.T,))]


@dataclass
class ResultRecord:
    """Outcome of one estimator on one replicate of one grid point."""

    scenario: str
    config_hash: str
    point: str
    seed: int
    estimator: str
    n: int
    T: int
    h: float
    lam: float
    ratio: float
    sigma_xi: float
    beta: float
    alpha: float
    mse_by_t: List[Optional[float]]
    avg_mse: float
    iterations: int
    wall_clock: float


@dataclass
class PointData:
    """Panels of one replicate; ``truths`` is None and ``test`` set for real data."""

    panels: Dict[str, Panel]
    truths: Optional[List[np.ndarray]] = None
    test: Optional[Panel] = None

    def panel_for(self, estimator: str) -> Panel:
        return self.panels.get(estimator, self.panels['default'])


@dataclass
class LambdaAnchor:
    lam: float
    scale: LambdaScale


@dataclass
class ExperimentOutcome:
    records: List[ResultRecord]
    frames: Dict[str, pd.DataFrame]
    paths: Dict[str, Path]


@contextmanager
def stage(name: str):
    """Re-raise any failure inside the block as ``ExperimentStageError(name)``."""
    try:
        yield
    except ExperimentStageError:
        raise
    except Exception as exc:
        raise ExperimentStageError(name, exc) from exc


def stream_seeds(seed: int, count: int) -> List[int]:
    """Independent child seeds of a replicate seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def typical_n(panel: Panel) -> int:
    return max(1, int(round(float(np.mean(panel.batch_sizes)))))


def prepare_data(cfg: ExperimentConfig, point: GridPoint, seed: int) -> PointData:
    if cfg.scenario is Scenario.REAL_DATA:
        with stage('ingest'):
            result = ingest_triplets(cfg.data_path, point.T, split=cfg.split, seed=seed, filters=cfg.filters)
        return PointData(panels={'default': result.train}, test=result.test)

    with stage('synthgen'):
        truth_seed, design_seed, noise_seed = stream_seeds(seed, 3)
        family = cfg.family
        path = GroundTruthPath(cfg.dims, cfg.rank, truth_seed)
        noise_kind = NoiseKind.PHI_MIXING_AR if cfg.scenario is Scenario.NOISE_DEPENDENCE else NoiseKind.IID
        noise = NoiseSpec(noise_kind, point.sigma_xi, point.beta, noise_seed)
        dep = DependentDesignSpec(point.alpha, family, design_seed) if point.alpha > 0 else None
        panel, truths = build_panel(path, family, rho=point.rho, n=point.n, noise=noise, dep=dep, T=point.T,
                                    seed=design_seed)
        panels = {'default': panel}
        if cfg.scenario is Scenario.BASELINE_COMPARISON and cfg.baseline_rho is not None:
            richer, _ = build_panel(path, family, rho=cfg.baseline_rho, noise=noise, T=point.T, seed=design_seed)
            panels[EstimatorKind.STATIC.value] = richer
            panels[EstimatorKind.TWOSTEP.value] = richer
    return PointData(panels=panels, truths=truths)


def resolve_bandwidth(cfg: ExperimentConfig, panel: Panel) -> float:
    if not isinstance(cfg.bandwidth, str):
        return float(cfg.bandwidth)
    summary = summarize_panel(panel)
    if cfg.c_h == 'auto':
        c_h = theory_bandwidth_constant(cfg.kernel_spec, summary.plug_in_d2, cfg.c1)
    else:
        c_h = float(cfg.c_h)
    plan = BandwidthPlan(c_h=c_h, rank_guess=cfg.rank)
    return plug_in_bandwidth(summary, panel.dims, typical_n(panel), panel.T, plan,
                             design_kind=cfg.design, sigma_x=cfg.sigma_x)


def solve_bandwidth(estimator: str, h: float) -> float:
    """Bandwidth of the per-time solve: only DLR smooths inside the solver."""
    return h if estimator == EstimatorKind.DLR.value else 0.0


def lambda_scale(panel: Panel, estimator: str, h: float) -> LambdaScale:
    return LambdaScale(panel.dims, typical_n(panel), panel.T, solve_bandwidth(estimator, h))


def theory_anchor(cfg: ExperimentConfig, panel: Panel, estimator: str, h: float) -> float:
    scale = lambda_scale(panel, estimator, h)
    sigma_star = summarize_panel(panel).plug_in_scale
    return penalty_anchor(theory_lambda(panel.family, scale.n, scale.T, scale.h, sigma_star, cfg.c1))


def select_lambdas(cfg: ExperimentConfig, points: Sequence[GridPoint]) -> Dict[str, LambdaAnchor]:
    """Cross-validate lambda once per estimator on the first grid point and seed.

    Other grid points receive the selected value rescaled to their (n, T, h).
    """
    seed = cfg.seeds[0]
    data = prepare_data(cfg, points[0], seed)
    anchors = {}
    with stage('cv'):
        for estimator in cfg.estimators:
            panel = data.panel_for(estimator)
            h = resolve_bandwidth(cfg, panel)
            grid = default_grid(theory_anchor(cfg, panel, estimator, h))
            plan = CvPlan(grid, folds=cfg.cv_folds, split_seed=seed)
            result = select_lambda(panel, EstimatorKind(estimator), h, cfg.kernel_spec, plan, cfg.solver_config())
            anchors[estimator] = LambdaAnchor(result.lambda_star, lambda_scale(panel, estimator, h))
            logger.info("CV selected lambda=%.6g for %s on %s", result.lambda_star, estimator, points[0].label)
    return anchors


def resolve_lambda(cfg: ExperimentConfig, panel: Panel, estimator: str, h: float,
                   anchors: Mapping[str, LambdaAnchor]) -> float:
    if not isinstance(cfg.lam, str):
        return float(cfg.lam)
    if cfg.lam == 'theory':
        return theory_anchor(cfg, panel, estimator, h)
    anchor = anchors[estimator]
    return rescale_lambda(anchor.lam, anchor.scale, lambda_scale(panel, estimator, h))


def run_replicate(cfg: ExperimentConfig, point: GridPoint, seed: int,
                  anchors: Mapping[str, LambdaAnchor]) -> List[ResultRecord]:
    data = prepare_data(cfg, point, seed)
    records = []
    for estimator in cfg.estimators:
        panel = data.panel_for(estimator)
        with stage('estimators'):
            h = resolve_bandwidth(cfg, panel)
            lam = resolve_lambda(cfg, panel, estimator, h, anchors)
            started = time.perf_counter()
            result = run_estimator(panel, EstimatorKind(estimator), h, cfg.kernel_spec, cfg.solver_config(lam))
            wall_clock = time.perf_counter() - started
        with stage('metrics'):
            if data.truths is not None:
                per_t: List[Optional[float]] = mse_path(result.estimates, data.truths)
            else:
                per_t = heldout_mse(result.estimates, data.test)
            observed = [v for v in per_t if v is not None]
            n = typical_n(panel)
            if point.rho is not None and panel is data.panels['default']:
                rho = point.rho
            else:
                rho = n / (panel.dims[0] * panel.dims[1])
            records.append(ResultRecord(
                scenario=cfg.scenario.value,
                config_hash=cfg.config_hash,
                point=point.label,
                seed=seed,
                estimator=estimator,
                n=n,
                T=panel.T,
                h=h,
                lam=lam,
                ratio=rho * panel.T,
                sigma_xi=point.sigma_xi,
                beta=point.beta,
                alpha=point.alpha,
                mse_by_t=per_t,
                avg_mse=float(np.mean(observed)) if observed else math.nan,
                iterations=result.total_iterations,
                wall_clock=wall_clock,
            ))
        logger.info("%s seed=%d %s: avg MSE %.6g in %.2fs (%d iterations)", point.label, seed, estimator,
                    records[-1].avg_mse, wall_clock, result.total_iterations)
    return records


SCALAR_COLUMNS = ['point', 'seed', 'estimator', 'n', 'T', 'h', 'lam', 'ratio', 'sigma_xi', 'beta', 'alpha',
                  'avg_mse', 'iterations', 'wall_clock']
SUMMARY_COLUMNS = ['config_hash', 'scenario', 'point', 'estimator', 'ratio', 'sigma_xi', 'beta', 'alpha', 'T',
                   'replicates', 'avg_mse', 'sd_mse', 'total_iterations', 'wall_clock', 'slope']


def mse_frame(records: Sequence[ResultRecord]) -> pd.DataFrame:
    rows = [
        {'point': r.point, 'seed': r.seed, 'estimator': r.estimator, 't': t,
         'mse': math.nan if mse is None else mse}
        for r in records
        for t, mse in enumerate(r.mse_by_t, start=1)
    ]
    return pd.DataFrame(rows, columns=['point', 'seed', 'estimator', 't', 'mse'])


def replicate_frame(records: Sequence[ResultRecord]) -> pd.DataFrame:
    return pd.DataFrame([{c: getattr(r, c) for c in SCALAR_COLUMNS} for r in records], columns=SCALAR_COLUMNS)


def ratio_slopes(replicates: pd.DataFrame) -> Dict[str, Tuple[float, float]]:
    """Log-log fit of average MSE against rho/tau, per estimator, over ratio groups."""
    slopes = {}
    for estimator, group in replicates.groupby('estimator', sort=False):
        by_ratio = group.groupby('ratio')['avg_mse'].mean()
        try:
            slopes[estimator] = fit_log_slope(by_ratio.index.to_numpy(), by_ratio.to_numpy())
        except DegenerateFit as exc:
            logger.warning("No slope for %s: %s", estimator, exc)
    return slopes


def summary_frame(cfg: ExperimentConfig, replicates: pd.DataFrame,
                  slopes: Optional[Mapping[str, Tuple[float, float]]] = None) -> pd.DataFrame:
    rows = []
    for (point, estimator), group in replicates.groupby(['point', 'estimator'], sort=False):
        first = group.iloc[0]
        rows.append({
            'config_hash': cfg.config_hash,
            'scenario': cfg.scenario.value,
            'point': point,
            'estimator': estimator,
            'ratio': float(group['ratio'].mean()),
            'sigma_xi': float(first['sigma_xi']),
            'beta': float(first['beta']),
            'alpha': float(first['alpha']),
            'T': int(first['T']),
            'replicates': len(group),
            'avg_mse': float(group['avg_mse'].mean()),
            'sd_mse': float(group['avg_mse'].std(ddof=1)) if len(group) > 1 else 0.0,
            'total_iterations': int(group['iterations'].sum()),
            'wall_clock': float(group['wall_clock'].sum()),
            'slope': math.nan,
        })
    for estimator, (slope, _) in (slopes or {}).items():
        rows.append({
            'config_hash': cfg.config_hash, 'scenario': cfg.scenario.value, 'point': 'slope',
            'estimator': estimator, 'ratio': math.nan, 'sigma_xi': math.nan, 'beta': math.nan,
            'alpha': math.nan, 'T': 0, 'replicates': len(cfg.seeds), 'avg_mse': math.nan, 'sd_mse': math.nan,
            'total_iterations': 0, 'wall_clock': 0.0, 'slope': slope,
        })
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def build_frames(cfg: ExperimentConfig, records: Sequence[ResultRecord]) -> Dict[str, pd.DataFrame]:
    per_t = mse_frame(records)
    replicates = replicate_frame(records)
    slopes = ratio_slopes(replicates) if cfg.scenario is Scenario.RHO_TAU_SWEEP and records else {}
    frames = {
        'mse_by_t': per_t,
        'replicates': replicates,
        'summary': summary_frame(cfg, replicates, slopes),
    }
    frames.update(figure_data.build_figure_frames(cfg.scenario.value, per_t, replicates, slopes))
    return frames


def _slug(label: str) -> str:
    return re.sub(r'[^A-Za-z0-9.]+', '_', label).strip('_')


def contract_diagnostics(cfg: ExperimentConfig, point: GridPoint, seed: int,
                         anchors: Mapping[str, LambdaAnchor]) -> pd.DataFrame:
    """Per-t noise and bias diagnostics of DLR against the MSE bound shape.

    ``holds`` marks the times where lambda >= 2 * noise diagnostic; at those
    times the recorded MSE is expected below ``bound``.
    """
    data = prepare_data(cfg, point, seed)
    panel, truths = data.panel_for(EstimatorKind.DLR.value), data.truths
    h = resolve_bandwidth(cfg, panel)
    lam = resolve_lambda(cfg, panel, EstimatorKind.DLR.value, h, anchors)
    estimates = run_estimator(panel, EstimatorKind.DLR, h, cfg.kernel_spec, cfg.solver_config(lam)).estimates
    mse = mse_path(estimates, truths)
    rows = []
    for t in range(1, panel.T + 1):
        w = weights(t, panel.T, h, cfg.kernel_spec)
        noise = noise_diagnostic(panel, truths, w)
        bias = bias_diagnostic(truths, w, t)
        rows.append({
            'point': point.label, 'seed': seed, 't': t, 'lam': lam, 'noise': noise, 'bias': bias,
            'holds': bool(lam >= 2.0 * noise), 'mse': mse[t - 1],
            'bound': error_bound(bias, lam, nuclear_norm(truths[t - 1]), panel.family.mu, panel.dims),
        })
    return pd.DataFrame(rows)


def _run_jobs(cfg: ExperimentConfig, jobs: Sequence[Tuple[GridPoint, int]], anchors,
              replicate_dir: Path) -> Tuple[List[ResultRecord], Optional[ExperimentStageError]]:
    """Run every job; returns the records of finished jobs in job order and the first failure."""
    def job(point: GridPoint, seed: int) -> List[ResultRecord]:
        records = run_replicate(cfg, point, seed, anchors)
        with stage('report'):
            reports.write_frame(mse_frame(records), replicate_dir / f"{_slug(point.label)}_seed{seed}.csv")
        return records

    finished: List[List[ResultRecord]] = []
    failure = None
    workers = min(thread_cap(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(job, point, seed) for point, seed in jobs]
            for future in futures:
                try:
                    finished.append(future.result())
                except ExperimentStageError as exc:
                    failure = failure or exc
    else:
        for point, seed in jobs:
            try:
                finished.append(job(point, seed))
            except ExperimentStageError as exc:
                failure = exc
                break
    return [r for batch in finished for r in batch], failure


def run_experiment(cfg: ExperimentConfig) -> ExperimentOutcome:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / 'config.json').write_text(json.dumps({'config_hash': cfg.config_hash, 'config': cfg.to_dict()},
                                                indent=2, sort_keys=True))
    points = grid_points(cfg)
    jobs = [(point, seed) for point in points for seed in cfg.seeds]
    logger.info("Experiment %s (%s): %d grid points x %d seeds", cfg.scenario.value, cfg.config_hash[:12],
                len(points), len(cfg.seeds))

    records: List[ResultRecord] = []
    try:
        anchors = select_lambdas(cfg, points) if cfg.lam == 'cv' else {}
        records, failure = _run_jobs(cfg, jobs, anchors, out / 'replicates')
        if failure is not None:
            raise failure
        with stage('report'):
            frames = build_frames(cfg, records)
            if cfg.diagnostics and cfg.scenario is not Scenario.REAL_DATA:
                frames['diagnostics'] = pd.concat(
                    [contract_diagnostics(cfg, point, cfg.seeds[0], anchors) for point in points],
                    ignore_index=True,
                )
            paths = reports.write_frames(frames, out)
            paths['summary.xlsx'] = reports.write_summary_workbook(
                {name: frame for name, frame in frames.items() if name not in ('mse_by_t', 'replicates')},
                out / 'summary.xlsx',
            )
    except ExperimentStageError as exc:
        logger.error("Experiment failed in stage '%s'", exc.stage, exc_info=True)
        if records:
            try:
                reports.write_frames(build_frames(cfg, records), out, partial=True)
            except (DynrecError, OSError, ValueError):
                logger.error("Could not flush partial outputs", exc_info=True)
        raise
    return ExperimentOutcome(records=records, frames=frames, paths=paths)


@dataclass
class WarmStartComparison:
    T: int
    warm_iterations: int
    cold_iterations: int

    @property
    def ratio(self) -> float:
        return self.warm_iterations / self.cold_iterations if self.cold_iterations else math.nan


def compare_warm_cold(panel: Panel, h: float, kernel: KernelSpec, solver_cfg: SolverConfig) -> WarmStartComparison:
    """Total DLR iterations with and without warm starts at equal tolerance."""
    warm = run_estimator(panel, EstimatorKind.DLR, h, kernel, solver_cfg, warm_start=True)
    cold = run_estimator(panel, EstimatorKind.DLR, h, kernel, solver_cfg, warm_start=False)
    logger.info("T=%d: warm %d vs cold %d iterations", panel.T, warm.total_iterations, cold.total_iterations)
    return WarmStartComparison(panel.T, warm.total_iterations, cold.total_iterations)
