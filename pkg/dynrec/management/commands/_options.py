"""
Option parsing shared by the dynrec management commands.
"""
import argparse
from contextlib import contextmanager
from pathlib import Path

import pandas as pd
from django.core.management.base import CommandError

from dynrec.conf import dynrec_setting
from dynrec.estimators import (
    CvPlan,
    CvResult,
    EstimatorKind,
    penalty_anchor,
    select_lambda,
    theory_lambda,
)
from dynrec.exceptions import DynrecError
from dynrec.kernelband import (
    BandwidthPlan,
    KernelSpec,
    plug_in_bandwidth,
    summarize_panel,
    theory_bandwidth_constant,
)
from dynrec.solver import GradientMode, SolverConfig


def number_or(keyword):
    """argparse type accepting a float or the literal ``keyword``."""
    def parse(value):
        if value == keyword:
            return value
        try:
            return float(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number or '{keyword}', got {value!r}")
    parse.__name__ = f'number_or_{keyword}'
    return parse


def add_output_argument(parser, default_name):
    parser.add_argument('--out', type=Path, default=None,
                        help=f"Output directory (default: <OUTPUT_ROOT>/{default_name})")


def output_dir(options, default_name) -> Path:
    out = Path(options['out']) if options['out'] else Path(dynrec_setting('OUTPUT_ROOT')) / default_name
    out.mkdir(parents=True, exist_ok=True)
    return out


def add_solver_arguments(parser, lam_required=False, allow_cv=False):
    if allow_cv:
        parser.add_argument('--lambda', '--lam', dest='lam', type=number_or('cv'), default=0.0,
                            help="Nuclear-norm penalty lambda, or 'cv' to select it by cross-validation")
    else:
        parser.add_argument('--lam', type=float, required=lam_required, default=None if lam_required else 0.0,
                            help="Nuclear-norm penalty lambda")
    parser.add_argument('--max-iters', type=int, default=None)
    parser.add_argument('--tol', type=float, default=None)
    parser.add_argument('--gradient-mode', choices=[m.value for m in GradientMode], default=None)


def solver_config(options, lam=None) -> SolverConfig:
    overrides = {'lam': options['lam'] if lam is None else lam}
    if options['max_iters'] is not None:
        overrides['max_iters'] = options['max_iters']
    if options['tol'] is not None:
        overrides['tol'] = options['tol']
    if options['gradient_mode']:
        overrides['gradient_mode'] = GradientMode(options['gradient_mode'])
    return SolverConfig.from_settings(**overrides)


def add_kernel_arguments(parser):
    parser.add_argument('--kernel', default=None, help="epanechnikov, uniform, triangular or degenerate")
    parser.add_argument('--bandwidth', type=number_or('auto'), default='auto',
                        help="Bandwidth, or 'auto' for the plug-in rule")
    parser.add_argument('--ch', type=number_or('auto'), default=None,
                        help="Plug-in constant C_h, or 'auto' for the theoretical constant")
    parser.add_argument('--rank-guess', type=int, default=1)


def add_cv_arguments(parser):
    parser.add_argument('--folds', type=int, default=None)
    parser.add_argument('--split-seed', type=int, default=0)
    parser.add_argument('--extensions', type=int, default=None,
                        help="Grid extensions allowed past an edge optimum (default: CV_EXTENSIONS)")
    parser.add_argument('--refine', type=int, default=None,
                        help="Size of a finer grid around the optimum, 0 = off (default: CV_REFINE)")


def cv_plan(options, grid) -> CvPlan:
    return CvPlan(tuple(grid), options['folds'] or dynrec_setting('CV_FOLDS'), options['split_seed'])


def typical_batch(panel) -> int:
    return max(1, round(sum(panel.batch_sizes) / panel.T))


def lambda_anchor(panel, kind: EstimatorKind, h: float) -> float:
    """Solver-scale theoretical lambda, the centre of the default CV grid."""
    solve_h = h if kind is EstimatorKind.DLR else 0.0
    value = theory_lambda(panel.family, typical_batch(panel), panel.T, solve_h,
                          summarize_panel(panel).plug_in_scale, dynrec_setting('C1'))
    return penalty_anchor(value)


def run_cv(options, panel, kind: EstimatorKind, h: float, kernel: KernelSpec, grid) -> CvResult:
    return select_lambda(panel, kind, h, kernel, cv_plan(options, grid), solver_config(options, lam=0.0),
                         max_extensions=options['extensions'], refine=options['refine'])


def score_frame(result: CvResult) -> pd.DataFrame:
    return pd.DataFrame(result.scores, columns=['lambda', 'score'])


def kernel_spec(options) -> KernelSpec:
    return KernelSpec.from_name(options['kernel'] or dynrec_setting('KERNEL'))


def bandwidth(options, panel, kernel: KernelSpec) -> float:
    if options['bandwidth'] != 'auto':
        return float(options['bandwidth'])
    summary = summarize_panel(panel)
    c_h = options['ch'] if options['ch'] is not None else dynrec_setting('C_H')
    if c_h == 'auto':
        c_h = theory_bandwidth_constant(kernel, summary.plug_in_d2, dynrec_setting('C1'))
    n = typical_batch(panel)
    plan = BandwidthPlan(c_h=float(c_h), rank_guess=options['rank_guess'])
    return plug_in_bandwidth(summary, panel.dims, n, panel.T, plan,
                             design_kind=panel.family.kind.value, sigma_x=panel.family.sigma_x)


@contextmanager
def command_errors():
    """Report library errors as ``CommandError``."""
    try:
        yield
    except DynrecError as exc:
        raise CommandError(str(exc)) from exc
