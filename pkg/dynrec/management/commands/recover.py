import numpy as np
import pandas as pd
from django.core.management.base import BaseCommand

from dynrec.estimators import EstimatorKind, default_grid, run_estimator
from dynrec.experiments import compare_warm_cold
from dynrec.matrix_io import read_stacked_dmr1, write_stacked_dmr1
from dynrec.metrics import mse_path
from dynrec.panel_io import read_panel
from dynrec.reports import trace_frame, write_frame

from ._options import (
    add_cv_arguments,
    add_kernel_arguments,
    add_output_argument,
    add_solver_arguments,
    bandwidth,
    command_errors,
    kernel_spec,
    lambda_anchor,
    output_dir,
    run_cv,
    score_frame,
    solver_config,
)


class Command(BaseCommand):
    help = "Recover the matrix path of a panel with DLR, Static or TwoStep"

    def add_arguments(self, parser):
        parser.add_argument('panel', help="Panel directory (see simulate / ingest)")
        parser.add_argument('--estimator', choices=[k.value for k in EstimatorKind], default='dlr')
        add_solver_arguments(parser, allow_cv=True)
        add_cv_arguments(parser)
        add_kernel_arguments(parser)
        parser.add_argument('--truth', default=None, help="Stacked DMR1 truth file for per-t MSE")
        parser.add_argument('--cold-start', action='store_true', help="Seed every time point independently")
        parser.add_argument('--compare-warm-start', action='store_true',
                            help="Also report total iterations with and without warm starts")
        add_output_argument(parser, 'recovery')

    def handle(self, *args, **options):
        with command_errors():
            panel = read_panel(options['panel'])
            kernel = kernel_spec(options)
            h = bandwidth(options, panel, kernel)
            kind = EstimatorKind(options['estimator'])
            out = output_dir(options, 'recovery')
            lam = options['lam']
            if lam == 'cv':
                selection = run_cv(options, panel, kind, h, kernel, default_grid(lambda_anchor(panel, kind, h)))
                write_frame(score_frame(selection), out / 'cv_scores.csv')
                lam = selection.lambda_star
                self.stdout.write(f"CV lambda* = {lam:.6g} from {len(selection.scores)} values")
            cfg = solver_config(options, lam=lam)
            result = run_estimator(panel, kind, h, kernel, cfg, warm_start=not options['cold_start'])
            write_stacked_dmr1(out / 'estimates.dmr1', np.stack(result.estimates))
            write_frame(trace_frame(result.traces), out / 'traces.csv')
            if options['truth']:
                truths = list(read_stacked_dmr1(options['truth'], panel.dims[0]))
                mse = mse_path(result.estimates, truths)
                write_frame(pd.DataFrame({'t': range(1, panel.T + 1), 'estimator': kind.value, 'mse': mse}),
                            out / 'mse_by_t.csv')
                self.stdout.write(f"Average MSE: {np.mean(mse):.6g}")
            if options['compare_warm_start']:
                comparison = compare_warm_cold(panel, h, kernel, cfg)
                self.stdout.write(
                    f"Total iterations: warm {comparison.warm_iterations}, cold {comparison.cold_iterations} "
                    f"(ratio {comparison.ratio:.3f})"
                )
        self.stdout.write(self.style.SUCCESS(
            f"{kind.value}: h={h:.4g}, lambda={cfg.lam:.4g}, {result.total_iterations} iterations -> {out}"
        ))
