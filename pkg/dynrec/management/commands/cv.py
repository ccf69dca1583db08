from django.core.management.base import BaseCommand

from dynrec.estimators import EstimatorKind, default_grid
from dynrec.panel_io import read_panel
from dynrec.reports import write_frame

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
)


class Command(BaseCommand):
    help = "Select lambda by K-fold cross-validation on a panel"

    def add_arguments(self, parser):
        parser.add_argument('panel', help="Panel directory")
        parser.add_argument('--estimator', choices=[k.value for k in EstimatorKind], default='dlr')
        parser.add_argument('--grid', type=float, nargs='+', default=None,
                            help="Lambda values (default: log grid around the theoretical lambda)")
        add_cv_arguments(parser)
        add_solver_arguments(parser)
        add_kernel_arguments(parser)
        add_output_argument(parser, 'cv')

    def handle(self, *args, **options):
        with command_errors():
            panel = read_panel(options['panel'])
            kernel = kernel_spec(options)
            h = bandwidth(options, panel, kernel)
            kind = EstimatorKind(options['estimator'])
            grid = options['grid']
            if not grid:
                anchor = lambda_anchor(panel, kind, h)
                grid = default_grid(anchor)
                self.stdout.write(f"Theoretical lambda {anchor:.4g} on the solver scale")
            result = run_cv(options, panel, kind, h, kernel, grid)
            out = output_dir(options, 'cv')
            write_frame(score_frame(result), out / 'cv_scores.csv')
        self.stdout.write(self.style.SUCCESS(
            f"lambda* = {result.lambda_star:.6g} (h={h:.4g}, {len(result.scores)} values) -> {out}"
        ))
