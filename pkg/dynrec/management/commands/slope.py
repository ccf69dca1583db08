import json

from django.core.management.base import BaseCommand, CommandError

from dynrec.metrics import fit_log_slope
from dynrec.reports import read_frame

from ._options import command_errors


class Command(BaseCommand):
    help = "Fit a log-log slope to two columns of a results CSV"

    def add_arguments(self, parser):
        parser.add_argument('csv', help="Results CSV, e.g. replicates.csv of an experiment run")
        parser.add_argument('--x', default='ratio')
        parser.add_argument('--y', default='avg_mse')
        parser.add_argument('--estimator', default=None, help="Keep only rows of this estimator")

    def handle(self, *args, **options):
        frame = read_frame(options['csv'])
        for column in (options['x'], options['y']):
            if column not in frame.columns:
                raise CommandError(f"column {column!r} not in {options['csv']}")
        if options['estimator']:
            if 'estimator' not in frame.columns:
                raise CommandError("no estimator column to filter on")
            frame = frame[frame['estimator'] == options['estimator']]
        # Replicates sharing an x value are averaged first.
        grouped = frame.dropna(subset=[options['x'], options['y']]).groupby(options['x'])[options['y']].mean()
        with command_errors():
            slope, intercept = fit_log_slope(grouped.index.to_numpy(), grouped.to_numpy())
        self.stdout.write(json.dumps({'slope': slope, 'intercept': intercept, 'points': len(grouped)}))
