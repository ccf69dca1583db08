import logging

from django.core.management.base import BaseCommand, CommandError

from dynrec.exceptions import DynrecError
from dynrec.experiments import ExperimentConfig, Scenario, run_experiment
from dynrec.figure_data import frame_records
from dynrec.models import ExperimentRun

from ._options import command_errors

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Run a simulation or real-data experiment and register it"

    def add_arguments(self, parser):
        parser.add_argument('--config', help="Experiment configuration JSON file")
        parser.add_argument('--scenario', choices=[s.value for s in Scenario], default=None)
        parser.add_argument('--seeds', type=int, nargs='+', default=None)
        parser.add_argument('--T', type=int, default=None)
        parser.add_argument('--rho', type=float, default=None)
        parser.add_argument('--lambda', '--lam', dest='lam', default=None, help="'cv', 'theory' or a number")
        parser.add_argument('--data-path', default=None)
        parser.add_argument('--out', default=None, help="Output directory")

    def handle(self, *args, **options):
        lam = options['lam']
        if lam not in (None, 'cv', 'theory'):
            try:
                lam = float(lam)
            except ValueError:
                raise CommandError(f"--lam must be 'cv', 'theory' or a number, got {lam!r}")
        overrides = {
            'scenario': options['scenario'],
            'seeds': options['seeds'],
            'T': options['T'],
            'rho': options['rho'],
            'lam': lam,
            'data_path': options['data_path'],
            'output_dir': options['out'],
        }
        with command_errors():
            if options['config']:
                cfg = ExperimentConfig.from_json(options['config'], **overrides)
            else:
                cfg = ExperimentConfig.from_dict({}, **overrides)

        run = ExperimentRun.start(cfg.config_hash, cfg.scenario.value, cfg.to_dict(), cfg.output_dir)
        try:
            outcome = run_experiment(cfg)
        except DynrecError as exc:
            run.fail(str(exc))
            raise CommandError(str(exc)) from exc
        except Exception as exc:
            logger.exception("Run %s failed", run.id)
            run.fail(str(exc) or type(exc).__name__)
            raise
        run.complete(frame_records(outcome.frames['summary']))

        for row in run.summary:
            if row['point'] == 'slope':
                self.stdout.write(f"{row['estimator']}: log-log slope {row['slope']:.4f}")
            else:
                avg = 'n/a' if row['avg_mse'] is None else f"{row['avg_mse']:.6g}"
                self.stdout.write(f"{row['point']} {row['estimator']}: avg MSE {avg}")
        self.stdout.write(self.style.SUCCESS(f"Run {run.id} ({cfg.config_hash[:12]}) -> {cfg.output_dir}"))
