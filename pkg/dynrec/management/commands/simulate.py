import json

import numpy as np
from django.core.management.base import BaseCommand

from dynrec.conf import dynrec_setting
from dynrec.designs import DesignFamily, DesignKind
from dynrec.matrix_io import write_stacked_dmr1
from dynrec.panel_io import write_panel
from dynrec.synthgen import DependentDesignSpec, GroundTruthPath, NoiseKind, NoiseSpec, build_panel

from ._options import add_output_argument, command_errors, output_dir


class Command(BaseCommand):
    help = "Simulate a panel from the smooth low-rank ground-truth path"

    def add_arguments(self, parser):
        parser.add_argument('--dims', type=int, nargs=2, metavar=('M1', 'M2'), default=None)
        parser.add_argument('--rank', type=int, default=None)
        parser.add_argument('--T', type=int, default=None)
        size = parser.add_mutually_exclusive_group()
        size.add_argument('--rho', type=float, help="Observation rate n / (m1 m2)")
        size.add_argument('--n', type=int, help="Observations per time point")
        parser.add_argument('--design', choices=[k.value for k in DesignKind], default='completion')
        parser.add_argument('--sigma-x', type=float, default=1.0)
        parser.add_argument('--sigma-xi', type=float, default=1.0)
        parser.add_argument('--beta', type=float, default=0.0, help="AR(1) coefficient of the noise field")
        parser.add_argument('--alpha', type=float, default=0.0, help="Fraction of designs carried over")
        parser.add_argument('--seed', type=int, default=0)
        add_output_argument(parser, 'panel')

    def handle(self, *args, **options):
        dims = tuple(options['dims'] or dynrec_setting('DESK_DIMS'))
        rank = options['rank'] or dynrec_setting('DESK_RANK')
        T = options['T'] or dynrec_setting('DESK_T')
        seed = options['seed']
        rho = options['rho'] if options['rho'] is not None or options['n'] is not None else 0.2
        with command_errors():
            family = DesignFamily(DesignKind(options['design']), dims, options['sigma_x'])
            noise_kind = NoiseKind.PHI_MIXING_AR if options['beta'] > 0 else NoiseKind.IID
            noise = NoiseSpec(noise_kind, options['sigma_xi'], options['beta'], seed + 1)
            dep = DependentDesignSpec(options['alpha'], family, seed + 2) if options['alpha'] > 0 else None
            path = GroundTruthPath(dims, rank, seed)
            panel, truths = build_panel(path, family, rho=rho, n=options['n'], noise=noise, dep=dep, T=T, seed=seed)
            out = output_dir(options, 'panel')
            write_panel(panel, out)
            write_stacked_dmr1(out / 'truth.dmr1', np.stack(truths))
            (out / 'simulation.json').write_text(json.dumps({
                'dims': list(dims), 'rank': rank, 'T': T, 'rho': rho, 'n': options['n'],
                'design': family.kind.value, 'sigma_x': family.sigma_x, 'sigma_xi': noise.sigma_xi,
                'beta': noise.beta, 'alpha': options['alpha'], 'seed': seed,
                'truth_seed': path.seed, 'sample_seed': seed, 'noise_seed': noise.seed,
                'carry_seed': seed + 2,
            }, indent=2))
        self.stdout.write(self.style.SUCCESS(
            f"Simulated {family.kind.value} panel {dims[0]}x{dims[1]}, T={T}, "
            f"n={panel.batch_sizes[0]} per time -> {out}"
        ))
