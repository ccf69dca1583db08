from django.core.management.base import BaseCommand

from dynrec.ingest import IngestFilters, ingest_triplets
from dynrec.panel_io import write_panel
from dynrec.reports import write_frame

from ._options import add_output_argument, command_errors, output_dir


class Command(BaseCommand):
    help = "Bin timestamped rating triplets into train and test panels"

    def add_arguments(self, parser):
        parser.add_argument('csv', help="CSV with header timestamp,row,col,value")
        parser.add_argument('--T', type=int, required=True, help="Number of chronological bins")
        parser.add_argument('--split', type=float, default=0.8, help="Training fraction per bin")
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--min-col-count', type=int, default=None,
                            help="Drop columns (items) with fewer ratings")
        parser.add_argument('--min-row-count', type=int, default=None,
                            help="Drop rows (users) with fewer ratings")
        parser.add_argument('--max-rows', type=int, default=None, help="Random subsample of rows (users)")
        add_output_argument(parser, 'ingest')

    def handle(self, *args, **options):
        filters = IngestFilters(options['min_col_count'], options['min_row_count'], options['max_rows'])
        with command_errors():
            result = ingest_triplets(options['csv'], options['T'], split=options['split'], seed=options['seed'],
                                     filters=filters)
            out = output_dir(options, 'ingest')
            write_panel(result.train, out / 'train')
            write_panel(result.test, out / 'test')
            write_frame(result.id_map(), out / 'id_map.csv')
        m1, m2 = result.train.dims
        self.stdout.write(self.style.SUCCESS(
            f"{sum(result.train.batch_sizes)} train / {sum(result.test.batch_sizes)} test observations "
            f"over {m1}x{m2}, T={result.train.T} -> {out}"
        ))
