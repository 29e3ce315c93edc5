"""
Management Command: grid
========================
Grid search over list-valued hyperparameters. Each point trains on the
first 80% of the training sessions and is scored by recall@20 on the rest.
"""
import itertools

from core.commands import SessrecCommand
from core.exceptions import FlagError
from evaluation.reports import grid_frame, write_table
from training.config import INITIAL_GRID, build_train_config
from training.grid import grid_search
from training.models import GridPoint, GridSearch

AXIS_FLAGS = ('d', 'n', 'b', 'lr', 'batch_size', 'epochs')


class Command(SessrecCommand):
    help = "Grid-search hyperparameters on a validation split and report the best point."

    def add_arguments(self, parser):
        parser.add_argument('--config', help='key=value config; comma-separated values become grid axes.')
        parser.add_argument('--preset', choices=('initial',),
                            help='Fill missing d, n and b axes with the initial ranges 32,64,128 / 10,15,20 / 1,2,4.')
        for name in AXIS_FLAGS:
            parser.add_argument(f"--{name.replace('_', '-')}", dest=name,
                                help=f'Value or comma-separated values for {name}.')
        self.add_model_arguments(parser)
        self.add_corpus_argument(parser)
        self.add_threads_argument(parser)
        self.add_out_argument(parser)

    def run(self, **options):
        overrides = self.model_overrides(options)
        for name in AXIS_FLAGS:
            if options.get(name) is not None:
                overrides[name] = options[name]
        if options.get('preset') == 'initial':
            for name, values in INITIAL_GRID.items():
                overrides.setdefault(name, ','.join(values))
        overrides['threads'] = options['threads']

        config = build_train_config(options.get('config'), overrides, allow_grid=True)
        if not config.grid:
            raise FlagError('no grid axes given: use comma-separated values or --preset initial')
        corpus = self.corpus(options)

        search = self.record('grid search', lambda: GridSearch.objects.create(
            corpus_path=str(options['corpus']), axes=config.grid,
        ))
        positions = itertools.count(1)

        def on_point(point):
            self.stdout.write(f"{point.values}: " + (f"{point.recall:.4f}" if point.ok else f"failed ({point.error})"))
            if search is not None:
                position = next(positions)
                self.record('grid point', lambda: GridPoint.objects.create(
                    search=search,
                    position=position,
                    values=point.values,
                    validation_recall=point.recall,
                    status='completed' if point.ok else 'failed',
                    error=point.error,
                ))

        result = grid_search(corpus, config, on_point=on_point)
        write_table(grid_frame(result), options['out'])

        if search is not None:
            search.best_hyperparams = result.best_hp.as_dict()
            search.best_recall = result.best.recall
            search.warnings = result.warnings
            self.record('grid result', lambda: search.save())

        for warning in result.warnings:
            self.stdout.write(self.style.WARNING(warning))
        self.stdout.write(self.style.SUCCESS(
            f"Best point {result.best.values} with validation recall@20 {result.best.recall:.4f}"
        ))
