"""
Management Command: sweep
=========================
Retrain one variant for each window length n and report test recall@20.
"""
from core.commands import SessrecCommand, positive_int
from core.validators import parse_int_list
from evaluation.reports import sweep_frame, write_table
from training.config import build_train_config
from training.grid import sweep_n


class Command(SessrecCommand):
    help = "Parameter study over n: train and evaluate once per window length."

    def add_arguments(self, parser):
        parser.add_argument('--config', help='key=value training config file.')
        parser.add_argument('--n-values', default='1,2,3,5,10,15,20',
                            help='Comma-separated window lengths.')
        parser.add_argument('--epochs', type=positive_int)
        parser.add_argument('--lr', type=float)
        self.add_model_arguments(parser)
        self.add_corpus_argument(parser)
        self.add_threads_argument(parser)
        self.add_out_argument(parser)

    def run(self, **options):
        n_values = parse_int_list(options['n_values'], 'n-values')
        if any(n < 1 for n in n_values):
            raise ValueError('every n must be at least 1')
        overrides = self.model_overrides(options)
        for key in ('epochs', 'lr'):
            if options.get(key) is not None:
                overrides[key] = options[key]
        overrides['threads'] = options['threads']
        config = build_train_config(options.get('config'), overrides)
        corpus = self.corpus(options)

        rows = sweep_n(corpus, config, n_values)
        write_table(sweep_frame(rows), options['out'])
        best = max(rows, key=lambda row: row[1])
        self.stdout.write(self.style.SUCCESS(f"Best n={best[0]} with recall@20 {best[1]:.4f}"))
