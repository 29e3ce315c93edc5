"""
Management Command: train
=========================
Train one model variant on a prepared corpus and write its checkpoint.

Settings come from --config, then SESSREC_<KEY> environment variables, then
explicit flags, each overriding the previous.

The epoch log (epoch, loss) is byte-identical for a fixed seed; wall-clock
time only reaches the summary line and the run registry.
"""
from pathlib import Path

import pandas as pd

from core.commands import SessrecCommand, positive_int
from core.exceptions import FlagError, SessrecError
from evaluation.reports import write_table
from training.config import build_train_config
from training.models import TrainingRun
from training.trainer import train


class Command(SessrecCommand):
    help = "Train a model variant and save its checkpoint."

    def add_arguments(self, parser):
        parser.add_argument('--config', help='key=value training config file.')
        self.add_model_arguments(parser)
        self.add_corpus_argument(parser)
        self.add_checkpoint_argument(parser)
        parser.add_argument('--epochs', type=positive_int)
        parser.add_argument('--lr', type=float)
        parser.add_argument('--batch-size', type=positive_int)
        parser.add_argument('--d', type=positive_int)
        parser.add_argument('--n', type=positive_int)
        parser.add_argument('--b', type=positive_int)
        parser.add_argument('--log-every', type=positive_int)
        parser.add_argument('--validate', action='store_const', const=True, default=None,
                            help='Hold out the last 20%% of training sessions and keep the best epoch as <checkpoint>.best.')
        self.add_threads_argument(parser)
        self.add_out_argument(parser, required=False)

    def overrides(self, options):
        values = self.model_overrides(options)
        for key in ('epochs', 'lr', 'batch_size', 'd', 'n', 'b', 'log_every', 'validate'):
            if options.get(key) is not None:
                values[key] = options[key]
        if options.get('checkpoint'):
            values['checkpoint_path'] = options['checkpoint']
        values['threads'] = options['threads']
        return values

    def run(self, **options):
        config = build_train_config(options.get('config'), self.overrides(options))
        if not config.checkpoint_path:
            raise FlagError('--checkpoint (or checkpoint_path in the config) is required')
        corpus = self.corpus(options)

        run = self.record('training run', lambda: TrainingRun.objects.create(
            variant=config.hp.variant,
            hyperparams=config.hp.as_dict(),
            seed=config.hp.seed,
            corpus_path=str(options['corpus']),
            checkpoint_path=config.checkpoint_path,
        ))
        try:
            report = train(corpus, config)
        except SessrecError as exc:
            if run is not None:
                self.record('training failure', lambda: run.fail(exc))
            raise

        if run is not None:
            self.record('training result', lambda: run.finish(report))

        log = pd.DataFrame({
            'epoch': range(1, report.epochs + 1),
            'loss': report.epoch_losses,
        })
        if options.get('out'):
            write_table(log, Path(options['out']))
        else:
            self.stdout.write(log.to_csv(sep='\t', index=False, float_format='%.6f', lineterminator='\n'), ending='')

        summary = (
            f"Trained {config.hp.variant} for {report.epochs} epochs, "
            f"final loss {report.epoch_losses[-1]:.6f} in {sum(report.epoch_seconds):.1f}s"
        )
        if report.best_validation_recall is not None:
            summary += f", best validation recall@20 {report.best_validation_recall:.4f} (epoch {report.best_epoch})"
        self.stdout.write(self.style.SUCCESS(f"{summary}; checkpoint {config.checkpoint_path}"))
