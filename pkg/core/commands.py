"""
Shared base for the sessrec management commands.

Subclasses implement run(**options). Any SessrecError escaping run() becomes
a CommandError carrying the error's exit code; plain ValueErrors and form
validation failures are treated as bad flags.
"""
import logging

from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from corpus.storage import load_corpus
from recommender.checkpoint import load_checkpoint
from recommender.hyperparams import HyperParams, parse_variant
from .exceptions import FlagError, FormatError, SessrecError
from .validators import validate_cutoffs

logger = logging.getLogger(__name__)

VARIANT_CHOICES = ('o', 'p', 'op', 'last', 'oracle', 'mean', 'pop')
SCALE_CHOICES = {'full-d': 'full_d', 'per-head': 'per_head'}


def positive_int(value):
    number = int(value)
    if number < 1:
        raise ValueError(f"{value} is not a positive integer")
    return number


class SessrecCommand(BaseCommand):
    requires_system_checks = []

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except SessrecError as exc:
            logger.error(f"{self.command_name()} failed: {exc}")
            raise CommandError(str(exc), returncode=exc.exit_code) from exc
        except ValidationError as exc:
            raise CommandError('; '.join(exc.messages), returncode=FlagError.exit_code) from exc
        except ValueError as exc:
            raise CommandError(str(exc), returncode=FlagError.exit_code) from exc

    def run(self, **options):
        raise NotImplementedError('subclasses of SessrecCommand must provide a run() method')

    def command_name(self):
        return self.__module__.rsplit('.', 1)[-1]

    # Flag groups

    def add_model_arguments(self, parser, variant_required=False):
        parser.add_argument('--variant', choices=VARIANT_CHOICES, required=variant_required,
                            help='Model variant: o, p, op, last, oracle, mean or pop.')
        parser.add_argument('--seed', type=int, help='Seed for initialisation and shuffling.')
        parser.add_argument('--no-pad-mask', dest='use_pad_mask', action='store_const', const=False,
                            default=None, help='Let padding slots take part in attention.')
        parser.add_argument('--no-position-embeddings', dest='use_position_embeddings',
                            action='store_const', const=False, default=None,
                            help='Drop the position embeddings.')
        parser.add_argument('--scale', choices=tuple(SCALE_CHOICES),
                            help='Attention scaling for the prospective heads.')

    def add_corpus_argument(self, parser, required=True):
        parser.add_argument('--corpus', required=required, help='Prepared corpus directory.')

    def add_checkpoint_argument(self, parser, required=False):
        parser.add_argument('--checkpoint', required=required, help='Model checkpoint file.')

    def add_cutoff_argument(self, parser):
        parser.add_argument('--k', default=settings.SESSREC['DEFAULT_CUTOFFS'],
                            help='Comma-separated ranking cutoffs (default 5,10,20).')

    def add_threads_argument(self, parser):
        parser.add_argument('--threads', type=positive_int, default=settings.SESSREC['THREADS'],
                            help='Worker cap (default: machine parallelism).')

    def add_out_argument(self, parser, required=True):
        parser.add_argument('--out', required=required, help='Output path.')

    # Resolution helpers

    def model_overrides(self, options):
        """Hyperparameters given explicitly on the command line, as form-ready values."""
        overrides = {
            'variant': options.get('variant'),
            'seed': options.get('seed'),
            'use_pad_mask': options.get('use_pad_mask'),
            'use_position_embeddings': options.get('use_position_embeddings'),
            'attention_scale_mode': SCALE_CHOICES.get(options.get('scale')),
            'n': options.get('n'),
        }
        return {key: value for key, value in overrides.items() if value is not None}

    def cutoffs(self, options):
        return tuple(validate_cutoffs(options['k']))

    def corpus(self, options):
        if not options.get('corpus'):
            raise FlagError('--corpus is required')
        return load_corpus(options['corpus'], threads=options.get('threads') or 1)

    def model(self, options, corpus=None):
        """
        (params, hp) for the requested model. Stateless POP needs no
        checkpoint; everything else reads one, and explicit flags must agree
        with the header it was trained under.
        """
        overrides = self.model_overrides(options)
        if 'variant' in overrides:
            overrides['variant'] = parse_variant(overrides['variant'])

        if not options.get('checkpoint'):
            if overrides.get('variant') == 'POP':
                return None, HyperParams(**overrides)
            raise FlagError('--checkpoint is required for learned variants')

        params, header = load_checkpoint(options['checkpoint'])
        recorded = header.model_fields()
        for key, value in overrides.items():
            if key in recorded and recorded[key] != value:
                raise FormatError(
                    f"checkpoint {options['checkpoint']} was trained with {key}={recorded[key]}, "
                    f"but {key}={value} was requested"
                )
        if corpus is not None and corpus.m != header.m:
            raise FormatError(
                f"checkpoint covers {header.m} items but corpus {options.get('corpus')} has {corpus.m}"
            )
        hp = HyperParams(**recorded, seed=overrides.get('seed', 0))
        return params, hp

    def record(self, description, write):
        """Persist a registry row; failures are logged, never fatal."""
        if not settings.SESSREC['RECORD_RUNS']:
            return None
        try:
            return write()
        except DatabaseError:
            logger.exception(f"Could not record {description} in the run registry")
            return None
