from django.core.exceptions import ValidationError
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from .commands import SessrecCommand
from .exceptions import EmptyCorpusError, FlagError, FormatError, NumericalError, ShapeError, StorageError
from .validators import parse_int_list, validate_cutoffs, validate_fraction


class ExitCodeTests(SimpleTestCase):

    def test_codes(self):
        self.assertEqual(FlagError.exit_code, 2)
        self.assertEqual(StorageError.exit_code, 3)
        self.assertEqual(FormatError.exit_code, 4)
        self.assertEqual(ShapeError.exit_code, 4)
        self.assertEqual(EmptyCorpusError.exit_code, 4)
        self.assertEqual(NumericalError.exit_code, 5)


class RaisingCommand(SessrecCommand):

    def __init__(self, error):
        super().__init__()
        self.error = error

    def run(self, **options):
        raise self.error


class CommandBaseTests(SimpleTestCase):

    def returncode(self, error):
        with self.assertRaises(CommandError) as caught:
            RaisingCommand(error).handle()
        return caught.exception.returncode

    def test_domain_errors_keep_their_exit_code(self):
        self.assertEqual(self.returncode(StorageError('disk')), 3)
        self.assertEqual(self.returncode(ShapeError('shape')), 4)
        self.assertEqual(self.returncode(NumericalError('nan')), 5)

    def test_plain_value_errors_are_bad_flags(self):
        self.assertEqual(self.returncode(ValueError('n must be positive')), 2)
        self.assertEqual(self.returncode(ValidationError('bad cutoff')), 2)

    def test_explicit_flags_only(self):
        overrides = SessrecCommand().model_overrides({'variant': 'op', 'seed': None, 'scale': 'per-head',
                                                      'use_pad_mask': False})
        self.assertEqual(overrides, {'variant': 'op', 'attention_scale_mode': 'per_head', 'use_pad_mask': False})


class ValidatorTests(SimpleTestCase):

    def test_int_list(self):
        self.assertEqual(parse_int_list('5, 10,20'), [5, 10, 20])
        with self.assertRaises(ValidationError):
            parse_int_list('5,,10')

    def test_cutoffs_increase(self):
        self.assertEqual(validate_cutoffs('1,5'), [1, 5])
        for value in ('5,5', '0,5', 'a'):
            with self.subTest(value=value), self.assertRaises(ValidationError):
                validate_cutoffs(value)

    def test_fraction(self):
        validate_fraction(0.2)
        with self.assertRaises(ValidationError):
            validate_fraction(1.0)
