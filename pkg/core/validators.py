from django.core.exceptions import ValidationError


def parse_int_list(value, name='value'):
    """'5,10,20' -> [5, 10, 20]; rejects blanks and non-integers."""
    parts = [part.strip() for part in str(value).split(',')]
    if not parts or any(part == '' for part in parts):
        raise ValidationError(f"{name}: expected a comma-separated list of integers", code='invalid_list')
    try:
        return [int(part) for part in parts]
    except ValueError:
        raise ValidationError(f"{name}: '{value}' is not a list of integers", code='invalid_list')


def validate_cutoffs(value):
    """Ranking cutoffs: positive, strictly increasing integers."""
    cutoffs = parse_int_list(value, 'cutoffs')
    if any(k < 1 for k in cutoffs):
        raise ValidationError('cutoffs must be positive', code='invalid_cutoff')
    if any(a >= b for a, b in zip(cutoffs, cutoffs[1:])):
        raise ValidationError('cutoffs must be strictly increasing', code='invalid_cutoff')
    return cutoffs


def validate_fraction(value):
    if not 0 < value < 1:
        raise ValidationError('fraction must lie strictly between 0 and 1', code='invalid_fraction')
