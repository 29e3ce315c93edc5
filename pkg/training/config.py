"""
Training configuration.

Config files are flat key=value text, one pair per line, '#' starts a
comment. A value with commas is a grid axis (only the grid command accepts
those). Every key can be overridden by the environment as SESSREC_<KEY>;
explicit command-line values override both.
"""
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from django.conf import settings

from core.exceptions import FlagError, StorageError
from recommender.hyperparams import HyperParams
from .forms import HYPERPARAM_KEYS, TRAIN_KEYS, TrainConfigForm, form_errors

logger = logging.getLogger(__name__)

# Initial search ranges for d, n and b.
INITIAL_GRID = {
    'd': ['32', '64', '128'],
    'n': ['10', '15', '20'],
    'b': ['1', '2', '4'],
}


@dataclass
class TrainConfig:
    hp: HyperParams
    shuffle_seed: int = 0
    checkpoint_path: str = None
    log_every: int = 100
    grid: dict = field(default_factory=dict)
    validate: bool = False
    threads: int = 1


def read_config_file(path):
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as exc:
        raise StorageError(f"cannot read config {path}: {exc}") from exc

    values = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise FlagError(f"{path}:{line_number}: expected key=value, got '{line}'")
        key, value = (part.strip() for part in line.split('=', 1))
        key = key.lower().replace('-', '_')
        if key not in TRAIN_KEYS:
            raise FlagError(f"{path}:{line_number}: unknown config key '{key}'")
        values[key] = value
    return values


def environment_overrides(keys=TRAIN_KEYS, environ=None):
    environ = os.environ if environ is None else environ
    prefix = settings.SESSREC['ENV_PREFIX']
    found = {}
    for key in keys:
        name = f"{prefix}{key.upper()}"
        if name in environ:
            found[key] = environ[name]
    return found


def split_grid(values):
    """Separate comma-valued hyperparameters (grid axes) from single values."""
    single, grid = {}, {}
    for key, value in values.items():
        if isinstance(value, str) and ',' in value:
            if key not in HYPERPARAM_KEYS:
                raise FlagError(f"'{key}' cannot take a list of values")
            grid[key] = [part.strip() for part in value.split(',') if part.strip()]
        else:
            single[key] = value
    return single, grid


def build_train_config(path=None, overrides=None, environ=None, allow_grid=False):
    values = read_config_file(path) if path else {}
    values.update(environment_overrides(environ=environ))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})

    single, grid = split_grid(values)
    if grid and not allow_grid:
        raise FlagError(f"list values are only accepted by the grid command ({', '.join(grid)})")

    form = TrainConfigForm(single)
    if not form.is_valid():
        raise FlagError(f"invalid configuration: {form_errors(form)}")
    cleaned = form.cleaned_data

    hp = form.hyperparams()
    config = TrainConfig(
        hp=hp,
        shuffle_seed=hp.seed if cleaned.get('shuffle_seed') is None else cleaned['shuffle_seed'],
        checkpoint_path=cleaned.get('checkpoint_path') or None,
        log_every=cleaned.get('log_every') or 100,
        grid=grid,
        validate=bool(cleaned.get('validate')),
        threads=cleaned.get('threads') or settings.SESSREC['THREADS'],
    )
    logger.debug(f"Resolved training config: {config}")
    return config
