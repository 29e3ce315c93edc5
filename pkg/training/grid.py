"""
Grid search and the parameter study over the window length n.

Every grid point is trained on the first 80% of the training sessions and
scored by recall@20 on the remaining 20%. The winner is the first point, in
listed order, with the highest validation recall.
"""
import itertools
import logging
from dataclasses import dataclass, field

from core.exceptions import FlagError, SessrecError
from corpus.sessions import to_fixed
from evaluation.metrics import evaluate_model
from .config import TrainConfig
from .forms import HyperParamsForm, form_errors
from .trainer import VALIDATION_CUTOFF, train

logger = logging.getLogger(__name__)


@dataclass
class GridPointResult:
    values: dict
    hp: object = None
    recall: float = None
    error: str = ''

    @property
    def ok(self):
        return self.recall is not None


@dataclass
class GridResult:
    axes: dict
    points: list = field(default_factory=list)
    best: GridPointResult = None
    warnings: list = field(default_factory=list)

    @property
    def best_hp(self):
        return self.best.hp if self.best else None


def grid_points(grid):
    """Cartesian product of the axes, first axis varying slowest, values in listed order."""
    names = list(grid)
    for combination in itertools.product(*(grid[name] for name in names)):
        yield dict(zip(names, combination))


def point_hyperparams(base, values):
    form = HyperParamsForm(values)
    if not form.is_valid():
        raise FlagError(form_errors(form))
    return form.hyperparams(base=base)


def boundary_warnings(axes, best_values):
    """Numeric axes whose winning value sits at either end of the searched range."""
    warnings = []
    for name, candidates in axes.items():
        try:
            numbers = sorted(float(value) for value in candidates)
            chosen = float(best_values[name])
        except ValueError:
            continue
        if len(set(numbers)) < 2:
            continue
        if chosen == numbers[0] or chosen == numbers[-1]:
            side = 'lower' if chosen == numbers[0] else 'upper'
            warnings.append(
                f"best {name}={best_values[name]} is on the {side} boundary of "
                f"[{', '.join(candidates)}]; consider extending the range"
            )
    return warnings


def grid_search(corpus, config, on_point=None):
    if not config.grid:
        raise FlagError("grid search needs at least one list-valued hyperparameter")

    split = corpus.validation_split(threads=config.threads)
    result = GridResult(axes=dict(config.grid))
    logger.info(
        f"Grid search over {', '.join(config.grid)} on {len(split.train)} training / "
        f"{len(split.test)} validation examples"
    )

    for values in grid_points(config.grid):
        point = GridPointResult(values=values)
        try:
            point.hp = point_hyperparams(config.hp, values)
            point_config = TrainConfig(
                hp=point.hp,
                shuffle_seed=config.shuffle_seed,
                log_every=config.log_every,
                threads=config.threads,
            )
            report = train(split, point_config, validation=split)
            point.recall = max(report.validation_recalls)
            logger.info(f"Grid point {values}: validation recall@{VALIDATION_CUTOFF} {point.recall:.4f}")
        except (SessrecError, ValueError) as exc:
            point.error = str(exc)
            logger.warning(f"Grid point {values} failed: {exc}")
        result.points.append(point)
        if on_point is not None:
            on_point(point)
        if point.ok and (result.best is None or point.recall > result.best.recall):
            result.best = point

    if result.best is None:
        raise SessrecError("every grid point failed to train")

    result.warnings = boundary_warnings(result.axes, result.best.values)
    for warning in result.warnings:
        logger.warning(warning)
    return result


def sweep_n(corpus, config, n_values, cutoff=VALIDATION_CUTOFF):
    """
    Retrain config.hp once per window length and score each model on the
    test side. Returns one (n, recall, mrr, ndcg) tuple per n at the cutoff.
    """
    if not n_values:
        raise FlagError("sweep needs at least one value of n")
    rows = []
    for n in n_values:
        hp = config.hp.with_changes(n=n)
        run_config = TrainConfig(
            hp=hp,
            shuffle_seed=config.shuffle_seed,
            log_every=config.log_every,
            threads=config.threads,
        )
        report = train(corpus, run_config)
        fixed = [to_fixed(example, n) for example in corpus.test]
        metrics = evaluate_model(report.params, hp, fixed, (cutoff,), config.threads)
        rows.append((n, metrics.mean('recall', cutoff), metrics.mean('mrr', cutoff), metrics.mean('ndcg', cutoff)))
        logger.info(f"n={n}: recall@{cutoff} {rows[-1][1]:.4f}")
    return rows
