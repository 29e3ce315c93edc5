"""
Tabular report files. Tab-separated unless noted; floats are written with
six decimals so reruns with the same seed produce identical bytes.
"""
import logging
from pathlib import Path

import pandas as pd

from core.exceptions import FormatError, StorageError
from .metrics import METRICS, MetricsReport
from .significance import paired_t_test, relative_improvement

logger = logging.getLogger(__name__)

METRICS_COLUMNS = ['variant', 'k', 'recall', 'mrr', 'ndcg', 'N']
DETAILS_COLUMNS = ['index', 'target', 'rank']
COSINE_COLUMNS = ['variant', 'avg', 'next']
BENCH_COLUMNS = ['variant', 'mean_ms', 'p95_ms', 'eps']
SWEEP_COLUMNS = ['n', 'recall@20', 'mrr@20', 'ndcg@20']
COMPARE_COLUMNS = ['metric', 'k', 'a', 'b', 'improvement_pct', 't', 'significant', 'N']
FLOAT_FORMAT = '%.6f'


def write_table(frame, path, sep='\t'):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, sep=sep, index=False, float_format=FLOAT_FORMAT, na_rep='', lineterminator='\n')
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def metrics_frame(label, report):
    rows = [
        {'variant': label, 'k': k, 'recall': recall, 'mrr': mrr, 'ndcg': ndcg, 'N': report.count}
        for k, recall, mrr, ndcg in report.rows()
    ]
    return pd.DataFrame(rows, columns=METRICS_COLUMNS)


def details_frame(report):
    return pd.DataFrame({
        'index': range(report.count),
        'target': report.targets,
        'rank': report.ranks,
    }, columns=DETAILS_COLUMNS)


def read_details(path):
    """Per-example ranks written by eval --details."""
    try:
        frame = pd.read_csv(path, sep='\t')
    except FileNotFoundError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise FormatError(f"{path} is not a details table: {exc}") from exc
    if list(frame.columns) != DETAILS_COLUMNS:
        raise FormatError(f"{path}: expected columns {', '.join(DETAILS_COLUMNS)}")
    if (frame['rank'] < 1).any():
        raise FormatError(f"{path}: ranks must be at least 1")
    return frame


def details_report(frame, cutoffs):
    return MetricsReport(
        cutoffs=tuple(cutoffs),
        ranks=frame['rank'].to_numpy(),
        targets=frame['target'].to_numpy(),
    )


def compare_frame(details_a, details_b, cutoffs):
    """
    Per cutoff and metric: both means, relative improvement of a over b in
    percent and the paired t-test on the per-example values.
    """
    if len(details_a) != len(details_b) or not (
        details_a['target'].to_numpy() == details_b['target'].to_numpy()
    ).all():
        raise FormatError("the two detail files do not cover the same test examples")

    a = details_report(details_a, cutoffs)
    b = details_report(details_b, cutoffs)
    rows = []
    for k in cutoffs:
        for metric in METRICS:
            mean_a, mean_b = a.mean(metric, k), b.mean(metric, k)
            test = paired_t_test(a.values(metric, k), b.values(metric, k))
            rows.append({
                'metric': metric,
                'k': k,
                'a': mean_a,
                'b': mean_b,
                'improvement_pct': relative_improvement(mean_a, mean_b),
                't': test.t,
                'significant': 'yes' if test.significant else 'no',
                'N': test.n,
            })
    return pd.DataFrame(rows, columns=COMPARE_COLUMNS)


def cosine_frame(label, report):
    return pd.DataFrame([{'variant': label, 'avg': report.avg, 'next': report.next}], columns=COSINE_COLUMNS)


def bench_frame(rows):
    """rows: (label, BenchReport) pairs, one line each."""
    return pd.DataFrame(
        [{'variant': label, 'mean_ms': r.mean_ms, 'p95_ms': r.p95_ms, 'eps': r.eps} for label, r in rows],
        columns=BENCH_COLUMNS,
    )


def sweep_frame(rows):
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def grid_frame(result):
    names = list(result.axes)
    records = []
    for point in result.points:
        record = {name: point.values[name] for name in names}
        record['recall@20'] = point.recall
        record['status'] = 'ok' if point.ok else 'failed'
        record['error'] = point.error
        records.append(record)
    return pd.DataFrame(records, columns=names + ['recall@20', 'status', 'error'])
