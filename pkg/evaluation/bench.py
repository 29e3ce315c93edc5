"""Forward-only latency per example, timed on the calling thread with BLAS held to one thread."""
import logging
import time
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from threadpoolctl import threadpool_limits

from core.exceptions import FlagError
from recommender.network import forward

logger = logging.getLogger(__name__)

WARMUP_EXAMPLES = 32


@dataclass(frozen=True)
class BenchReport:
    mean_ms: float
    p95_ms: float
    eps: float
    timings: int


def bench_inference(params, hp, fixed_examples, repetitions=1, warmup=None, m=None):
    """
    Time scoring of every example `repetitions` times. A warm-up pass over
    the first few examples runs first and is not timed.
    """
    if not fixed_examples:
        raise FlagError("nothing to benchmark: the example set is empty")
    if repetitions < 1:
        raise FlagError("repetitions must be at least 1")
    warmup = settings.SESSREC['BENCH_WARMUP'] if warmup is None else warmup

    def run(fixed):
        target = fixed.target if hp.variant == 'ORACLE' else None
        return forward(fixed, params, hp, target=target, m=m).scores

    timings = []
    with threadpool_limits(limits=1):
        for _ in range(warmup):
            for fixed in fixed_examples[:WARMUP_EXAMPLES]:
                run(fixed)

        for _ in range(repetitions):
            for fixed in fixed_examples:
                started = time.perf_counter()
                run(fixed)
                timings.append(time.perf_counter() - started)

    timings = np.asarray(timings) * 1000.0
    total_seconds = timings.sum() / 1000.0
    report = BenchReport(
        mean_ms=float(timings.mean()),
        p95_ms=float(np.percentile(timings, 95)),
        eps=float(timings.size / total_seconds) if total_seconds > 0 else float('inf'),
        timings=int(timings.size),
    )
    logger.info(f"{hp.variant}: {report.mean_ms:.4f} ms mean, {report.p95_ms:.4f} ms p95 over {report.timings} runs")
    return report
