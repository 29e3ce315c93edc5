"""Two-sided paired t-test at the 95% level."""
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

CONFIDENCE = 0.95


@dataclass(frozen=True)
class PairedTTest:
    t: float
    significant: bool
    n: int
    mean_difference: float
    infinite: bool = False


def paired_t_test(a, b, confidence=CONFIDENCE):
    """
    t = mean(d) / (sd(d) / sqrt(N)) on d = a - b, compared with the Student-t
    critical value at N - 1 degrees of freedom.

    Zero spread is handled explicitly: identical differences of zero give
    t = 0 (not significant); identical non-zero differences give t = +-inf,
    reported significant with the infinite flag set.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.size != b.size:
        raise ValueError(f"paired samples differ in length ({a.size} vs {b.size})")
    if a.size < 2:
        raise ValueError("a paired t-test needs at least two pairs")

    diff = a - b
    n = diff.size
    mean = float(diff.mean())
    sd = float(diff.std(ddof=1))

    if sd == 0.0:
        if mean == 0.0:
            return PairedTTest(t=0.0, significant=False, n=n, mean_difference=0.0)
        return PairedTTest(t=math.copysign(math.inf, mean), significant=True, n=n,
                           mean_difference=mean, infinite=True)

    t = mean / (sd / math.sqrt(n))
    critical = float(stats.t.ppf(1.0 - (1.0 - confidence) / 2.0, n - 1))
    return PairedTTest(t=t, significant=abs(t) > critical, n=n, mean_difference=mean)


def relative_improvement(a, b):
    """(a - b) / b in percent; None when b is zero."""
    return None if b == 0 else 100.0 * (a - b) / b
