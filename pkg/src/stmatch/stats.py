"""Two-sample t-tests used to compare matcher variants."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from scipy import stats as _sps

from .errors import StatisticsError


@dataclass(frozen=True)
class TTest:
    t: float
    p: float
    df: float


def _mean_var(xs: Sequence[float]) -> tuple[float, float]:
    n = len(xs)
    m = math.fsum(xs) / n
    return m, math.fsum((x - m) ** 2 for x in xs) / (n - 1)


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> TTest:
    """Unequal-variance two-sample t-test, two-sided.

    Degenerate inputs with zero variance in both samples give t=0, p=1 for
    equal means and an infinite t with p=0 otherwise.
    """
    if len(a) < 2 or len(b) < 2:
        raise StatisticsError("each sample needs at least 2 values")
    ma, va = _mean_var(a)
    mb, vb = _mean_var(b)
    if not all(math.isfinite(v) for v in (ma, mb, va, vb)):
        raise StatisticsError("samples must be finite")
    se2 = va / len(a) + vb / len(b)
    df_default = len(a) + len(b) - 2.0
    if se2 == 0.0:
        if ma == mb:
            return TTest(0.0, 1.0, df_default)
        return TTest(math.copysign(math.inf, ma - mb), 0.0, df_default)
    t = (ma - mb) / math.sqrt(se2)
    df = se2 ** 2 / ((va / len(a)) ** 2 / (len(a) - 1) + (vb / len(b)) ** 2 / (len(b) - 1))
    p = 2.0 * float(_sps.t.sf(abs(t), df))
    return TTest(t, min(1.0, p), df)


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TTest:
    """Paired t-test on ``a[i] - b[i]``, two-sided."""
    if len(a) != len(b):
        raise StatisticsError("paired samples must have equal length")
    if len(a) < 2:
        raise StatisticsError("paired test needs at least 2 pairs")
    d = [x - y for x, y in zip(a, b)]
    md, vd = _mean_var(d)
    df = len(d) - 1.0
    if vd == 0.0:
        if md == 0.0:
            return TTest(0.0, 1.0, df)
        return TTest(math.copysign(math.inf, md), 0.0, df)
    t = md / math.sqrt(vd / len(d))
    p = 2.0 * float(_sps.t.sf(abs(t), df))
    return TTest(t, min(1.0, p), df)
