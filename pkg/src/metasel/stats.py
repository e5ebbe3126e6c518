"""Error metrics and significance testing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc


def mae(errors) -> float:
    """Arithmetic mean of absolute errors."""
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        raise ValueError("mae of an empty error list is undefined")
    return float(errors.mean())


def sample_std(values) -> float:
    """Sample standard deviation (n-1 denominator)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1))


def student_t_two_tailed_p(t: float, df: int) -> float:
    """Two-tailed tail probability of Student's t via the regularized
    incomplete beta function: p = I(df / (df + t^2); df/2, 1/2)."""
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    t = float(t)
    if t == 0.0:
        return 1.0
    if np.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


@dataclass
class TTestResult:
    t: float
    p: float
    df: int
    zero_variance: bool = False  # nonzero mean difference but no spread


def paired_t_test(errs_a, errs_b) -> TTestResult:
    """Paired two-tailed t-test on aligned error vectors.

    d_i = a_i - b_i; t = mean(d) / (sd(d) / sqrt(n)) with sample sd.
    All-zero differences give t=0, p=1; zero spread around a nonzero mean is
    reported as p=0 with the zero_variance flag set.
    """
    a = np.asarray(errs_a, dtype=np.float64)
    b = np.asarray(errs_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired t-test needs two aligned 1-d vectors")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    d = a - b
    df = n - 1
    mean_d = float(d.mean())
    sd_d = float(d.std(ddof=1))
    if sd_d == 0.0:
        if mean_d == 0.0:
            return TTestResult(t=0.0, p=1.0, df=df)
        return TTestResult(t=float(np.inf) * np.sign(mean_d), p=0.0, df=df, zero_variance=True)
    t = mean_d / (sd_d / np.sqrt(n))
    return TTestResult(t=float(t), p=student_t_two_tailed_p(t, df), df=df)
