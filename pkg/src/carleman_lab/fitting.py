"""Least-squares line fits used by the sweep reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float


def fit_line(x, y) -> LinearFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points for a line fit")
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return LinearFit(slope=float(coef[1]), intercept=float(coef[0]), r_squared=r2)


def fit_log_vs_x(x, y) -> LinearFit:
    """Fit log(y) = intercept + slope * x (exponential trend in x)."""
    return fit_line(x, np.log(np.asarray(y, dtype=float)))


def fit_loglog(x, y) -> LinearFit:
    """Fit log(y) = intercept + slope * log(x) (power law)."""
    return fit_line(np.log(np.asarray(x, dtype=float)),
                    np.log(np.asarray(y, dtype=float)))
