"""Decay exponents and envelope tests for sampled solution norms.

Upper bounds of the form ``||u(t)|| <= C t^rho`` are checked without knowing
C: the sequence ``norm_i * t_i^{-rho}`` is formed in the asymptotic
direction (ascending t for long times, descending t for short times) and
must stay below its early maximum up to a slack.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .contour import ContourSpec, evaluate_solution
from .grid import Domain, GridFunction, l2_norm
from .order_field import OrderFieldError, validate_theorem_condition

__all__ = [
    "DecayReport", "EnvelopeResult", "long_time_exponent", "short_time_exponent",
    "sample_decay", "envelope_check", "fit_slope", "write_decay_csv",
    "ENVELOPE_SLACK", "SLOPE_SLACK",
]

ENVELOPE_SLACK = 0.10
SLOPE_SLACK = 0.05
REGIMES = ("long_time", "short_time")


@dataclass
class DecayReport:
    times: np.ndarray
    norms: np.ndarray
    fitted_slope: float
    theoretical_exponent: float
    envelope_constant: float
    regime: str
    trivial: bool = False
    contour: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.norms = np.asarray(self.norms, dtype=float)
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.times.size == 0:
            raise ValueError("empty time list")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(self.norms < 0):
            raise ValueError("norms must be nonnegative")

    @property
    def bound_slope(self) -> float:
        """Slope of the upper bound ``t^rho`` on a log-log plot."""
        if self.regime == "long_time":
            return -self.theoretical_exponent
        return self.theoretical_exponent

    def envelope_values(self) -> np.ndarray:
        return self.norms * self.times ** (-self.bound_slope)


@dataclass(frozen=True)
class EnvelopeResult:
    passed: bool
    margin: float
    worst_ratio: float  # max later envelope value over the early reference
    slope_ok: bool
    envelope_slack: float
    slope_slack: float


def long_time_exponent(fld, s: float | None = None) -> float:
    """``alpha_m - alpha_star (1 - d/s)``; raises if it is not positive."""
    holds, margin = validate_theorem_condition(fld, s)
    if not holds:
        raise OrderFieldError(f"alpha_star (1 - d/s) < alpha_m fails (margin {margin:.3g})")
    return float(margin)


def short_time_exponent(fld) -> float:
    """``alpha_m - alpha_M`` over the grid values; zero for constant order."""
    v = fld.values
    return float(v.min() - v.max())


def fit_slope(times, norms, last_decade: bool = False) -> float:
    """Least-squares slope of ``log norm`` against ``log t``.

    With ``last_decade`` only samples with ``t >= t_max / 10`` are used
    (when at least two remain).
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    keep = y > 0
    if last_decade:
        tail = keep & (t >= t.max() / 10)
        if tail.sum() >= 2:
            keep = tail
    if keep.sum() < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(t[keep]), np.log(y[keep]), 1)
    return float(slope)


def _report(times, norms, regime, exponent, contour=()):
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    trivial = not np.any(norms > 0)
    slope = math.nan if trivial else fit_slope(times, norms, last_decade=(regime == "long_time"))
    rep = DecayReport(times, norms, slope, exponent, 0.0, regime, trivial, list(contour))
    rep.envelope_constant = float(rep.envelope_values().max())
    return rep


def sample_decay(domain: Domain, fld, u0: GridFunction, times: Sequence[float], spec: ContourSpec,
                 regime: str | None = None, workers: int = 1) -> DecayReport:
    """Evaluate ``||u(t)||`` at each time and fit the decay.

    The regime is inferred from the times when not given: all ``t > 1`` is
    long time, all ``t <= 1`` is short time. Mixed lists are rejected.
    """
    times = np.asarray(sorted(times), dtype=float)
    if times.size == 0:
        raise ValueError("empty time list")
    if regime is None:
        if np.all(times > 1):
            regime = "long_time"
        elif np.all(times <= 1):
            regime = "short_time"
        else:
            raise ValueError("times straddle t = 1; pass them as two regimes")
    if regime == "long_time":
        if np.any(times <= 1):
            raise ValueError("long-time samples must all exceed 1")
        exponent = long_time_exponent(fld)
    elif regime == "short_time":
        if np.any(times > 1) or np.any(times <= 0):
            raise ValueError("short-time samples must lie in (0, 1]")
        exponent = short_time_exponent(fld)
    else:
        raise ValueError(f"unknown regime {regime!r}")

    norms, reports = [], []
    for t in times:
        u, rep = evaluate_solution(domain, fld, u0, float(t), spec, workers=workers)
        norms.append(l2_norm(u))
        reports.append(rep)
    return _report(times, norms, regime, exponent, reports)


def envelope_check(report: DecayReport, envelope_slack: float = ENVELOPE_SLACK,
                   slope_slack: float = SLOPE_SLACK) -> EnvelopeResult:
    """One-sided test of ``||u(t)|| <= C t^rho``.

    Samples are ordered in the asymptotic direction. The maximum of
    ``norm * t^{-rho}`` over the first quarter is the reference; every later
    value must stay within ``1 + envelope_slack`` of it. In the long-time
    regime the fitted slope must also satisfy
    ``slope <= -exponent + slope_slack``. ``margin = slope - rho``.
    """
    if report.trivial:
        return EnvelopeResult(True, math.nan, 0.0, True, envelope_slack, slope_slack)
    env = report.envelope_values()
    if report.regime == "short_time":
        env = env[::-1]  # t -> 0
    head = max(1, len(env) // 4)
    ref = env[:head].max()
    later = env[head:]
    worst = float(later.max() / ref) if later.size else 1.0
    env_ok = worst <= 1.0 + envelope_slack
    margin = report.fitted_slope - report.bound_slope
    slope_ok = True
    if report.regime == "long_time":
        slope_ok = bool(report.fitted_slope <= -report.theoretical_exponent + slope_slack)
    return EnvelopeResult(bool(env_ok and slope_ok), float(margin), worst, slope_ok,
                          envelope_slack, slope_slack)


def write_decay_csv(report: DecayReport, path) -> None:
    env = report.envelope_values()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "norm", "envelope_value"])
        for t, n, e in zip(report.times, report.norms, env):
            w.writerow([f"{t:.17g}", f"{n:.17g}", f"{e:.17g}"])
