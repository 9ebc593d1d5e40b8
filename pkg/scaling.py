"""
Finite-size scaling of the critical precursor: power-law fits for the
coupling shift and the susceptibility peak, a semilog quadratic for the
fidelity minimum, and the specific-susceptibility data collapse.
"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

import numpy as np

from models import FitError
from observables import specific_susceptibility

logger = logging.getLogger(__name__)

LINEAR_LOGLOG = "linear-loglog"
QUADRATIC_SEMILOG = "quadratic-semilog"


@dataclass(frozen=True, eq=False)
class ScalingFit:
    """
    Least-squares fit result.

    coefficients are highest power first (numpy.polyfit order); residuals are
    observed minus fitted, in the input order.
    """
    kind: str
    coefficients: np.ndarray
    exponent: Optional[float]
    rsq: float
    residuals: np.ndarray
    n_points: int

    @property
    def intercept(self):
        return float(self.coefficients[-1])

    @property
    def prefactor(self):
        if self.kind != LINEAR_LOGLOG:
            return None
        return float(10.0 ** self.intercept)

    def to_dict(self):
        return {
            "kind": self.kind,
            "coefficients": [float(c) for c in self.coefficients],
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "rsq": self.rsq,
            "residuals": [float(r) for r in self.residuals],
            "n_points": self.n_points,
        }


@dataclass(frozen=True)
class CollapsePoint:
    n_atoms: int
    x: float
    y: float


def _rsq(y, fitted):
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res <= 1e-24 else 0.0
    return min(1.0, max(0.0, 1.0 - ss_res / ss_tot))


def _polyfit(x, y, degree, kind, min_points):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] < min_points:
        raise FitError(f"{kind} fit needs at least {min_points} points, got {x.shape[0]}")
    if np.unique(x).shape[0] <= degree:
        raise FitError(f"{kind} fit is rank-deficient: {np.unique(x).shape[0]} distinct abscissae")
    coefficients = np.polyfit(x, y, degree)
    fitted = np.polyval(coefficients, x)
    return coefficients, y - fitted, _rsq(y, fitted)


def _loglog_fit(n_atoms, values, sign, label):
    values = np.asarray(values, dtype=float)
    if np.any(~(values > 0)):
        raise FitError(f"{label} must be positive for a log-log fit, got {values.tolist()}")
    coefficients, residuals, rsq = _polyfit(
        np.log10(np.asarray(n_atoms, dtype=float)), np.log10(values), 1, LINEAR_LOGLOG, 2)
    fit = ScalingFit(kind=LINEAR_LOGLOG, coefficients=coefficients,
                     exponent=float(sign * coefficients[0]), rsq=rsq,
                     residuals=residuals, n_points=len(values))
    logger.info(f"{label}: exponent={fit.exponent:.6f} prefactor={fit.prefactor:.6f} rsq={rsq:.6f}")
    return fit


def fit_gamma_exponent(points, gamma_c):
    """log10(gamma_max - gamma_c) against log10 N; the exponent is minus the slope."""
    return _loglog_fit([p.n_atoms for p in points],
                       [p.gamma_max - gamma_c for p in points], -1.0, "gamma_max - gamma_c")


def fit_chi_exponent(points):
    """log10 chi_max against log10 N; the exponent is the slope."""
    return _loglog_fit([p.n_atoms for p in points], [p.chi_max for p in points], 1.0, "chi_max")


def fit_delta_p_peak_exponent(points, gamma_c):
    """Power-law approach of the Delta-P peak coupling to gamma_c."""
    return _loglog_fit([p.n_atoms for p in points],
                       [p.delta_p_peak_gamma - gamma_c for p in points], -1.0, "delta_p peak - gamma_c")


def fit_fmin_quadratic(points):
    """log10 F_min as a quadratic in N (semilog)."""
    f_min = np.array([p.f_min for p in points], dtype=float)
    if np.any(~(f_min > 0)):
        raise FitError(f"f_min must be positive, got {f_min.tolist()}")
    coefficients, residuals, rsq = _polyfit(
        [p.n_atoms for p in points], np.log10(f_min), 2, QUADRATIC_SEMILOG, 4)
    logger.info(f"log10 F_min quadratic: coefficients={coefficients.tolist()} rsq={rsq:.6f}")
    return ScalingFit(kind=QUADRATIC_SEMILOG, coefficients=coefficients, exponent=None,
                      rsq=rsq, residuals=residuals, n_points=len(points))


def build_collapse(scans, criticals, nu):
    """
    Specific-susceptibility collapse points x = N^nu (gamma - gamma_max), y = chi_s.

    Args:
        scans: mapping n_atoms -> list of ScanPoint
        criticals: mapping n_atoms -> CriticalPoint, or a list of CriticalPoint
        nu: scaling exponent applied to N

    Degenerate, failed and chi_f = 0 points are skipped.
    """
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    if not isinstance(criticals, dict):
        criticals = {c.n_atoms: c for c in criticals}
    missing = sorted(set(scans) - set(criticals))
    if missing:
        raise ValueError(f"No critical point for N in {missing}")

    collapse = []
    for n_atoms in sorted(scans):
        critical = criticals[n_atoms]
        scale = float(n_atoms) ** nu
        for point in scans[n_atoms]:
            if not point.usable:
                continue
            if point.chi_f == 0:
                logger.warning(f"Skipping chi_f = 0 at gamma={point.gamma} (N={n_atoms})")
                continue
            collapse.append(CollapsePoint(
                n_atoms=n_atoms,
                x=scale * (point.gamma - critical.gamma_max),
                y=specific_susceptibility(critical.chi_max, point.chi_f),
            ))
    return collapse


def collapse_spread(points, x_limit=2.0, grid_size=201):
    """
    Largest vertical spread between per-N collapse curves, relative to the y range.

    Curves are linearly interpolated onto a common grid covering the x range
    they share, clipped to |x| <= x_limit.
    """
    curves = defaultdict(list)
    for p in points:
        curves[p.n_atoms].append((p.x, p.y))
    if len(curves) < 2:
        return 0.0

    low, high = -x_limit, x_limit
    series = []
    for n_atoms in sorted(curves):
        xy = np.array(sorted(curves[n_atoms]))
        low = max(low, xy[0, 0])
        high = min(high, xy[-1, 0])
        series.append(xy)
    if not high > low:
        raise FitError(f"Collapse curves share no x range inside |x| <= {x_limit}")

    grid = np.linspace(low, high, grid_size)
    values = np.array([np.interp(grid, xy[:, 0], xy[:, 1]) for xy in series])
    y_range = float(values.max() - values.min())
    if y_range == 0.0:
        return 0.0
    return float(np.max(values.max(axis=0) - values.min(axis=0)) / y_range)
