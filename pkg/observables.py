"""
Ground-state diagnostics: fidelity, fidelity susceptibility, specific
susceptibility, the excitation distribution P_N and the Delta-P precision
criterion used to choose the truncation.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from app import config
from ecs_hamiltonian import ground_state_ecs
from models import DimensionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScanPoint:
    """Per-coupling record of a sweep; fidelity pairs gamma with gamma + dgamma."""
    gamma: float
    fidelity: float
    chi_f: float
    delta_p: float
    energy: float
    degenerate: bool = False
    photons: float = float("nan")
    failed: bool = False

    def __post_init__(self):
        if self.failed:
            return
        if not 0.0 <= self.fidelity <= 1.0:
            raise ValueError(f"fidelity {self.fidelity} outside [0, 1] at gamma={self.gamma}")
        if self.chi_f < 0.0:
            raise ValueError(f"chi_f {self.chi_f} negative at gamma={self.gamma}")
        if not 0.0 <= self.delta_p <= 1.0:
            raise ValueError(f"delta_p {self.delta_p} outside [0, 1] at gamma={self.gamma}")

    @property
    def usable(self):
        """Point may take part in extremum searches and collapses."""
        return not (self.failed or self.degenerate)

    @classmethod
    def failure(cls, gamma):
        nan = float("nan")
        return cls(gamma=gamma, fidelity=nan, chi_f=nan, delta_p=nan, energy=nan,
                   degenerate=False, photons=nan, failed=True)


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    p_n: np.ndarray
    delta_p: float
    n_max_used: int


def _overlap(psi_a, psi_b):
    if not psi_a.same_layout(psi_b):
        raise DimensionError(
            f"Basis layouts differ: (N={psi_a.n_atoms}, n_max={psi_a.n_max}) vs "
            f"(N={psi_b.n_atoms}, n_max={psi_b.n_max})")
    return float(np.dot(psi_a.coeffs, psi_b.coeffs))


def fidelity(psi_a, psi_b):
    """F = |<psi_a|psi_b>|, clipped to [0, 1]."""
    return min(1.0, abs(_overlap(psi_a, psi_b)))


def susceptibility_from_fidelity(value, dgamma):
    if not dgamma > 0:
        raise ValueError(f"dgamma must be positive, got {dgamma}")
    return max(0.0, 2.0 * (1.0 - value) / dgamma ** 2)


def susceptibility(psi_a, psi_b, dgamma):
    """Fidelity susceptibility 2 (1 - F) / dgamma^2."""
    return susceptibility_from_fidelity(fidelity(psi_a, psi_b), dgamma)


def susceptibility_log(psi_a, psi_b, dgamma):
    """Logarithmic form -2 ln F / dgamma^2, kept as a cross-check."""
    if not dgamma > 0:
        raise ValueError(f"dgamma must be positive, got {dgamma}")
    value = fidelity(psi_a, psi_b)
    if value == 0.0:
        return math.inf
    return max(0.0, -2.0 * math.log(value) / dgamma ** 2)


def specific_susceptibility(chi_at_max, chi):
    """chi_s = (chi(gamma_max) - chi) / chi."""
    if chi == 0:
        raise ZeroDivisionError("Specific susceptibility is undefined for chi = 0")
    return (chi_at_max - chi) / chi


def excitation_distribution(psi):
    """
    P_N = sum_m C_{N,m}^2 for N = 0 .. n_max, with Delta-P taken as the weight
    of the top retained layer.
    """
    p_n = np.sum(psi.layers() ** 2, axis=0)
    p_n.flags.writeable = False
    return ConvergenceReport(p_n=p_n, delta_p=min(1.0, float(p_n[-1])), n_max_used=psi.n_max)


def delta_p_exact(psi_small, psi_large):
    """
    1 - |<Psi(n_max - 1)|Psi(n_max)>| with the smaller state zero-extended by one layer.
    """
    if psi_small.n_atoms != psi_large.n_atoms or psi_large.n_max != psi_small.n_max + 1:
        raise DimensionError(
            f"Expected truncations n and n+1 for the same N, got "
            f"(N={psi_small.n_atoms}, n_max={psi_small.n_max}) and "
            f"(N={psi_large.n_atoms}, n_max={psi_large.n_max})")
    small = psi_small.layers()
    extended = np.zeros((small.shape[0], small.shape[1] + 1))
    extended[:, :-1] = small
    overlap = float(np.sum(extended * psi_large.layers()))
    return max(0.0, 1.0 - abs(overlap))


@dataclass
class TruncationLadder:
    """Result of a minimal-truncation search."""
    n_max: Optional[int]
    converged: bool
    tolerance: float
    rungs: List[dict] = field(default_factory=list)


def minimal_truncation(params, tolerance=None, n_max_start=0, n_max_ceiling=40, solver=None):
    """
    Smallest n_max whose Delta-P is below tolerance.

    Delta-P for a candidate n is the top-layer weight of the ground state
    computed with truncation n + 1.
    """
    tolerance = config["DELTA_P_TOLERANCE"] if tolerance is None else tolerance
    if n_max_start < 0 or n_max_ceiling < n_max_start:
        raise ValueError(f"Invalid truncation ladder [{n_max_start}, {n_max_ceiling}]")

    ladder = TruncationLadder(n_max=None, converged=False, tolerance=tolerance)
    for n_max in range(n_max_start, n_max_ceiling + 1):
        psi = ground_state_ecs(params, n_max + 1, solver=solver)
        report = excitation_distribution(psi)
        ladder.rungs.append({"n_max": n_max, "delta_p": report.delta_p, "energy": psi.energy})
        logger.debug(f"Truncation {n_max}: delta_p={report.delta_p:.3e}")
        if report.delta_p < tolerance:
            ladder.n_max = n_max
            ladder.converged = True
            return ladder

    logger.warning(f"No truncation up to {n_max_ceiling} reached delta_p < {tolerance:g} for {params!r}")
    return ladder
