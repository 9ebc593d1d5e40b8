"""
Coupling sweeps at fixed atom number.

Each grid coupling is solved once, on a worker pool, and neighbouring ground
states are paired into fidelity / susceptibility rows. The merge is by grid
index, so the output does not depend on the worker count.
"""
import logging
from dataclasses import dataclass
from multiprocessing import Pool

import numpy as np
from scipy.optimize import minimize_scalar

from app import resolve_workers
from ecs_hamiltonian import ground_state_ecs, mean_photon_number
from models import BoundaryError, InconsistencyError, SolverError, SweepError
from observables import ScanPoint, excitation_distribution, fidelity, susceptibility

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepConfig:
    gamma_start: float
    gamma_end: float
    dgamma: float = 0.001
    n_max: int = 8
    refine: bool = False

    def __post_init__(self):
        if not self.gamma_start >= 0:
            raise ValueError(f"gamma_start must be non-negative, got {self.gamma_start}")
        if not self.gamma_start < self.gamma_end:
            raise ValueError(f"gamma_start ({self.gamma_start}) must be below gamma_end ({self.gamma_end})")
        if not self.dgamma > 0:
            raise ValueError(f"dgamma must be positive, got {self.dgamma}")
        # tolerance for decimal steps such as 0.01 over [0, 0.1]
        if self.dgamma > (self.gamma_end - self.gamma_start) / 10 * (1 + 1e-9):
            raise ValueError(
                f"dgamma={self.dgamma} leaves fewer than 10 steps in "
                f"[{self.gamma_start}, {self.gamma_end}]")
        if self.n_max < 0:
            raise ValueError(f"n_max must be >= 0, got {self.n_max}")

    @property
    def steps(self):
        return int(round((self.gamma_end - self.gamma_start) / self.dgamma))


@dataclass(frozen=True)
class CriticalPoint:
    """Finite-size precursor of the transition for one atom number."""
    n_atoms: int
    gamma_max: float
    f_min: float
    chi_max: float
    delta_p_peak_gamma: float
    refined: bool = False
    flagged: bool = False

    def __post_init__(self):
        if not 0.0 <= self.f_min <= 1.0:
            raise ValueError(f"f_min {self.f_min} outside [0, 1] for N={self.n_atoms}")
        if self.chi_max < 0.0:
            raise ValueError(f"chi_max {self.chi_max} negative for N={self.n_atoms}")


def gamma_grid(config):
    """start + k * dgamma for k = 0 .. K; the last value only pairs with row K - 1."""
    return config.gamma_start + np.arange(config.steps + 1) * config.dgamma


def _solve_point(task):
    """Pool worker: ground state at one grid coupling, or the failure message."""
    index, params, n_max, solver = task
    try:
        return index, ground_state_ecs(params, n_max, solver=solver), None
    except SolverError as e:
        return index, None, str(e)


def _solve_grid(params, grid, n_max, workers, solver):
    tasks = [(k, params.with_gamma(g), n_max, solver) for k, g in enumerate(grid)]
    if workers <= 1 or len(tasks) == 1:
        results = [_solve_point(task) for task in tasks]
    else:
        with Pool(min(workers, len(tasks))) as pool:
            results = pool.map(_solve_point, tasks)
    states = [None] * len(tasks)
    errors = {}
    for index, psi, error in results:
        states[index] = psi
        if error is not None:
            errors[index] = error
    return states, errors


def run_sweep(params, config, workers=None, solver=None):
    """
    One ScanPoint per grid coupling, pairing psi(gamma) with psi(gamma + dgamma).

    Args:
        params: ModelParams; its gamma is ignored
        config: SweepConfig
        workers: pool size, overridden by DICKE_WORKERS
        solver: SolverConfig passed to every ground-state solve

    Raises:
        SweepError: one or more grid points failed; the error carries every point
    """
    workers = resolve_workers(workers)
    grid = gamma_grid(config)
    logger.info(f"Sweep N={params.n_atoms}: {config.steps} points on "
                f"[{config.gamma_start}, {config.gamma_end}] dgamma={config.dgamma} "
                f"n_max={config.n_max} workers={workers}")
    states, errors = _solve_grid(params, grid, config.n_max, workers, solver)

    points = []
    failed = []
    for k in range(config.steps):
        psi, partner = states[k], states[k + 1]
        if psi is None or partner is None:
            for index in (k, k + 1):
                if index in errors:
                    logger.error(f"Solve failed at gamma={grid[index]:.6g} (N={params.n_atoms}): {errors[index]}")
            failed.append(float(grid[k]))
            points.append(ScanPoint.failure(float(grid[k])))
            continue
        value = fidelity(psi, partner)
        points.append(ScanPoint(
            gamma=float(grid[k]),
            fidelity=value,
            chi_f=susceptibility(psi, partner, config.dgamma),
            delta_p=excitation_distribution(psi).delta_p,
            energy=psi.energy,
            degenerate=psi.degenerate or partner.degenerate,
            photons=mean_photon_number(psi),
        ))

    if failed:
        raise SweepError(f"{len(failed)} of {config.steps} grid points failed for N={params.n_atoms}",
                         points=points, failed=failed)
    logger.info(f"Sweep N={params.n_atoms} finished")
    return points


def susceptibility_probe(params, config, solver=None):
    """Callable gamma -> chi_f solving at gamma and gamma + dgamma, for peak refinement."""
    def chi_at(gamma):
        psi = ground_state_ecs(params.with_gamma(gamma), config.n_max, solver=solver)
        partner = ground_state_ecs(params.with_gamma(gamma + config.dgamma), config.n_max, solver=solver)
        return susceptibility(psi, partner, config.dgamma)
    return chi_at


def refine_peak(chi_at, bracket, dgamma):
    """
    Golden-section search for the susceptibility maximum inside a grid bracket.

    Args:
        chi_at: callable gamma -> chi_f
        bracket: (low, peak, high) grid couplings with chi(peak) above both ends
        dgamma: grid step; the search stops once the bracket is narrower than dgamma / 10

    Returns:
        (gamma, chi)
    """
    low, peak, high = bracket
    xtol = (dgamma / 10) / (abs(low) + abs(high))
    result = minimize_scalar(lambda g: -chi_at(g), bracket=(low, peak, high),
                             method="golden", options={"xtol": xtol})
    if not low <= result.x <= high:
        raise ValueError(f"Refinement left the bracket [{low}, {high}]: {result.x}")
    return float(result.x), float(-result.fun)


def locate_critical(points, config, n_atoms=None, chi_at=None):
    """
    Critical precursor from a sweep: grid argmax of chi_f and argmin of F.

    Degenerate and failed points take no part in the search. With
    config.refine and a chi_at callable the chi_f maximum is refined by
    golden-section search.

    Raises:
        BoundaryError: the extremum is the first or last usable point
        InconsistencyError: argmin F and argmax chi_f are more than one step apart
    """
    if len(points) < 5:
        raise ValueError(f"At least 5 scan points are required, got {len(points)}")
    usable = [k for k, p in enumerate(points) if p.usable]
    if len(usable) < 3:
        raise BoundaryError(f"Only {len(usable)} usable points for N={n_atoms}", n_atoms=n_atoms)

    chi = np.array([points[k].chi_f for k in usable])
    fid = np.array([points[k].fidelity for k in usable])
    peak = int(np.argmax(chi))
    dip = int(np.argmin(fid))
    if peak in (0, len(usable) - 1):
        raise BoundaryError(
            f"Susceptibility maximum at the grid edge gamma={points[usable[peak]].gamma} "
            f"for N={n_atoms}; widen the grid", n_atoms=n_atoms)

    chi_point = points[usable[peak]]
    f_point = points[usable[dip]]
    if abs(chi_point.gamma - f_point.gamma) > config.dgamma * (1 + 1e-9):
        raise InconsistencyError(
            f"Fidelity minimum at {f_point.gamma} and susceptibility maximum at "
            f"{chi_point.gamma} differ by more than one step (N={n_atoms})")

    index = usable[peak]
    neighbours = [points[k] for k in (index - 1, index + 1) if 0 <= k < len(points)]
    flagged = any(not p.usable for p in neighbours)
    if flagged:
        logger.warning(f"Extremum at gamma={chi_point.gamma} borders a degenerate or failed point (N={n_atoms})")

    delta_p_peak = points[usable[int(np.argmax([points[k].delta_p for k in usable]))]].gamma

    gamma_max, chi_max, f_min = chi_point.gamma, chi_point.chi_f, f_point.fidelity
    refined = False
    if config.refine and chi_at is not None:
        bracket = (points[usable[peak - 1]].gamma, chi_point.gamma, points[usable[peak + 1]].gamma)
        try:
            gamma_max, chi_max = refine_peak(chi_at, bracket, config.dgamma)
            f_min = min(1.0, max(0.0, 1.0 - 0.5 * chi_max * config.dgamma ** 2))
            refined = True
        except ValueError as e:
            logger.warning(f"Refinement skipped for N={n_atoms}: {str(e)}")

    return CriticalPoint(
        n_atoms=n_atoms if n_atoms is not None else 0,
        gamma_max=gamma_max,
        f_min=f_min,
        chi_max=chi_max,
        delta_p_peak_gamma=delta_p_peak,
        refined=refined,
        flagged=flagged,
    )


def run_critical(params, config, workers=None, solver=None):
    """Sweep, then locate (and optionally refine) the critical precursor."""
    points = run_sweep(params, config, workers=workers, solver=solver)
    chi_at = susceptibility_probe(params, config, solver) if config.refine else None
    critical = locate_critical(points, config, n_atoms=params.n_atoms, chi_at=chi_at)
    logger.info(f"N={params.n_atoms}: gamma_max={critical.gamma_max:.6f} "
                f"chi_max={critical.chi_max:.6g} f_min={critical.f_min:.12f}")
    return points, critical
