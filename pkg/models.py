"""
Shared model types: physical parameters, basis indexing, wave functions and
the exceptions every other module raises.
"""
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from app import config


class DimensionError(ValueError):
    """Basis dimension above the configured ceiling, or mismatched basis layouts."""


class SolverError(RuntimeError):
    """Eigensolver failed to reach its residual tolerance."""

    def __init__(self, message, best_residual=float("nan"), iterations=0):
        super().__init__(message)
        self.best_residual = best_residual
        self.iterations = iterations


class SweepError(RuntimeError):
    """Raised after a sweep finished with one or more failed grid points."""

    def __init__(self, message, points=None, failed=None):
        super().__init__(message)
        self.points = points or []
        self.failed = failed or []


class BoundaryError(ValueError):
    """The located extremum sits on the edge of the scanned grid."""

    def __init__(self, message, n_atoms=None):
        super().__init__(message)
        self.n_atoms = n_atoms


class InconsistencyError(ValueError):
    """Fidelity minimum and susceptibility maximum disagree by more than one grid step."""


class FitError(ValueError):
    """Scaling fit precondition, domain or rank failure."""


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the Dicke Hamiltonian (hbar = 1)."""
    omega: float = 1.0
    omega0: float = 1.0
    n_atoms: int = 2
    gamma: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not self.omega0 >= 0:
            raise ValueError(f"omega0 must be non-negative, got {self.omega0}")
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))

    @property
    def j(self):
        return self.n_atoms / 2

    @property
    def displacement(self):
        """Per-unit-m displacement g = 2 gamma / (omega sqrt(N)) of the boson mode."""
        return 2.0 * self.gamma / (self.omega * math.sqrt(self.n_atoms))

    def critical_coupling(self):
        return critical_coupling(self)

    def with_gamma(self, gamma):
        return replace(self, gamma=float(gamma))

    def __repr__(self):
        return (f'<ModelParams omega={self.omega} omega0={self.omega0} '
                f'N={self.n_atoms} gamma={self.gamma}>')


def critical_coupling(params):
    """Thermodynamic-limit critical coupling sqrt(omega * omega0) / 2."""
    return math.sqrt(params.omega * params.omega0) / 2.0


@dataclass(frozen=True, order=True)
class EcsIndex:
    """
    One basis state |N; j, m> of the extended coherent-state basis.

    m is stored as the exact integer twice_m so half-integer values compare exactly.
    """
    twice_m: int
    n_exc: int

    @property
    def m(self):
        return self.twice_m / 2

    def __repr__(self):
        return f'<EcsIndex N={self.n_exc} m={self.twice_m}/2>'


def basis_dimension(n_atoms, n_max):
    return (n_max + 1) * (n_atoms + 1)


def check_dimension(dimension, ceiling=None):
    ceiling = config["DIMENSION_CEILING"] if ceiling is None else ceiling
    if dimension > ceiling:
        raise DimensionError(f"Basis dimension {dimension} exceeds the ceiling of {ceiling}")
    return dimension


def basis_enumerate(n_atoms, n_max, ceiling=None):
    """
    Basis states in matrix order: m outer (ascending from -j), N inner.

    Returns a list of EcsIndex of length (n_max + 1) * (n_atoms + 1).
    """
    if n_atoms < 1:
        raise ValueError(f"n_atoms must be >= 1, got {n_atoms}")
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    check_dimension(basis_dimension(n_atoms, n_max), ceiling)
    return [EcsIndex(twice_m, n_exc)
            for twice_m in range(-n_atoms, n_atoms + 1, 2)
            for n_exc in range(n_max + 1)]


def index_of(n_atoms, n_max, index):
    """Position of an EcsIndex in the basis_enumerate order."""
    if not 0 <= index.n_exc <= n_max or abs(index.twice_m) > n_atoms \
            or (index.twice_m + n_atoms) % 2:
        raise DimensionError(f"{index!r} is outside the basis for N={n_atoms}, n_max={n_max}")
    return ((index.twice_m + n_atoms) // 2) * (n_max + 1) + index.n_exc


def fix_phase(vector):
    """Normalize and flip the sign so the largest-magnitude component is positive."""
    vector = np.asarray(vector, dtype=float)
    vector = vector / np.linalg.norm(vector)
    if vector[np.argmax(np.abs(vector))] < 0:
        vector = -vector
    return vector


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Ground state over a truncated ECS basis, coefficients in basis_enumerate order."""
    coeffs: np.ndarray
    energy: float
    n_max: int
    params: ModelParams
    degenerate: bool = False
    residual: float = 0.0
    iterations: int = 0
    parity: Optional[str] = None

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        expected = basis_dimension(self.params.n_atoms, self.n_max)
        if coeffs.shape != (expected,):
            raise DimensionError(
                f"Coefficient vector of shape {coeffs.shape} does not match dimension {expected}")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n_atoms(self):
        return self.params.n_atoms

    @property
    def gamma(self):
        return self.params.gamma

    def layers(self):
        """Coefficients as an (N_atoms + 1) x (n_max + 1) matrix: rows m, columns N."""
        return self.coeffs.reshape(self.n_atoms + 1, self.n_max + 1)

    def same_layout(self, other):
        return self.n_atoms == other.n_atoms and self.n_max == other.n_max

    def __repr__(self):
        return (f'<WaveFunction N={self.n_atoms} gamma={self.gamma} '
                f'n_max={self.n_max} E={self.energy:.12g}>')
