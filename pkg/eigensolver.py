"""
Lowest eigenpair of a real symmetric operator.

Small problems are diagonalized densely. Larger ones use a thick-restart
Lanczos iteration with full reorthogonalization, started from a seeded random
vector so repeated runs return the same eigenvector.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from app import config
from models import SolverError, fix_phase

logger = logging.getLogger(__name__)

DEGENERACY_GAP = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-12
    max_iter: int = 500
    krylov_dim: int = 60
    seed: int = 12345
    keep: int = 3
    dense_threshold: int = field(default_factory=lambda: config["DENSE_THRESHOLD"])

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.krylov_dim < 4:
            raise ValueError(f"krylov_dim must be >= 4, got {self.krylov_dim}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not 1 <= self.keep < self.krylov_dim:
            raise ValueError(f"keep must lie in [1, krylov_dim), got {self.keep}")


@dataclass(frozen=True, eq=False)
class Eigenpair:
    value: float
    vector: np.ndarray
    residual: float
    iterations: int
    gap: float
    method: str

    @property
    def degenerate(self):
        return self.gap < DEGENERACY_GAP


def as_operator(operator, dim=None):
    """Wrap arrays, sparse matrices and bare matvec callables as a LinearOperator."""
    if isinstance(operator, LinearOperator):
        return operator
    if isinstance(operator, np.ndarray) or scipy.sparse.issparse(operator):
        return aslinearoperator(operator)
    if callable(operator):
        if dim is None:
            raise ValueError("dim is required when passing a bare matvec callable")
        return LinearOperator((dim, dim), matvec=operator, dtype=float)
    raise TypeError(f"Unsupported operator type {type(operator).__name__}")


def rayleigh_quotient(operator, vector):
    vector = np.asarray(vector, dtype=float)
    op = as_operator(operator, vector.shape[0])
    return float(vector @ op.matvec(vector) / (vector @ vector))


def _materialize(operator, op, dim):
    if isinstance(operator, np.ndarray):
        return np.asarray(operator, dtype=float)
    if scipy.sparse.issparse(operator):
        return operator.toarray()
    return np.asarray(op.matmat(np.eye(dim)), dtype=float)


def _residual(op, value, vector):
    return float(np.linalg.norm(op.matvec(vector) - value * vector))


def _dense_lowest(operator, op, dim, config):
    matrix = _materialize(operator, op, dim)
    try:
        values, vectors = scipy.linalg.eigh(matrix, subset_by_index=[0, min(1, dim - 1)])
    except (np.linalg.LinAlgError, ValueError) as e:
        raise SolverError(f"Dense diagonalization failed: {str(e)}") from e
    vector = fix_phase(vectors[:, 0])
    value = float(values[0])
    gap = float(values[1] - values[0]) if dim > 1 else float("inf")
    residual = _residual(op, value, vector)
    if residual > config.tol * max(1.0, abs(value)):
        logger.warning(f"Dense eigenpair residual {residual:.3e} above tolerance {config.tol:.1e}")
    return Eigenpair(value, vector, residual, 1, gap, "dense")


def _expand(op, V, W, size):
    """Extend the Lanczos basis up to its capacity, reorthogonalizing twice."""
    capacity = V.shape[1]
    while size < capacity:
        w = W[:, size - 1]
        basis = V[:, :size]
        q = w - basis @ (basis.T @ w)
        q -= basis @ (basis.T @ q)
        beta = np.linalg.norm(q)
        if beta <= 1e-13 * max(1.0, np.linalg.norm(w)):
            # invariant subspace reached
            break
        V[:, size] = q / beta
        W[:, size] = op.matvec(V[:, size])
        size += 1
    return size


def _lanczos_lowest(op, dim, config):
    capacity = min(config.krylov_dim, dim)
    keep = max(1, min(config.keep, capacity - 1))
    rng = np.random.default_rng(config.seed)

    V = np.zeros((dim, capacity))
    W = np.zeros((dim, capacity))
    start = rng.standard_normal(dim)
    V[:, 0] = start / np.linalg.norm(start)
    W[:, 0] = op.matvec(V[:, 0])
    size = 1
    best_residual = float("inf")

    for cycle in range(1, config.max_iter + 1):
        size = _expand(op, V, W, size)
        projected = V[:, :size].T @ W[:, :size]
        projected = 0.5 * (projected + projected.T)
        theta, Y = scipy.linalg.eigh(projected)

        ritz = V[:, :size] @ Y[:, 0]
        ritz /= np.linalg.norm(ritz)
        image = op.matvec(ritz)
        value = float(ritz @ image)
        r = image - value * ritz
        residual = float(np.linalg.norm(r))
        best_residual = min(best_residual, residual)

        if residual <= config.tol * max(1.0, abs(value)):
            gap = float(theta[1] - theta[0]) if size > 1 else float("inf")
            logger.debug(f"Lanczos converged in {cycle} cycles, dim={dim}, residual={residual:.3e}")
            return Eigenpair(value, fix_phase(ritz), residual, cycle, gap, "lanczos")

        # thick restart: keep the lowest Ritz vectors, continue along the residual
        kept = min(keep, size)
        V[:, :kept] = V[:, :size] @ Y[:, :kept]
        W[:, :kept] = W[:, :size] @ Y[:, :kept]
        size = kept
        basis = V[:, :size]
        q = r - basis @ (basis.T @ r)
        q -= basis @ (basis.T @ q)
        norm_q = np.linalg.norm(q)
        if size < capacity and norm_q > 1e-14 * max(1.0, abs(value)):
            V[:, size] = q / norm_q
            W[:, size] = op.matvec(V[:, size])
            size += 1

    raise SolverError(
        f"Lanczos did not converge in {config.max_iter} cycles (dim={dim}, "
        f"best residual {best_residual:.3e})",
        best_residual=best_residual,
        iterations=config.max_iter,
    )


def lowest_eigenpair(operator, dim=None, config=None):
    """
    Lowest eigenvalue and normalized, phase-fixed eigenvector of a symmetric operator.

    Args:
        operator: ndarray, scipy sparse matrix, LinearOperator or matvec callable
        dim: dimension (required for bare callables)
        config: SolverConfig

    Returns:
        Eigenpair; `degenerate` is set when the gap to the next level is below 1e-10

    Raises:
        SolverError: Lanczos exhausted max_iter cycles
    """
    config = config or SolverConfig()
    op = as_operator(operator, dim)
    dim = op.shape[0] if dim is None else dim
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")

    if dim <= config.dense_threshold:
        pair = _dense_lowest(operator, op, dim, config)
    else:
        pair = _lanczos_lowest(op, dim, config)

    if pair.degenerate:
        logger.warning(f"Near-degenerate ground state: gap {pair.gap:.3e} (dim={dim})")
    return pair
