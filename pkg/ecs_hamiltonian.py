"""
Dicke Hamiltonian in the extended bosonic coherent-state (ECS) basis.

The basis is |N; j, m> with m an eigenvalue of J_x and N counting excitations of
the displaced boson A = a + g J_x, g = 2 gamma / (omega sqrt(N_atoms)). In this
basis the coupling term is absorbed into the diagonal

    omega N - 4 gamma^2 m^2 / (N_atoms omega)

and omega0 J_z couples only neighbouring m, through the overlap of Fock states
displaced by beta = g (m - m'). The matrix is therefore block-tridiagonal in m.

J_x eigenvectors are fixed as the columns of exp(-i pi J_y / 2), which makes
J_z = -J_x^(standard form) in this basis, and parity acts as
Pi |N; m> = (-1)^N |N; -m>.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse
from scipy.sparse.linalg import LinearOperator
from scipy.special import eval_genlaguerre, gammaln

from eigensolver import SolverConfig, lowest_eigenpair
from models import (WaveFunction, basis_dimension, check_dimension, fix_phase)

logger = logging.getLogger(__name__)

PARITY_SECTORS = ("even", "odd")


@lru_cache(maxsize=4096)
def displaced_fock_overlap(n_row, n_col, beta):
    """
    Matrix element <n_row| D(beta) |n_col> of the displacement operator for real beta.

    Uses the associated-Laguerre closed form with the factorial prefactor in
    log space, so it stays finite for n up to several hundred.
    """
    if n_row < 0 or n_col < 0:
        raise ValueError(f"Fock indices must be non-negative, got ({n_row}, {n_col})")
    if not math.isfinite(beta):
        raise ValueError(f"beta must be finite, got {beta}")
    if beta == 0.0:
        return 1.0 if n_row == n_col else 0.0

    low, high = min(n_row, n_col), max(n_row, n_col)
    k = high - low
    x = beta * beta
    laguerre = eval_genlaguerre(low, k, x)
    log_prefactor = k * math.log(abs(beta)) - 0.5 * x + 0.5 * (gammaln(low + 1) - gammaln(high + 1))
    # (beta)^k above the diagonal of the row index, (-beta)^k below it
    sign = math.copysign(1.0, beta) if n_row >= n_col else -math.copysign(1.0, beta)
    return float(sign ** k * laguerre * math.exp(log_prefactor))


def displacement_block(n_rows, n_cols, beta):
    """Dense block of displaced-Fock overlaps <r| D(beta) |c>, r < n_rows, c < n_cols."""
    if beta == 0.0:
        return np.eye(n_rows, n_cols)
    rows = np.arange(n_rows)[:, None]
    cols = np.arange(n_cols)[None, :]
    low = np.minimum(rows, cols)
    high = np.maximum(rows, cols)
    k = high - low
    x = beta * beta
    laguerre = eval_genlaguerre(low, k, x)
    log_prefactor = k * math.log(abs(beta)) - 0.5 * x + 0.5 * (gammaln(low + 1) - gammaln(high + 1))
    base = np.where(rows >= cols, math.copysign(1.0, beta), -math.copysign(1.0, beta))
    sign = np.where(k % 2 == 0, 1.0, base)
    return sign * laguerre * np.exp(log_prefactor)


def spin_coupling_factors(n_atoms, scale=1.0):
    """
    <m| J_z |m+1> in the J_x eigenbasis, times scale, for m = -j .. j-1.

    Equal to -(1/2) sqrt(j(j+1) - m(m+1)).
    """
    j = n_atoms / 2
    m = -j + np.arange(n_atoms)
    return -0.5 * scale * np.sqrt(j * (j + 1) - m * (m + 1))


@dataclass(frozen=True, eq=False)
class EcsMatrix:
    """
    Block-tridiagonal ECS Hamiltonian.

    The coupling block between m and m+1 is spin_factors[k] * overlap, with a
    single displaced-Fock overlap matrix because m' - m = 1 for every block.
    """
    params: object
    n_max: int
    diagonal: np.ndarray
    spin_factors: np.ndarray
    overlap: np.ndarray

    @property
    def dimension(self):
        return self.diagonal.shape[0]

    @property
    def n_spin(self):
        return self.params.n_atoms + 1

    @property
    def block_size(self):
        return self.n_max + 1

    @property
    def blocks(self):
        """Coupling blocks linking m to m+1, shape (N_atoms, n_max+1, n_max+1)."""
        return self.spin_factors[:, None, None] * self.overlap[None, :, :]

    def matmat(self, X):
        X = np.asarray(X, dtype=float)
        columns = X.shape[1]
        Xr = X.reshape(self.n_spin, self.block_size, columns)
        Y = self.diagonal.reshape(self.n_spin, self.block_size, 1) * Xr
        if self.n_spin > 1:
            s = self.spin_factors[:, None, None]
            Y[:-1] += s * np.einsum("ab,kbc->kac", self.overlap, Xr[1:])
            Y[1:] += s * np.einsum("ba,kbc->kac", self.overlap, Xr[:-1])
        return Y.reshape(self.dimension, columns)

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        return self.matmat(x.reshape(-1, 1)).reshape(-1)

    def as_operator(self):
        return LinearOperator((self.dimension, self.dimension), matvec=self.matvec,
                              rmatvec=self.matvec, matmat=self.matmat, dtype=float)

    def to_dense(self):
        H = np.diag(self.diagonal)
        size = self.block_size
        for k, block in enumerate(self.blocks):
            rows = slice(k * size, (k + 1) * size)
            cols = slice((k + 1) * size, (k + 2) * size)
            H[rows, cols] = block
            H[cols, rows] = block.T
        return H

    def __repr__(self):
        return f'<EcsMatrix dim={self.dimension} n_max={self.n_max} {self.params!r}>'


def ecs_diagonal(params, n_max):
    j = params.j
    m = -j + np.arange(params.n_atoms + 1)
    n_exc = np.arange(n_max + 1)
    shift = 4.0 * params.gamma ** 2 * m ** 2 / (params.n_atoms * params.omega)
    return (params.omega * n_exc[None, :] - shift[:, None]).reshape(-1)


def build_ecs_hamiltonian(params, n_max):
    """
    Assemble the Dicke Hamiltonian in the ECS basis truncated at n_max displaced excitations.

    Raises:
        DimensionError: (n_max + 1)(N + 1) exceeds the configured ceiling
    """
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    check_dimension(basis_dimension(params.n_atoms, n_max))
    # beta = g (m - m') with m' = m + 1
    overlap = displacement_block(n_max + 1, n_max + 1, -params.displacement)
    matrix = EcsMatrix(
        params=params,
        n_max=n_max,
        diagonal=ecs_diagonal(params, n_max),
        spin_factors=spin_coupling_factors(params.n_atoms, params.omega0),
        overlap=overlap,
    )
    logger.debug(f"Built {matrix!r}")
    return matrix


def parity_projector(n_atoms, n_max, sector="even"):
    """
    Sparse isometry Q (dimension x sector dimension) onto a parity sector.

    Columns are (|N;m> + s (-1)^N |N;-m>)/sqrt(2) for m > 0, with s = +1 for the
    even sector and -1 for the odd one, plus |N;0> when (-1)^N = s.
    """
    if sector not in PARITY_SECTORS:
        raise ValueError(f"Unknown parity sector {sector!r}")
    s = 1 if sector == "even" else -1
    size = n_max + 1
    rows, cols, vals = [], [], []
    column = 0
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for twice_m in range(n_atoms % 2, n_atoms + 1, 2):
        plus = ((twice_m + n_atoms) // 2) * size
        minus = ((n_atoms - twice_m) // 2) * size
        for n_exc in range(size):
            sign = s * (-1) ** n_exc
            if twice_m == 0:
                if sign == 1:
                    rows.append(plus + n_exc)
                    cols.append(column)
                    vals.append(1.0)
                    column += 1
                continue
            rows.extend([plus + n_exc, minus + n_exc])
            cols.extend([column, column])
            vals.extend([inv_sqrt2, sign * inv_sqrt2])
            column += 1
    dimension = basis_dimension(n_atoms, n_max)
    return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(dimension, column))


def sector_operator(matrix, projector):
    """Q^T H Q as a LinearOperator."""
    def matmat(X):
        return projector.T @ matrix.matmat(projector @ X)

    def matvec(x):
        return projector.T @ matrix.matvec(projector @ x)

    size = projector.shape[1]
    return LinearOperator((size, size), matvec=matvec, rmatvec=matvec, matmat=matmat, dtype=float)


def ground_state_ecs(params, n_max, parity="even", solver=None):
    """
    Ground state of the ECS Hamiltonian.

    With parity="even" (default) the solve runs inside the even parity sector,
    which holds the Dicke ground state and stays non-degenerate above the
    critical coupling. parity=None solves the full truncated space.

    Raises:
        SolverError: the eigensolver did not converge
    """
    matrix = build_ecs_hamiltonian(params, n_max)
    if parity is None:
        operator = matrix.as_operator()
        projector = None
    else:
        projector = parity_projector(params.n_atoms, n_max, parity)
        operator = sector_operator(matrix, projector)

    pair = lowest_eigenpair(operator, operator.shape[0], solver or SolverConfig())
    vector = pair.vector if projector is None else projector @ pair.vector
    logger.debug(f"Ground state N={params.n_atoms} gamma={params.gamma} n_max={n_max}: "
                 f"E={pair.value:.15g} residual={pair.residual:.2e} via {pair.method}")
    return WaveFunction(
        coeffs=fix_phase(vector),
        energy=pair.value,
        n_max=n_max,
        params=params,
        degenerate=pair.degenerate,
        residual=pair.residual,
        iterations=pair.iterations,
        parity=parity,
    )


def mean_photon_number(psi):
    """
    <a^dagger a> of an ECS state.

    On the sector m, a = A - g m, so a^dagger a = A^dagger A - g m (A + A^dagger) + g^2 m^2.
    """
    C = psi.layers()
    g = psi.params.displacement
    m = -psi.params.j + np.arange(psi.n_atoms + 1)
    n_exc = np.arange(psi.n_max + 1)
    number = float(np.sum(C ** 2 * n_exc[None, :]))
    # <A + A^dagger> within each m row: 2 sum_N sqrt(N+1) C_N C_{N+1}
    ladder = 2.0 * np.sum(np.sqrt(n_exc[1:])[None, :] * C[:, :-1] * C[:, 1:], axis=1)
    cross = float(np.sum(m * ladder))
    spread = float(np.sum(m ** 2 * np.sum(C ** 2, axis=1)))
    return number - g * cross + g * g * spread


def mean_jz(psi):
    """<J_z> of an ECS state, through the spin-coupling blocks at unit omega0."""
    C = psi.layers()
    overlap = displacement_block(psi.n_max + 1, psi.n_max + 1, -psi.params.displacement)
    factors = spin_coupling_factors(psi.n_atoms)
    pairs = np.einsum("ka,ab,kb->k", C[:-1], overlap, C[1:])
    return float(2.0 * np.sum(factors * pairs))
