"""
Brute-force Dicke Hamiltonian in the plain Fock x J_z product basis.

Used only to validate the ECS build on small atom numbers. Basis order matches
the ECS layout: m_z outer (ascending from -j), photon number inner.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from app import config
from ecs_hamiltonian import displacement_block
from models import SolverError, check_dimension, fix_phase

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class FockIndex:
    """Product state |n> (x) |j, m_z>; m_z stored as twice_mz."""
    twice_mz: int
    photons: int

    @property
    def mz(self):
        return self.twice_mz / 2


def fock_enumerate(n_atoms, photon_cutoff):
    return [FockIndex(twice_mz, n)
            for twice_mz in range(-n_atoms, n_atoms + 1, 2)
            for n in range(photon_cutoff + 1)]


def _check_oracle_size(params, photon_cutoff):
    if photon_cutoff < 1:
        raise ValueError(f"photon_cutoff must be >= 1, got {photon_cutoff}")
    limit = config["ORACLE_MAX_ATOMS"]
    if params.n_atoms > limit:
        raise ValueError(f"The Fock oracle is limited to N <= {limit}, got N={params.n_atoms}")
    check_dimension((photon_cutoff + 1) * (params.n_atoms + 1))


def spin_operators(n_atoms):
    """J_z and J_+ + J_- as sparse matrices on m_z = -j .. j."""
    j = n_atoms / 2
    mz = -j + np.arange(n_atoms + 1)
    jz = scipy.sparse.diags(mz)
    # <m+1| J_+ |m> = sqrt(j(j+1) - m(m+1))
    raising = np.sqrt(j * (j + 1) - mz[:-1] * (mz[:-1] + 1))
    jx2 = scipy.sparse.diags([raising, raising], [-1, 1])
    return jz, jx2


def boson_operators(photon_cutoff):
    """a^dagger a and a + a^dagger on n = 0 .. photon_cutoff."""
    n = np.arange(photon_cutoff + 1)
    number = scipy.sparse.diags(n.astype(float))
    ladder = np.sqrt(n[1:].astype(float))
    position = scipy.sparse.diags([ladder, ladder], [-1, 1])
    return number, position


def build_fock_hamiltonian(params, photon_cutoff):
    """
    H = omega a^dagger a + omega0 J_z + gamma / sqrt(N) (a + a^dagger)(J_+ + J_-).

    Returns an exactly symmetric scipy CSR matrix.
    """
    _check_oracle_size(params, photon_cutoff)
    jz, jx2 = spin_operators(params.n_atoms)
    number, position = boson_operators(photon_cutoff)
    spin_identity = scipy.sparse.identity(params.n_atoms + 1)
    boson_identity = scipy.sparse.identity(photon_cutoff + 1)
    coupling = params.gamma / math.sqrt(params.n_atoms)
    H = (params.omega * scipy.sparse.kron(spin_identity, number)
         + params.omega0 * scipy.sparse.kron(jz, boson_identity)
         + coupling * scipy.sparse.kron(jx2, position))
    return H.tocsr()


def fock_ground_state(params, photon_cutoff):
    """Lowest eigenpair by dense symmetric diagonalization; vector normalized and phase-fixed."""
    H = build_fock_hamiltonian(params, photon_cutoff)
    try:
        values, vectors = scipy.linalg.eigh(H.toarray(), subset_by_index=[0, 0])
    except (np.linalg.LinAlgError, ValueError) as e:
        raise SolverError(f"Dense oracle diagonalization failed: {str(e)}") from e
    return float(values[0]), fix_phase(vectors[:, 0])


def default_photon_cutoff(params):
    return 20 + math.ceil(8.0 * params.gamma ** 2 * params.n_atoms / params.omega ** 2)


def converged_fock_ground_state(params, tol=1e-10, max_doublings=4):
    """
    Oracle ground state with the photon cutoff doubled until the energy moves by less than tol.

    Returns:
        (energy, vector, photon_cutoff)
    """
    cutoff = default_photon_cutoff(params)
    energy, vector = fock_ground_state(params, cutoff)
    for _ in range(max_doublings):
        next_energy, next_vector = fock_ground_state(params, 2 * cutoff)
        shift = abs(energy - next_energy)
        energy, vector, cutoff = next_energy, next_vector, 2 * cutoff
        if shift < tol:
            return energy, vector, cutoff
    logger.warning(f"Oracle cutoff {cutoff} still moving the energy for {params!r}")
    return energy, vector, cutoff


def parity_expectation(vector, n_atoms, photon_cutoff):
    """<Pi> with Pi = exp(i pi (a^dagger a + J_z + j)), diagonal in this basis."""
    n = np.arange(photon_cutoff + 1)
    shifted_mz = np.arange(n_atoms + 1)  # m_z + j
    signs = (-1.0) ** (shifted_mz[:, None] + n[None, :])
    probabilities = np.asarray(vector).reshape(n_atoms + 1, photon_cutoff + 1) ** 2
    return float(np.sum(signs * probabilities))


def photon_distribution(vector, n_atoms, photon_cutoff):
    """P(n) of an oracle state."""
    return np.sum(np.asarray(vector).reshape(n_atoms + 1, photon_cutoff + 1) ** 2, axis=0)


def spin_rotation(n_atoms):
    """
    Real orthogonal exp(-i pi J_y / 2) on m_z = -j .. j.

    Column k is the J_x eigenvector with eigenvalue -j + k, in the phase
    convention the ECS basis is built on.
    """
    j = n_atoms / 2
    mz = -j + np.arange(n_atoms + 1)
    raising = np.sqrt(j * (j + 1) - mz[:-1] * (mz[:-1] + 1))
    # -i J_y = (J_- - J_+) / 2
    generator = np.diag(raising, -1) - np.diag(raising, 1)
    generator = -0.5 * generator
    return scipy.linalg.expm((math.pi / 2) * generator)


def fock_to_ecs(vector, params, photon_cutoff, n_max):
    """
    Coefficients of an oracle state on the ECS basis truncated at n_max.

    C_{N,m} = sum_n <N| D(g m) |n> sum_{m_z} <m_z|m>_x psi(n, m_z)
    """
    psi = np.asarray(vector).reshape(params.n_atoms + 1, photon_cutoff + 1)
    rotated = spin_rotation(params.n_atoms).T @ psi  # rows m (J_x), columns n
    g = params.displacement
    j = params.j
    coeffs = np.empty((params.n_atoms + 1, n_max + 1))
    for k in range(params.n_atoms + 1):
        m = -j + k
        coeffs[k] = displacement_block(n_max + 1, photon_cutoff + 1, g * m) @ rotated[k]
    return coeffs.reshape(-1)
