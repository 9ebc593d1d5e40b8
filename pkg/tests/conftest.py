"""Shared fixtures and helpers for the test suite."""
import math

import numpy as np
import pytest
from click.testing import CliRunner

from ecs_hamiltonian import ground_state_ecs
from models import ModelParams
from observables import ScanPoint
from sweep import CriticalPoint


# Atom numbers of the reference finite-size campaign
REFERENCE_N_LIST = [100, 120, 140, 160, 180, 200, 300, 400, 500, 600, 800, 1000]

# Reference fits: log10(gamma_max - gamma_c) and log10(chi_max) linear in log10 N,
# log10(F_min) quadratic in N (constant, linear, quadratic)
GAMMA_SHIFT_FIT = (-0.285094, -0.668233)
CHI_MAX_FIT = (0.579291, 1.36739)
F_MIN_FIT = (0.000351536, -6.90731e-6, -4.23857e-9)


@pytest.fixture(autouse=True)
def serial_workers(monkeypatch):
    """Run sweeps in-process unless a test asks for a pool."""
    monkeypatch.setenv("DICKE_WORKERS", "1")


@pytest.fixture
def runner():
    return CliRunner()


def ground(n_atoms, gamma, n_max=20, **kwargs):
    """ECS ground state at omega = omega0 = 1."""
    return ground_state_ecs(ModelParams(n_atoms=n_atoms, gamma=gamma), n_max, **kwargs)


def reference_criticals(n_list=REFERENCE_N_LIST, gamma_c=0.5):
    """CriticalPoints lying exactly on the reference fits."""
    points = []
    for n_atoms in n_list:
        log_n = math.log10(n_atoms)
        log_f = F_MIN_FIT[0] + F_MIN_FIT[1] * n_atoms + F_MIN_FIT[2] * n_atoms ** 2
        points.append(CriticalPoint(
            n_atoms=n_atoms,
            gamma_max=gamma_c + 10 ** (GAMMA_SHIFT_FIT[0] + GAMMA_SHIFT_FIT[1] * log_n),
            f_min=10 ** log_f,
            chi_max=10 ** (CHI_MAX_FIT[0] + CHI_MAX_FIT[1] * log_n),
            delta_p_peak_gamma=gamma_c + 1.2 * 10 ** (GAMMA_SHIFT_FIT[0] + GAMMA_SHIFT_FIT[1] * log_n),
        ))
    return points


def scan_from_chi(gammas, chi_values, dgamma, delta_p=None):
    """ScanPoints whose fidelity is consistent with the given susceptibilities."""
    delta_p = np.zeros(len(gammas)) if delta_p is None else delta_p
    return [ScanPoint(gamma=float(g), fidelity=1.0 - 0.5 * float(c) * dgamma ** 2, chi_f=float(c),
                      delta_p=float(d), energy=0.0)
            for g, c, d in zip(gammas, chi_values, delta_p)]


def lorentzian_scan(n_atoms, gamma_max, chi_max, half_width=0.1, dgamma=0.001, exponent=2 / 3):
    """
    Susceptibility chi_max / (1 + (N^exponent (gamma - gamma_max))^2) on a grid around gamma_max.

    Its specific susceptibility collapses exactly at nu = exponent.
    """
    steps = int(round(2 * half_width / dgamma))
    gammas = gamma_max - half_width + np.arange(steps + 1) * dgamma
    chi = chi_max / (1.0 + (n_atoms ** exponent * (gammas - gamma_max)) ** 2)
    return scan_from_chi(gammas, chi, dgamma)
