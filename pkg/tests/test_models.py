"""Tests for model parameters, basis indexing and wave functions."""
import math

import numpy as np
import pytest

from models import (DimensionError, EcsIndex, ModelParams, WaveFunction, basis_dimension,
                    basis_enumerate, check_dimension, critical_coupling, fix_phase, index_of)


class TestModelParams:
    """Tests for parameter validation and derived quantities."""

    @pytest.mark.parametrize("kwargs", [
        {"omega": 0.0},
        {"omega": -1.0},
        {"omega0": -0.1},
        {"n_atoms": 0},
        {"n_atoms": 2.5},
        {"gamma": -0.01},
    ])
    def test_invalid_parameters_rejected(self, kwargs):
        """Test that non-physical parameters raise ValueError."""
        with pytest.raises(ValueError):
            ModelParams(**kwargs)

    def test_critical_coupling_at_resonance(self):
        """Test that gamma_c = 0.5 for omega = omega0 = 1."""
        assert critical_coupling(ModelParams()) == 0.5
        assert ModelParams().critical_coupling() == 0.5

    def test_critical_coupling_off_resonance(self):
        """Test gamma_c = sqrt(omega omega0) / 2."""
        assert critical_coupling(ModelParams(omega=4.0, omega0=1.0)) == 1.0
        assert math.isclose(critical_coupling(ModelParams(omega=2.0, omega0=0.5)), 0.5)

    def test_spin_length_and_displacement(self):
        """Test j = N/2 and g = 2 gamma / (omega sqrt(N))."""
        params = ModelParams(n_atoms=4, gamma=0.5)
        assert params.j == 2.0
        assert math.isclose(params.displacement, 0.5)

    def test_with_gamma_returns_copy(self):
        """Test that with_gamma leaves the original untouched."""
        params = ModelParams(n_atoms=10, gamma=0.1)
        shifted = params.with_gamma(0.6)
        assert shifted.gamma == 0.6
        assert params.gamma == 0.1
        assert shifted.n_atoms == 10


class TestBasis:
    """Tests for the ECS basis enumeration."""

    def test_enumeration_order_and_size(self):
        """Test m outer (ascending) and N inner ordering."""
        basis = basis_enumerate(2, 1)
        assert len(basis) == basis_dimension(2, 1) == 6
        assert basis[0] == EcsIndex(-2, 0)
        assert basis[1] == EcsIndex(-2, 1)
        assert basis[2] == EcsIndex(0, 0)
        assert basis[-1] == EcsIndex(2, 1)
        assert basis == sorted(basis)

    def test_half_integer_spin(self):
        """Test that odd N gives half-integer m values."""
        basis = basis_enumerate(3, 0)
        assert [index.m for index in basis] == [-1.5, -0.5, 0.5, 1.5]

    @pytest.mark.parametrize("n_atoms,n_max", [(1, 0), (2, 3), (5, 4), (8, 2)])
    def test_index_of_inverts_enumeration(self, n_atoms, n_max):
        """Test that index_of is the inverse of basis_enumerate."""
        for position, index in enumerate(basis_enumerate(n_atoms, n_max)):
            assert index_of(n_atoms, n_max, index) == position

    def test_index_outside_basis(self):
        """Test that foreign indices raise DimensionError."""
        with pytest.raises(DimensionError):
            index_of(2, 1, EcsIndex(4, 0))
        with pytest.raises(DimensionError):
            index_of(2, 1, EcsIndex(1, 0))
        with pytest.raises(DimensionError):
            index_of(2, 1, EcsIndex(0, 2))

    def test_dimension_ceiling(self):
        """Test that oversized bases are refused before allocation."""
        assert check_dimension(100, ceiling=100) == 100
        with pytest.raises(DimensionError):
            check_dimension(101, ceiling=100)
        with pytest.raises(DimensionError):
            basis_enumerate(10, 10, ceiling=100)


class TestWaveFunction:
    """Tests for the wave function container."""

    def test_fix_phase_normalizes_and_orients(self):
        """Test that the largest component ends up positive."""
        assert np.allclose(fix_phase([3.0, -4.0]), [-0.6, 0.8])
        assert np.allclose(fix_phase([-3.0, 4.0]), [-0.6, 0.8])

    def test_shape_checked(self):
        """Test that coefficient length must match the basis."""
        with pytest.raises(DimensionError):
            WaveFunction(coeffs=np.ones(5), energy=0.0, n_max=1, params=ModelParams(n_atoms=2))

    def test_coefficients_read_only(self):
        """Test that coefficients cannot be modified in place."""
        psi = WaveFunction(coeffs=np.eye(6)[0], energy=-1.0, n_max=1, params=ModelParams(n_atoms=2))
        with pytest.raises(ValueError):
            psi.coeffs[0] = 2.0

    def test_layers_view(self):
        """Test the m-by-N reshaping of the coefficients."""
        coeffs = np.arange(6, dtype=float)
        psi = WaveFunction(coeffs=coeffs, energy=0.0, n_max=1, params=ModelParams(n_atoms=2))
        layers = psi.layers()
        assert layers.shape == (3, 2)
        assert layers[1, 0] == 2.0
        assert psi.same_layout(psi)
