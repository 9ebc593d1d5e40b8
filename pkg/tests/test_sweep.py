"""Tests for coupling sweeps and critical-point location."""
import dataclasses

import numpy as np
import pytest

import sweep
from conftest import scan_from_chi
from fock_oracle import fock_ground_state
from models import BoundaryError, InconsistencyError, ModelParams, SolverError, SweepError
from observables import ScanPoint
from sweep import SweepConfig, gamma_grid, locate_critical, refine_peak, run_critical, run_sweep


def parabola_scan(center=0.52, start=0.5, end=0.54, dgamma=0.001):
    config = SweepConfig(gamma_start=start, gamma_end=end, dgamma=dgamma)
    gammas = gamma_grid(config)[:-1]
    return scan_from_chi(gammas, 1.0 - (gammas - center) ** 2, dgamma), config


class TestSweepConfig:
    """Tests for grid validation."""

    @pytest.mark.parametrize("kwargs", [
        {"gamma_start": -0.1, "gamma_end": 0.5},
        {"gamma_start": 0.6, "gamma_end": 0.5},
        {"gamma_start": 0.5, "gamma_end": 0.5},
        {"gamma_start": 0.5, "gamma_end": 0.6, "dgamma": 0.0},
        {"gamma_start": 0.5, "gamma_end": 0.6, "dgamma": 0.05},
        {"gamma_start": 0.5, "gamma_end": 0.6, "n_max": -1},
    ])
    def test_invalid_grid(self, kwargs):
        """Test that malformed grids raise ValueError."""
        with pytest.raises(ValueError):
            SweepConfig(**kwargs)

    def test_grid_length(self):
        """Test K + 1 grid couplings for K rows on 0.5 -> 0.6 with dgamma = 0.001."""
        config = SweepConfig(gamma_start=0.5, gamma_end=0.6)
        grid = gamma_grid(config)
        assert config.steps == 100
        assert len(grid) == 101
        assert grid[0] == 0.5
        assert grid[-1] == pytest.approx(0.6, abs=1e-12)

    def test_decimal_step_accepted(self):
        """Test that exactly ten decimal steps are allowed."""
        assert SweepConfig(gamma_start=0.0, gamma_end=0.1, dgamma=0.01).steps == 10


class TestRunSweep:
    """Tests for sweeps over real ground states."""

    def test_rows_and_ranges(self):
        """Test one row per step with F in [0, 1] and chi >= 0."""
        config = SweepConfig(gamma_start=0.4, gamma_end=0.7, dgamma=0.01, n_max=12)
        points = run_sweep(ModelParams(n_atoms=6), config)
        assert len(points) == 30
        assert points[0].gamma == 0.4
        assert all(0.0 <= p.fidelity <= 1.0 and p.chi_f >= 0.0 for p in points)
        assert all(p.usable for p in points)

    def test_deep_normal_phase(self):
        """Test F ~ 1 far below gamma_c and a boundary error for the extremum."""
        config = SweepConfig(gamma_start=0.0, gamma_end=0.01, dgamma=0.001, n_max=10)
        points = run_sweep(ModelParams(n_atoms=2), config)
        assert all(p.fidelity >= 0.9999 for p in points)
        with pytest.raises(BoundaryError):
            locate_critical(points, config, n_atoms=2)

    def test_independent_of_worker_count(self, monkeypatch):
        """Test that a pool of two workers reproduces the serial sweep."""
        config = SweepConfig(gamma_start=0.4, gamma_end=0.6, dgamma=0.01, n_max=10)
        params = ModelParams(n_atoms=4)
        serial = run_sweep(params, config, workers=1)
        monkeypatch.delenv("DICKE_WORKERS")
        pooled = run_sweep(params, config, workers=2)
        assert [p.gamma for p in pooled] == [p.gamma for p in serial]
        assert np.allclose([p.chi_f for p in pooled], [p.chi_f for p in serial], rtol=0, atol=1e-9)
        assert np.allclose([p.energy for p in pooled], [p.energy for p in serial], rtol=0, atol=1e-12)

    def test_failed_points_reported(self, monkeypatch):
        """Test that a failing solve marks both rows that need it and raises SweepError."""
        solve = sweep.ground_state_ecs

        def flaky(params, n_max, **kwargs):
            if abs(params.gamma - 0.45) < 1e-9:
                raise SolverError("no convergence", best_residual=1e-3, iterations=500)
            return solve(params, n_max, **kwargs)

        monkeypatch.setattr(sweep, "ground_state_ecs", flaky)
        config = SweepConfig(gamma_start=0.4, gamma_end=0.5, dgamma=0.01, n_max=8)
        with pytest.raises(SweepError) as excinfo:
            run_sweep(ModelParams(n_atoms=4), config)
        error = excinfo.value
        assert error.failed == pytest.approx([0.44, 0.45])
        assert len(error.points) == 10
        assert [p.failed for p in error.points].count(True) == 2
        assert error.points[3].usable

    def test_matches_oracle_susceptibility(self):
        """Test chi_f for N = 2 against Fock-basis ground states."""
        dgamma = 0.01
        config = SweepConfig(gamma_start=0.4, gamma_end=0.7, dgamma=dgamma, n_max=40)
        points = run_sweep(ModelParams(n_atoms=2), config)

        vectors = [fock_ground_state(ModelParams(n_atoms=2, gamma=g), 40)[1] for g in gamma_grid(config)]
        oracle = [2.0 * (1.0 - min(1.0, abs(np.dot(a, b)))) / dgamma ** 2 for a, b in zip(vectors, vectors[1:])]

        for point, expected in zip(points, oracle):
            assert point.chi_f == pytest.approx(expected, rel=1e-5, abs=1e-6)
        assert int(np.argmax([p.chi_f for p in points])) == int(np.argmax(oracle))


class TestLocateCritical:
    """Tests for the extremum search on synthetic and real scans."""

    def test_parabola_peak(self):
        """Test gamma_max = 0.52 for chi = 1 - (gamma - 0.52)^2."""
        points, config = parabola_scan()
        critical = locate_critical(points, config, n_atoms=50)
        assert critical.gamma_max == pytest.approx(0.52, abs=1e-12)
        assert critical.chi_max == pytest.approx(1.0)
        assert not critical.refined
        assert not critical.flagged

    def test_peak_at_edge(self):
        """Test that a monotone susceptibility raises BoundaryError."""
        config = SweepConfig(gamma_start=0.5, gamma_end=0.52, dgamma=0.001)
        gammas = gamma_grid(config)[:-1]
        with pytest.raises(BoundaryError):
            locate_critical(scan_from_chi(gammas, gammas * 10, 0.001), config, n_atoms=5)

    def test_inconsistent_extrema(self):
        """Test that separated F minimum and chi maximum raise InconsistencyError."""
        points, config = parabola_scan()
        points[30] = dataclasses.replace(points[30], fidelity=0.5)
        with pytest.raises(InconsistencyError):
            locate_critical(points, config, n_atoms=50)

    def test_degenerate_neighbour_flagged(self):
        """Test that degenerate points are excluded and flag the peak."""
        points, config = parabola_scan()
        points[21] = dataclasses.replace(points[21], degenerate=True)
        critical = locate_critical(points, config, n_atoms=50)
        assert critical.gamma_max == pytest.approx(0.52, abs=1e-12)
        assert critical.flagged

    def test_degenerate_point_ignored_as_peak(self):
        """Test that a degenerate spike never becomes the maximum."""
        points, config = parabola_scan()
        points[5] = ScanPoint(gamma=points[5].gamma, fidelity=0.0, chi_f=1e9, delta_p=0.0,
                              energy=0.0, degenerate=True)
        assert locate_critical(points, config, n_atoms=50).gamma_max == pytest.approx(0.52, abs=1e-12)

    def test_delta_p_peak(self):
        """Test that the Delta-P maximum is reported separately."""
        points, config = parabola_scan()
        points[25] = dataclasses.replace(points[25], delta_p=1e-3)
        assert locate_critical(points, config, n_atoms=50).delta_p_peak_gamma == pytest.approx(0.525, abs=1e-12)

    def test_too_few_points(self):
        """Test that fewer than five points are rejected."""
        points, config = parabola_scan()
        with pytest.raises(ValueError):
            locate_critical(points[:4], config)


class TestRefinement:
    """Tests for golden-section peak refinement."""

    def test_refine_peak(self):
        """Test that refinement finds an off-grid maximum within 1e-4."""
        gamma, chi = refine_peak(lambda g: 1.0 - (g - 0.5203) ** 2, (0.519, 0.520, 0.521), 0.001)
        assert gamma == pytest.approx(0.5203, abs=1e-4)
        assert chi == pytest.approx(1.0, abs=1e-8)

    def test_locate_with_refinement(self):
        """Test that locate_critical uses the probe when refinement is on."""
        points, config = parabola_scan(center=0.5203)
        config = dataclasses.replace(config, refine=True)
        critical = locate_critical(points, config, n_atoms=50, chi_at=lambda g: 1.0 - (g - 0.5203) ** 2)
        assert critical.refined
        assert critical.gamma_max == pytest.approx(0.5203, abs=1e-4)

    def test_refinement_refused_gracefully(self):
        """Test that a probe that breaks the bracket leaves the grid value."""
        points, config = parabola_scan()
        config = dataclasses.replace(config, refine=True)
        critical = locate_critical(points, config, n_atoms=50, chi_at=lambda g: g)
        assert not critical.refined
        assert critical.gamma_max == pytest.approx(0.52, abs=1e-12)


class TestReferenceRegime:
    """Sweeps at N = 100 with the production grid."""

    def test_hundred_atoms(self):
        """Test gamma_max, chi_max and the Delta-P peak for N = 100, n_max = 8."""
        config = SweepConfig(gamma_start=0.5, gamma_end=0.6, dgamma=0.001, n_max=8)
        points, critical = run_critical(ModelParams(n_atoms=100), config)
        assert len(points) == 100
        assert critical.gamma_max == pytest.approx(0.523, abs=0.0015)
        assert critical.chi_max == pytest.approx(2061.0, rel=0.15)
        assert critical.delta_p_peak_gamma == pytest.approx(0.526, abs=0.002)
        assert abs(critical.delta_p_peak_gamma - critical.gamma_max) <= 0.005
        assert critical.f_min < 1.0
