"""
非线性问题：对流项、相容性修正、Picard 迭代与唯一性探测
@author Color2333
"""

from __future__ import annotations

import numpy as np
import pytest

from packages.domain.enums import DataRegime
from packages.domain.exceptions import ConvergenceError, InputError
from packages.domain.schemas import ForcingSpec, ModeForcingSpec, NonlinearConfig, default_forcing_shape
from packages.solver.grid import build_grid
from packages.solver.linear import Forcing, ModeForcing, build_forcing, field_from_arrays, solve_linear_field
from packages.solver.model import FlowParams, resolved_grid_size
from packages.solver.nonlinear import (
    convection_arrays,
    convergence_in_truncation,
    data_regime,
    dealiased_points,
    enforce_compatibility,
    hermitian_defect,
    nonlinear_residual,
    nonlinear_terms,
    picard_solve,
    smallness_threshold,
    uniqueness_probe,
)
from packages.solver.norms import field_difference, projection_norm, sobolev_surrogate

GRID = 24
N = 3


@pytest.fixture
def small_grid():
    return build_grid(GRID)


@pytest.fixture
def cfg():
    return NonlinearConfig(truncation=N, grid_size=GRID)


@pytest.fixture
def params():
    return FlowParams(50.0, 1.0)


def _random_field(grid, rng, active=(1,), swirl=True):
    """Hermitian 随机场，只在 active 及其共轭模态上非零"""
    r = grid.nodes
    phi = np.zeros((2 * N + 1, grid.points), dtype=complex)
    V = np.zeros_like(phi)
    for n in active:
        a, b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        if n == 0:
            a, b = a.real, b.real
        phi[n + N] = a * (1 - r**2) ** 2
        V[n + N] = b * (1 - r**2) * (1 + r**2) if swirl else 0.0
        phi[-n + N] = np.conj(phi[n + N])
        V[-n + N] = np.conj(V[n + N])
    return field_from_arrays(grid, phi, V, True)


def _small_forcing(grid, params, indices=(0, 1)):
    spec = ForcingSpec(
        shape=default_forcing_shape(), indices=list(indices), target_norm=smallness_threshold(params)
    )
    return build_forcing(spec, grid)


class TestCompatibility:
    def _zero_theta(self, grid, values):
        return Forcing(grid, {0: ModeForcing(0, grid.field(np.zeros(grid.points)), grid.field(np.zeros(grid.points)), grid.field(values))})

    def test_linear_profile_removed(self, small_grid):
        F = enforce_compatibility(self._zero_theta(small_grid, small_grid.nodes))
        np.testing.assert_allclose(F.mode(0).theta.values, 0.0, atol=1e-14)

    def test_compatible_profile_unchanged(self, small_grid):
        r = small_grid.nodes
        F = enforce_compatibility(self._zero_theta(small_grid, 4 * r - 5 * r**2))
        np.testing.assert_allclose(F.mode(0).theta.values, 4 * r - 5 * r**2, atol=1e-14)

    def test_zero_unchanged(self, small_grid):
        F = self._zero_theta(small_grid, np.zeros(small_grid.points))
        assert enforce_compatibility(F) is F

    def test_missing_zero_mode(self, small_grid):
        F = Forcing(small_grid, {})
        assert enforce_compatibility(F) is F


class TestConvection:
    def test_dealiased_points(self):
        assert dealiased_points(16) == 50
        assert dealiased_points(3) == 11

    def test_matches_direct_convolution(self, small_grid, rng):
        v = _random_field(small_grid, rng, active=(0, 1))
        arrays = convection_arrays(v)
        r = small_grid.nodes

        def conv(a, b):
            out = np.zeros_like(a)
            for n in range(-N, N + 1):
                for k in range(-N, N + 1):
                    m = n - k
                    if abs(m) <= N:
                        out[n + N] += a[k + N] * b[m + N]
            return out

        expected_r = r * conv(arrays["V"], arrays["V"]) - conv(arrays["vz"], arrays["omega"])
        expected_z = conv(arrays["vr"], arrays["omega"])
        expected_theta = -conv(arrays["vr"], arrays["dr_vtheta"] + arrays["V"]) - conv(
            arrays["vz"], arrays["dz_vtheta"]
        )
        F = nonlinear_terms(v)
        for n in range(-N, N + 1):
            np.testing.assert_allclose(F.mode(n).r.values, expected_r[n + N], atol=1e-11)
            np.testing.assert_allclose(F.mode(n).z.values, expected_z[n + N], atol=1e-11)
            np.testing.assert_allclose(F.mode(n).theta.values, expected_theta[n + N], atol=1e-11)

    def test_mode_support(self, small_grid, rng):
        """只有 ±1 模态时乘积只落在 {−2, 0, 2}"""
        F = nonlinear_terms(_random_field(small_grid, rng, active=(1,)))
        for n in (-3, -1, 1, 3):
            mode = F.mode(n)
            assert max(np.max(np.abs(mode.r.values)), np.max(np.abs(mode.z.values)), np.max(np.abs(mode.theta.values))) < 1e-12
        assert np.max(np.abs(F.mode(2).z.values)) > 0

    def test_swirl_free_field(self, small_grid, rng):
        v = _random_field(small_grid, rng, active=(1,), swirl=False)
        F = nonlinear_terms(v)
        arrays = convection_arrays(v)
        for n in range(-N, N + 1):
            assert np.all(F.mode(n).theta.values == 0)
        assert np.all(arrays["V"] == 0)

    def test_real_field_gives_hermitian_terms(self, small_grid, rng):
        F = nonlinear_terms(_random_field(small_grid, rng, active=(0, 1, 2)))
        assert hermitian_defect(F) < 1e-10


class TestDataRegime:
    def test_small_data(self, small_grid, params):
        assert data_regime(params, _small_forcing(small_grid, params)) is DataRegime.small_data

    def test_outside(self, small_grid, params):
        F = _small_forcing(small_grid, params).scaled(100.0)
        assert data_regime(params, F) is DataRegime.outside

    def test_large_flux(self, small_grid):
        params = FlowParams(1e6, 0.0)
        F = build_forcing(ForcingSpec(shape=default_forcing_shape(), indices=[1], target_norm=1.0), small_grid)
        assert data_regime(params, F) is DataRegime.large_flux

    def test_threshold_override(self, small_grid):
        params = FlowParams(1e6, 0.0)
        F = build_forcing(ForcingSpec(shape=default_forcing_shape(), indices=[1], target_norm=1.0), small_grid)
        assert data_regime(params, F, large_flux_threshold=1e7) is DataRegime.outside
        assert data_regime(params, F, large_flux_threshold=1e6) is DataRegime.large_flux


class TestPicard:
    def test_zero_forcing(self, small_grid, params, cfg):
        v, trace = picard_solve(params, Forcing(small_grid, {}), cfg)
        assert trace.converged
        assert trace.iterations == 1
        assert sobolev_surrogate(v, 2) == 0.0
        assert trace.final_residual == 0.0

    def test_small_data_converges(self, small_grid, params, cfg):
        F = _small_forcing(small_grid, params)
        v, trace = picard_solve(params, F, cfg, jobs=2)
        assert trace.converged
        assert trace.final_residual <= 1e-5
        assert "wall_time" not in trace.to_dict()
        assert v.truncation == N

    def test_linear_solution_is_not_a_fixed_point(self, small_grid, params):
        F = _small_forcing(small_grid, params).scaled(1e3)
        v = solve_linear_field(params, enforce_compatibility(F), truncation=N)
        assert nonlinear_residual(params, v, F) > 1e-6

    def test_iteration_budget(self, small_grid, params):
        F = _small_forcing(small_grid, params)
        cfg = NonlinearConfig(truncation=N, grid_size=GRID, max_iterations=1, tolerance=1e-14)
        with pytest.raises(ConvergenceError) as exc:
            picard_solve(params, F, cfg)
        assert exc.value.trace is not None
        assert exc.value.trace.iterations == 1

    def test_grid_mismatch(self, params):
        F = _small_forcing(build_grid(20), params)
        with pytest.raises(InputError):
            picard_solve(params, F, NonlinearConfig(truncation=N, grid_size=GRID))

    def test_unset_grid_size_accepts_any_grid(self, params):
        F = _small_forcing(build_grid(20), params)
        v, trace = picard_solve(params, F, NonlinearConfig(truncation=N))
        assert trace.converged
        assert v.grid.size == 20

    def test_mode_beyond_truncation(self, small_grid, params, cfg):
        spec = ForcingSpec(modes=[ModeForcingSpec(n=N + 1, r=[1.0])])
        with pytest.raises(InputError):
            picard_solve(params, build_forcing(spec, small_grid), cfg)

    def test_identical_starts(self, small_grid, params, cfg):
        F = _small_forcing(small_grid, params)
        a, _ = picard_solve(params, F, cfg)
        b, _ = picard_solve(params, F, cfg)
        assert sobolev_surrogate(field_difference(a, b), 1.5) == 0.0


class TestUniqueness:
    def test_zero_forcing_returns_to_rest(self, small_grid, params):
        cfg = NonlinearConfig(truncation=N, grid_size=GRID, uniqueness_probe=True)
        report = uniqueness_probe(params, Forcing(small_grid, {}), cfg)
        assert report.conclusive
        assert report.perturbation_norm > 0
        assert report.distance <= 1e-6

    def test_small_data_unique(self, small_grid, params, cfg):
        report = uniqueness_probe(params, _small_forcing(small_grid, params), cfg)
        assert report.conclusive
        assert report.distance <= 1e-6

    @pytest.mark.slow
    def test_truncation_convergence(self, small_grid, params, cfg):
        F = _small_forcing(small_grid, params)
        assert convergence_in_truncation(params, F, cfg) <= 1e-6


def _flux_forcing(params, norm, indices=(0, 1)):
    grid = build_grid(resolved_grid_size(params, max(indices)))
    spec = ForcingSpec(shape=default_forcing_shape(), indices=list(indices), target_norm=norm)
    return build_forcing(spec, grid)


@pytest.mark.slow
class TestLargeFluxPicard:
    """N = 16，网格按 Φ 自适应"""

    def test_small_data_across_fluxes(self):
        ratios = []
        for flux in (1e3, 1e4, 1e5):
            params = FlowParams(flux, 1.0)
            F = _flux_forcing(params, smallness_threshold(params))
            v, trace = picard_solve(params, F, NonlinearConfig())
            assert trace.converged
            assert trace.iterations <= 30
            assert trace.final_residual <= 1e-6
            ratios.append(sobolev_surrogate(v, 1.5) / F.norm())
        assert max(ratios) / min(ratios) <= 3.0

    @pytest.mark.parametrize("flux", [1e4, 1e5])
    def test_projection_decay(self, flux):
        params = FlowParams(flux, 1.0)
        F = _flux_forcing(params, flux ** (1.0 / 32.0))
        v, trace = picard_solve(params, F, NonlinearConfig())
        assert trace.converged
        assert projection_norm(v) * flux ** (7.0 / 12.0) <= 1.0

    def test_large_flux_uniqueness(self):
        params = FlowParams(1e5, 1.0)
        F = _flux_forcing(params, 1e5 ** (1.0 / 32.0))
        report = uniqueness_probe(params, F, NonlinearConfig())
        assert report.conclusive
        assert report.perturbation_norm == pytest.approx(0.1 * 1e5 ** (1.0 / 64.0), rel=1e-12)
        assert report.distance <= 1e-8
