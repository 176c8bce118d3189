"""
估计注册表、单点比值与 (Φ, α, n) 扫描
@author Color2333
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from packages.domain.enums import AlphaMode, EstimateId, EstimateKind, RegimeTag
from packages.domain.exceptions import ConfigError, InputError, RegimeError
from packages.domain.schemas import SweepSpec
from packages.solver.estimates import (
    REGISTRY,
    estimate_ratio,
    evaluate_estimate,
    fit_exponent,
    get_estimate,
    sweep_and_fit,
)
from packages.solver.grid import zeros
from packages.solver.linear import ModeForcing
from packages.solver.model import FlowParams


class TestRegistry:
    def test_every_identifier_registered(self):
        assert set(REGISTRY) == set(EstimateId)

    def test_field_estimates(self):
        assert get_estimate("linear_h32").kind is EstimateKind.field
        assert get_estimate(EstimateId.linear_h2).target_exponent == 0.5

    def test_unknown(self):
        with pytest.raises(ConfigError):
            get_estimate("case99")


class TestEvaluateEstimate:
    def test_zero_mode_closed_form_ratio(self, grid):
        """α = 0，F₀^z = r：∫|𝓛ψ₀|²r = 1/540，‖F*‖² = 1/4"""
        F = (zeros(grid), grid.sample(lambda r: r), zeros(grid))
        ratio = estimate_ratio(FlowParams(1e4, 0.0), 0, F, EstimateId.zero_mode)
        assert ratio == pytest.approx(1 / 135, rel=1e-9)

    def test_zero_data_flag(self, grid):
        forcing = ModeForcing.zero(grid, 0)
        result = evaluate_estimate(FlowParams(1e4, 1.0), forcing, EstimateId.zero_mode)
        assert result.zero_data
        assert result.ratio == 0.0
        assert result.raw == 0.0

    def test_regime_mismatch(self, grid):
        forcing = ModeForcing(0, zeros(grid), grid.sample(lambda r: r), zeros(grid))
        with pytest.raises(RegimeError):
            evaluate_estimate(FlowParams(1e4, 0.0), forcing, EstimateId.small_slip_energy)

    def test_field_estimate_needs_field_entry(self, grid):
        with pytest.raises(ConfigError):
            evaluate_estimate(FlowParams(1e4), ModeForcing.zero(grid, 1), EstimateId.linear_h2)

    def test_small_slip_ratio_finite(self, grid):
        forcing = ModeForcing(1, grid.sample(lambda r: 1 - r**2), zeros(grid), zeros(grid))
        result = evaluate_estimate(FlowParams(1e4, 0.0), forcing, EstimateId.small_slip_energy, 0.1, 0.2)
        assert result.regime is RegimeTag.small_slip
        assert math.isfinite(result.ratio) and result.ratio > 0

    def test_swirl_estimate_uses_swirl_data(self, grid):
        forcing = ModeForcing(1, grid.sample(lambda r: 1 - r**2), zeros(grid), zeros(grid))
        result = evaluate_estimate(FlowParams(1e4, 0.0), forcing, EstimateId.swirl_decay)
        assert result.zero_data


class TestFitExponent:
    @settings(max_examples=25, deadline=None)
    @given(st.floats(min_value=-3.0, max_value=3.0), st.floats(min_value=0.1, max_value=10.0))
    def test_recovers_power_law(self, slope, constant):
        phis = np.array([1e3, 1e4, 1e5, 1e6])
        assert fit_exponent(phis, constant * phis**slope) == pytest.approx(slope, abs=1e-6)

    def test_rejects_nonpositive(self):
        with pytest.raises(InputError):
            fit_exponent([1.0, 2.0, 3.0], [1.0, 0.0, 2.0])

    def test_rejects_short_input(self):
        with pytest.raises(InputError):
            fit_exponent([1.0], [1.0])


class TestSweep:
    def test_needs_three_fluxes(self):
        spec = SweepSpec(estimate=EstimateId.zero_mode, phis=[1e3, 1e4], modes=[0])
        with pytest.raises(ConfigError):
            sweep_and_fit(spec)

    def test_zero_mode_has_no_flux_growth(self):
        spec = SweepSpec(
            estimate=EstimateId.zero_mode, phis=[1e3, 1e4, 1e5], alphas=[0.0, 1.0], modes=[0], grid_size=32
        )
        report = sweep_and_fit(spec, jobs=2)
        assert report.passed
        for exponent in report.exponents.values():
            assert exponent <= 0.05
        rows = report.rows()
        assert list(rows[0]) == ["estimate_id", "phi", "alpha", "n", "ratio", "fitted_exponent", "pass"]
        keys = [(r["phi"], r["alpha"], r["n"]) for r in rows]
        assert keys == sorted(keys)

    def test_out_of_regime_points_excluded(self):
        spec = SweepSpec(
            estimate=EstimateId.small_slip_energy,
            phis=[1e4, 1e5, 1e6],
            alphas=[0.0, 1e3],
            modes=[1],
            grid_size=32,
            delta=0.2,
        )
        report = sweep_and_fit(spec, jobs=2)
        assert all(p.alpha == 0.0 for p in report.points)
        assert {p.alpha for p in report.excluded} == {1e3}
        assert len(report.summary()["excluded"]) == len(report.excluded)

    def test_cube_root_alpha(self):
        spec = SweepSpec(
            estimate=EstimateId.swirl_decay,
            phis=[1e3, 1e4, 1e5],
            alphas=[2.0],
            alpha_mode=AlphaMode.cube_root,
            modes=[1],
            grid_size=32,
        )
        report = sweep_and_fit(spec, jobs=1)
        for point in report.points:
            assert point.alpha == pytest.approx(2.0 * point.phi ** (1 / 3))

    def test_deterministic(self):
        spec = SweepSpec(estimate=EstimateId.zero_mode, phis=[1e3, 1e4, 1e5], alphas=[0.0], modes=[0], grid_size=24)
        assert sweep_and_fit(spec, jobs=3).rows() == sweep_and_fit(spec, jobs=1).rows()

    def test_field_estimate_bounded(self):
        spec = SweepSpec(estimate=EstimateId.linear_h32, phis=[1e3, 1e4, 1e5], alphas=[0.0, 10.0], modes=[1], grid_size=32)
        report = sweep_and_fit(spec, jobs=2)
        assert all(p.n == 0 for p in report.points)
        assert all(e <= 0.15 for e in report.exponents.values())

    @pytest.mark.slow
    def test_swirl_decay_exponent(self):
        spec = SweepSpec(
            estimate=EstimateId.swirl_decay, phis=[1e3, 1e4, 1e5], alphas=[0.0], modes=[1], grid_size=64
        )
        report = sweep_and_fit(spec)
        assert report.exponents[(0.0, 1)] <= -4.0 / 3.0 + 0.15


class TestFluxThreshold:
    def test_threshold_reaches_single_point(self, grid):
        forcing = ModeForcing(1, grid.sample(lambda r: 1 - r**2), zeros(grid), zeros(grid))
        params = FlowParams(1e4, 0.0)
        assert evaluate_estimate(params, forcing, EstimateId.small_slip_energy, 0.1, 0.2).ratio > 0
        with pytest.raises(RegimeError):
            evaluate_estimate(params, forcing, EstimateId.small_slip_energy, 0.1, 0.2, large_flux_threshold=1e5)

    def test_threshold_reaches_sweep(self):
        spec = SweepSpec(
            estimate=EstimateId.small_slip_energy,
            phis=[1e4, 1e5, 1e6],
            alphas=[0.0],
            modes=[1],
            grid_size=32,
            delta=0.2,
            large_flux_threshold=5e4,
        )
        report = sweep_and_fit(spec, jobs=1)
        assert [p.phi for p in report.excluded] == [1e4]
        assert report.excluded[0].regime is RegimeTag.small_flux


class TestSweepDelta:
    def test_default_delta_leaves_group_unfitted(self):
        """δ = 0.1 时 α = 0 的 Z₁ 只含 Φ ≥ 6.4·10⁴ 的两个格点"""
        spec = SweepSpec(estimate=EstimateId.small_slip_energy, alphas=[0.0], modes=[1], grid_size=48)
        report = sweep_and_fit(spec, jobs=2)
        assert not report.passed
        assert report.unfitted == {(0.0, 1): 2}
        unfitted = report.summary()["unfitted"]
        assert unfitted[0]["points"] == 2 and unfitted[0]["reason"]

    def test_sweep_delta_puts_lattice_in_small_slip(self):
        spec = SweepSpec(estimate=EstimateId.small_slip_energy, alphas=[0.0], modes=[1], delta=0.5)
        report = sweep_and_fit(spec, jobs=2)
        assert not report.excluded
        assert {p.regime for p in report.points} == {RegimeTag.small_slip}
        assert report.exponents[(0.0, 1)] <= -4.0 / 3.0 + 0.15
        assert report.passed


@pytest.mark.slow
class TestAcceptanceLattices:
    """Φ ∈ {10³, 10⁴, 10⁵, 10⁶} 格点上的指数与 α 一致性，网格按 Φ 自适应"""

    def test_intermediate_l2_at_cube_root_slip(self):
        spec = SweepSpec(
            estimate=EstimateId.intermediate_l2,
            alphas=[1.0],
            alpha_mode=AlphaMode.cube_root,
            modes=[1],
        )
        report = sweep_and_fit(spec)
        assert len(report.points) == 4
        assert report.exponents[(1.0, 1)] <= -5.0 / 3.0 + 0.15
        assert report.passed

    def test_swirl_decay(self):
        spec = SweepSpec(estimate=EstimateId.swirl_decay, alphas=[0.0, 1.0], modes=[1])
        report = sweep_and_fit(spec)
        for exponent in report.exponents.values():
            assert exponent <= -4.0 / 3.0 + 0.15

    def test_zero_mode(self):
        report = sweep_and_fit(SweepSpec(estimate=EstimateId.zero_mode, modes=[0]))
        assert all(e <= 0.15 for e in report.exponents.values())
        assert report.passed

    @pytest.mark.parametrize(
        "estimate,modes",
        [
            (EstimateId.zero_mode, [0]),
            (EstimateId.medium_energy, [1]),
            (EstimateId.linear_h32, [1]),
        ],
    )
    def test_alpha_spread(self, estimate, modes):
        spec = SweepSpec(estimate=estimate, phis=[1e4, 1e5, 1e6], modes=modes)
        report = sweep_and_fit(spec)
        n = 0 if get_estimate(estimate).kind is EstimateKind.field else modes[0]
        for phi in (1e4, 1e6):
            assert len([p for p in report.points if p.phi == phi]) == 5
            assert report.spreads[(phi, n)] <= 50.0

    def test_linear_h2_growth_bound(self):
        spec = SweepSpec(estimate=EstimateId.linear_h2, alphas=[0.0, 1.0], modes=[1, 2])
        report = sweep_and_fit(spec)
        for setting in (0.0, 1.0):
            ratios = [p.result.ratio for p in report.points if p.alpha_setting == setting]
            assert len(ratios) == 4
            assert max(ratios) / min(ratios) <= 50.0
