"""
径向离散测试：节点、求积、微分矩阵与 Δ₄
"""

from __future__ import annotations

import numpy as np
import pytest

from packages.domain.exceptions import ConfigError, InputError
from packages.solver.grid import (
    apply_delta4,
    build_grid,
    clenshaw_curtis,
    interpolate,
    refine,
    weighted_integral,
)


class TestNodesAndQuadrature:
    def test_nodes_ascending_with_exact_endpoints(self, grid):
        assert grid.nodes[0] == 0.0
        assert grid.nodes[-1] == 1.0
        assert np.all(np.diff(grid.nodes) > 0)
        assert grid.points == grid.size + 1

    def test_rejects_tiny_grid(self):
        with pytest.raises(ConfigError):
            build_grid(3)

    def test_build_grid_is_cached(self):
        assert build_grid(24) is build_grid(24)

    def test_arrays_are_read_only(self, grid):
        with pytest.raises(ValueError):
            grid.d1[0, 0] = 1.0

    @pytest.mark.parametrize("k", [0, 1, 2, 5, 9])
    def test_clenshaw_curtis_integrates_monomials(self, k):
        """[a, b] 上 ∫ r^k dr 精确"""
        nodes, w = clenshaw_curtis(24, 0.5, 1.0)
        exact = (1.0 - 0.5 ** (k + 1)) / (k + 1)
        assert w @ nodes**k == pytest.approx(exact, rel=1e-13)

    def test_weighted_integrals(self, grid):
        one = grid.field(np.ones(grid.points))
        assert weighted_integral(grid, one).real == pytest.approx(0.5, rel=1e-13)
        assert weighted_integral(grid, one, "r3").real == pytest.approx(0.25, rel=1e-13)
        with pytest.raises(ConfigError):
            weighted_integral(grid, one, "r5")


class TestOperators:
    def test_d1_exact_on_polynomials(self, grid):
        r = grid.nodes
        np.testing.assert_allclose(grid.d1 @ r**7, 7 * r**6, atol=1e-10)

    def test_delta4_on_even_polynomials(self, grid):
        """Δ₄ r² = 8，Δ₄ r⁴ = 24 r²，轴上取 4φ″(0)"""
        r = grid.nodes
        np.testing.assert_allclose(grid.delta4 @ r**2, 8.0 * np.ones_like(r), atol=1e-9)
        np.testing.assert_allclose(grid.delta4 @ r**4, 24.0 * r**2, atol=1e-9)

    def test_r_delta4_matches_r_times_delta4(self, grid):
        r = grid.nodes
        phi = 1.0 - 3 * r**2 + r**6
        np.testing.assert_allclose(grid.r_delta4 @ phi, r * (grid.delta4 @ phi), atol=1e-9)

    def test_apply_delta4_rejects_foreign_field(self, grid):
        other = build_grid(20)
        with pytest.raises(InputError):
            apply_delta4(grid, other.field(np.ones(other.points)))


class TestFields:
    def test_shape_mismatch(self, grid):
        with pytest.raises(InputError):
            grid.field(np.ones(grid.points + 1))

    def test_arithmetic_requires_same_grid(self, grid):
        other = build_grid(20)
        with pytest.raises(InputError):
            grid.field(np.ones(grid.points)) + other.field(np.ones(other.points))

    def test_norm_of_constant(self, grid):
        f = grid.field(np.full(grid.points, 2.0))
        assert f.norm() == pytest.approx(np.sqrt(2.0), rel=1e-13)

    def test_interpolation_preserves_polynomials(self, grid):
        fine = refine(grid)
        f = grid.sample(lambda r: r**3 - 2 * r)
        g = interpolate(f, fine)
        np.testing.assert_allclose(g.values, fine.nodes**3 - 2 * fine.nodes, atol=1e-11)
        assert interpolate(f, grid) is f
