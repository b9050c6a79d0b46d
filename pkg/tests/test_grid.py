import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lvstage.errors import SingularSystemError, ValidationError
from lvstage.grid import Grid, ShiftedSolver, build_laplacian, heat_kernel, solve_shifted


def test_stencil_three_nodes():
    # L = 2, n = 3 gives h = 1; ghost-point ends double the inner neighbour
    A = build_laplacian(Grid(2.0, 3), 1.0).to_dense()
    np.testing.assert_array_equal(A, [[-2, 2, 0], [1, -2, 1], [0, 2, -2]])


def test_stencil_scales_with_diffusion():
    g = Grid(1.0, 11)
    np.testing.assert_allclose(build_laplacian(g, 3.0).to_dense(), 3.0 * build_laplacian(g, 1.0).to_dense())


def test_grid_basics():
    g = Grid(math.pi, 201)
    assert g.x[0] == 0 and g.x[-1] == pytest.approx(math.pi)
    assert g.weights.sum() == pytest.approx(math.pi, rel=1e-14)
    assert g.integrate(g.x) == pytest.approx(math.pi**2 / 2, rel=1e-14)
    assert g.refined().n == 401
    np.testing.assert_allclose(g.refined().x[::2], g.x)


@pytest.mark.parametrize("length,n", [(0.0, 5), (-1.0, 5), (1.0, 2)])
def test_bad_grid(length, n):
    with pytest.raises(ValidationError):
        Grid(length, n)


def test_laplacian_symmetric_in_weighted_inner_product():
    g = Grid(2.5, 17)
    A = build_laplacian(g, 0.7).to_dense()
    W = np.diag(g.weights)
    np.testing.assert_allclose(W @ A, (W @ A).T, atol=1e-12)
    # constants are in the kernel and the column sums vanish in the weighted sense
    np.testing.assert_allclose(A @ np.ones(g.n), 0, atol=1e-12)
    np.testing.assert_allclose(g.weights @ A, 0, atol=1e-10)


def test_pure_neumann_solve_is_singular():
    with pytest.raises(SingularSystemError):
        ShiftedSolver(build_laplacian(Grid(1.0, 9), 1.0), 0.0)


@given(
    n=st.integers(3, 60),
    d=st.floats(1e-3, 10),
    sigma=st.floats(1e-2, 50),
    seed=st.integers(0, 2**31),
)
@settings(max_examples=60, deadline=None)
def test_shifted_solve_matches_dense(n, d, sigma, seed):
    g = Grid(math.pi, n)
    rng = np.random.default_rng(seed)
    op = build_laplacian(g, d).plus_diagonal(rng.uniform(-1, 1, n))
    rhs = rng.normal(size=n)
    sigma = sigma + 1.0  # stay above the largest diagonal perturbation
    x = solve_shifted(op, sigma, rhs)
    ref = np.linalg.solve(sigma * np.eye(n) - op.to_dense(), rhs)
    np.testing.assert_allclose(x, ref, rtol=1e-9, atol=1e-9 * np.max(np.abs(ref)))


class TestHeatKernel:
    g = Grid(math.pi, 65)

    def test_row_sums_and_symmetry(self):
        K = heat_kernel(self.g, 0.3, 0.5)
        assert np.max(np.abs(K.row_sums() - 1)) < 1e-8
        assert np.max(np.abs(K.entries - K.entries.T)) < 1e-12
        assert math.isfinite(K.tail_bound)

    def test_reflection_symmetry(self):
        K = heat_kernel(self.g, 1.0, 0.2)
        np.testing.assert_allclose(K.entries[::-1, ::-1], K.entries, atol=1e-12)

    def test_semigroup(self):
        a, b, ab = (heat_kernel(self.g, 0.5, t) for t in (0.1, 0.25, 0.35))
        f = 1 + np.cos(self.g.x) + 0.3 * np.sin(3 * self.g.x)
        np.testing.assert_allclose(a.apply(b.apply(f)), ab.apply(f), atol=1e-12)

    @pytest.mark.parametrize("k", [0, 1, 4])
    def test_cosine_modes_decay(self, k):
        d, t = 0.4, 0.3
        K = heat_kernel(self.g, d, t)
        mode = np.cos(k * self.g.x)
        np.testing.assert_allclose(K.apply(mode), math.exp(-d * k * k * t) * mode, atol=1e-12)

    def test_positive_entries(self):
        assert np.min(heat_kernel(self.g, 1.0, 0.5).entries) > 0

    def test_delta_mode_is_identity(self):
        K = heat_kernel(self.g, 0.0, 0.5, delta_mode=True)
        f = np.exp(-self.g.x)
        np.testing.assert_allclose(K.apply(f), f, atol=1e-12)
        with pytest.raises(ValidationError):
            heat_kernel(self.g, 0.0, 0.5)

    def test_small_diffusion_approaches_identity(self):
        f = 1 + 0.5 * np.cos(self.g.x)
        K = heat_kernel(self.g, 1e-6, 0.5)
        np.testing.assert_allclose(K.apply(f), f, atol=1e-6)

    def test_negative_time_rejected(self):
        with pytest.raises(ValidationError):
            heat_kernel(self.g, 1.0, -0.1)
