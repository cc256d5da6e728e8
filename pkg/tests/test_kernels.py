"""Tests for Gaussian mixtures, scale continua and the momentum solves."""

import numpy as np
import pytest

from msdiffeo.exceptions import EmptyBinError, IllConditionedKernelError
from msdiffeo.fields import Grid2, LandmarkSet, VectorField
from msdiffeo.kernels import (
    ContinuumKernelSpec, FiniteKernelSpec, GaussianKernel, Momentum, apply_kernel, bin_continuum, bin_indices,
    build_gram, kernel_eval, project_scales, rkhs_norm, scalar_gram, solve_momentum, uniform_partition
)
from msdiffeo.verification import brute_force_split


class TestKernelSpecs:
    """Tests for kernel specifications."""

    def test_sigmas_must_decrease(self):
        """Components are ordered coarse to fine."""
        with pytest.raises(ValueError):
            FiniteKernelSpec((GaussianKernel(0.05), GaussianKernel(0.25)))

    def test_kernel_eval_is_scalar_identity(self, two_scale_kernel):
        """K(x, y) is a multiple of the 2x2 identity."""
        k = kernel_eval(two_scale_kernel, [0.1, 0.2], [0.3, 0.1])
        assert k[0, 1] == 0.0 and k[1, 0] == 0.0
        assert k[0, 0] == pytest.approx(k[1, 1])

    def test_midpoint_weights_sum_to_interval(self):
        """Lebesgue midpoint weights add up to the interval length."""
        spec = ContinuumKernelSpec.midpoint(0.0, 2.0, 8, 0.05, 0.25)
        assert spec.weights.sum() == pytest.approx(2.0)

    def test_geometric_sigma_endpoints(self):
        """sigma runs from sigma_max at s_min to sigma_min at s_max."""
        spec = ContinuumKernelSpec.midpoint(0.0, 1.0, 4, 0.05, 0.25)
        assert spec.sigma_of_s(0.0) == pytest.approx(0.25)
        assert spec.sigma_of_s(1.0) == pytest.approx(0.05)


class TestBinning:
    """Tests for partitions of a scale continuum."""

    def test_last_bin_is_closed(self):
        """A node at the upper cutoff lands in the last bin."""
        assert bin_indices([0.1, 0.5, 1.0], [0.0, 0.5, 1.0]) == [[0], [1, 2]]

    def test_empty_bin(self):
        """A bin without nodes raises EmptyBinError."""
        with pytest.raises(EmptyBinError):
            bin_indices([0.1, 0.2], [0.0, 0.5, 1.0])

    def test_binned_gram_is_bit_identical(self, rng):
        """The binned mixture reproduces the continuum Gram matrix exactly."""
        spec = ContinuumKernelSpec.midpoint(0.0, 1.0, 16, 0.05, 0.25)
        finite = bin_continuum(spec, uniform_partition(0.0, 1.0, 4))
        pts = rng.uniform(0, 1, size=(6, 2))
        assert np.array_equal(scalar_gram(spec, pts), scalar_gram(finite, pts))


class TestMomentumSolve:
    """Tests for solve_momentum and apply_kernel."""

    def test_landmark_roundtrip(self, two_scale_kernel, landmark_pair, rng):
        """K K^-1 v returns v at the landmarks."""
        q = landmark_pair[0]
        v = rng.standard_normal((len(q), 2))
        p = solve_momentum(two_scale_kernel, v, q)
        assert np.allclose(apply_kernel(two_scale_kernel, p), v, atol=1e-6)

    def test_grid_solve_by_conjugate_gradients(self):
        """Grid momenta reproduce a smooth field."""
        g = Grid2.unit(9)
        spec = FiniteKernelSpec((GaussianKernel(0.1),), jitter=0.0)
        p0 = Momentum(g, np.random.default_rng(0).standard_normal(g.shape + (2,)))
        v = apply_kernel(spec, p0)
        p = solve_momentum(spec, v, g)
        assert np.allclose(apply_kernel(spec, p).values, v.values, atol=1e-6 * np.abs(v.values).max())

    def test_coincident_points_are_ill_conditioned(self):
        """A singular Gram matrix without jitter cannot be factorized."""
        spec = FiniteKernelSpec((GaussianKernel(5.0),), jitter=0.0)
        q = LandmarkSet([[0.0, 0.0], [1e-9, 0.0]])
        with pytest.raises(IllConditionedKernelError):
            solve_momentum(spec, np.ones((2, 2)), q)

    def test_gram_jitter_scales_with_trace(self, two_scale_kernel, landmark_pair):
        """Jitter is relative to the mean diagonal entry."""
        system = build_gram(two_scale_kernel, landmark_pair[0])
        assert system.jitter == pytest.approx(two_scale_kernel.jitter * 2.0)

    def test_apply_on_grid_returns_field(self, two_scale_kernel, landmark_pair):
        """Evaluating a landmark momentum on a grid yields a VectorField."""
        p = Momentum(landmark_pair[0], np.ones((4, 2)))
        v = apply_kernel(two_scale_kernel, p, at=Grid2.unit(9))
        assert isinstance(v, VectorField)

    def test_rkhs_norm_nonnegative(self, two_scale_kernel, landmark_pair, rng):
        """(p, K p) is non-negative."""
        p = Momentum(landmark_pair[0], rng.standard_normal((4, 2)))
        assert rkhs_norm(two_scale_kernel, p) >= 0.0


class TestScaleProjection:
    """Tests for the minimal-norm scale decomposition."""

    def test_parts_sum_to_velocity(self, two_scale_kernel, landmark_pair, rng):
        """The scale parts add up to the decomposed velocity."""
        q = landmark_pair[0]
        v = rng.standard_normal((4, 2))
        parts = project_scales(two_scale_kernel, v, q)
        assert np.allclose(sum(parts), v, atol=1e-6)

    def test_matches_constrained_minimizer(self, rng):
        """Closed form and KKT solve of the constrained problem agree."""
        spec = FiniteKernelSpec((GaussianKernel(0.2), GaussianKernel(0.1), GaussianKernel(0.05)), jitter=0.0)
        pts = np.array([[0.1, 0.1], [0.5, 0.2], [0.3, 0.6], [0.8, 0.8], [0.7, 0.4]])
        v = rng.standard_normal((5, 2))
        fast = project_scales(spec, v, LandmarkSet(pts))
        slow = brute_force_split(spec, pts, v)
        for a, b in zip(fast, slow):
            assert np.max(np.abs(a - b)) < 1e-7

    def test_rejects_continuum(self, landmark_pair):
        """Only finite mixtures can be projected."""
        spec = ContinuumKernelSpec.midpoint(0.0, 1.0, 4, 0.05, 0.25)
        with pytest.raises(ValueError):
            project_scales(spec, np.zeros((4, 2)), landmark_pair[0])
