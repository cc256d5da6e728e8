"""Tests for scale bundles, the flow in scale, the sampling map and the scale brackets."""

import numpy as np
import pytest

from msdiffeo.exceptions import EmptyBinError
from msdiffeo.fields import Grid2, lie_bracket
from msdiffeo.flows import Diffeomorphism, FlowPath
from msdiffeo.kernels import ContinuumKernelSpec, uniform_partition
from msdiffeo.semidirect import (
    COARSE_FIRST, ScaleBundle, continuum_bracket, sampling_map, scale_flow, scale_segment, scale_total,
    semidirect_bracket
)
from msdiffeo.verification import check_switch_st, sampling_residual
from msdiffeo.verification.verify_utils import affine_bundle


@pytest.fixture
def bundle():
    return affine_bundle(Grid2.unit(24), 8, 8)


class TestScaleBundle:
    """Tests for ScaleBundle."""

    def test_boundaries_are_cell_edges(self, bundle):
        """Cells run between node midpoints and end at the interval ends."""
        assert bundle.boundaries == pytest.approx([k / 8 for k in range(9)])

    def test_cutoff_between_edges_rejected(self, bundle):
        """Only cell edges can be cutoffs."""
        with pytest.raises(ValueError):
            bundle.cutoff_index(0.3)

    def test_cutoff_outside_range_rejected(self, bundle):
        """Cutoffs lie inside the scale interval."""
        with pytest.raises(ValueError):
            bundle.cutoff_index(1.5)

    def test_for_kernel_shares_quadrature(self):
        """A kernel bundle reuses the nodes and weights of the continuum."""
        spec = ContinuumKernelSpec.midpoint(0.0, 1.0, 4, 0.05, 0.25)
        paths = [FlowPath.zeros(Grid2.unit(5), 2)] * 4
        b = ScaleBundle.for_kernel(spec, paths)
        assert b.scales == tuple(spec.scale_values)
        assert b.weights == tuple(spec.weights)


class TestScaleFlow:
    """Tests for the flow in scale."""

    def test_zero_cutoff_is_identity(self, bundle):
        """eta(s_min) is the identity both ways."""
        result = scale_flow(bundle, [0.0])
        assert result.eta_scale[0].max_displacement() == 0.0
        assert result.eta_time[0].max_displacement() == 0.0

    def test_time_and_scale_ways_agree(self, bundle):
        """Integrating through time and through scale lands on nearly the same map."""
        grid = bundle.grid
        result = scale_flow(bundle, [0.5, 1.0], mask=grid.interior_mask(0.3))
        assert result.max_distance < 5e-3

    def test_pullback_variant_agrees(self, bundle):
        """The pullback variant needs no inverse and tracks the time flow as well."""
        grid = bundle.grid
        result = scale_flow(bundle, [1.0], variant="pullback", mask=grid.interior_mask(0.3))
        assert result.max_distance < 5e-3

    def test_time_must_be_a_node(self, bundle):
        """The scale flow is reported at time nodes only."""
        with pytest.raises(ValueError):
            scale_flow(bundle, [1.0], t=0.3)

    def test_segments(self, bundle):
        """The right segment over [0, s] is eta(s) and an empty segment is the identity."""
        result = scale_flow(bundle, [0.0, 0.5, 1.0])
        cuts = result.cutoffs
        whole = scale_segment(result.eta_time, cuts, 0.0, 0.5)
        inner = bundle.grid.interior_mask(0.3)
        assert whole.sup_distance(result.eta_time[1], inner) < 1e-8
        assert scale_segment(result.eta_time, cuts, 0.5, 0.5).max_displacement() == 0.0
        left = scale_segment(result.eta_time, cuts, 0.5, 1.0, side="left")
        right = scale_segment(result.eta_time, cuts, 0.5, 1.0, side="right")
        assert isinstance(left, Diffeomorphism) and isinstance(right, Diffeomorphism)

    def test_segment_order_checked(self, bundle):
        """s_low may not exceed s_high."""
        result = scale_flow(bundle, [0.0, 0.5])
        with pytest.raises(ValueError):
            scale_segment(result.eta_time, result.cutoffs, 0.5, 0.0)


class TestSamplingMap:
    """Tests for the discretization of a scale continuum."""

    def test_sampled_tuple_is_coarse_first(self, bundle):
        """Bin 1 holds the coarsest scales."""
        st = sampling_map(bundle, uniform_partition(0.0, 1.0, 4))
        assert st.ordering == COARSE_FIRST
        assert len(st) == 4

    def test_total_is_preserved(self, bundle):
        """Summing the bins gives the scale integral."""
        cuts = uniform_partition(0.0, 1.0, 2)
        a = scale_total(bundle, cuts).velocities[-1].values
        b = scale_total(bundle).velocities[-1].values
        assert np.allclose(a, b, atol=1e-14)

    def test_empty_bin(self, bundle):
        """More bins than nodes leaves a bin empty."""
        with pytest.raises(EmptyBinError):
            sampling_map(bundle, uniform_partition(0.0, 1.0, 16))

    def test_bracket_of_sampled_tuples(self, bundle):
        """Sampling the continuum bracket gives the semidirect bracket of the samples."""
        cuts = uniform_partition(0.0, 1.0, 2)
        other = ScaleBundle.from_function(
            bundle.grid, 8, 8, lambda X, Y, t, s: ((1.0 + s) * (Y - 0.5) * (X - 0.5), 0.2 * s * t * (X - 0.5)))
        lhs = sampling_map(continuum_bracket(bundle, other), cuts)
        rhs = semidirect_bracket(sampling_map(bundle, cuts), sampling_map(other, cuts))
        for a, b in zip(lhs.paths, rhs.paths):
            assert np.allclose(a.velocities[3].values, b.velocities[3].values, atol=1e-12)

    @pytest.mark.slow
    def test_second_order_convergence(self):
        """Refining the grid cuts the sampled-bracket error by about four."""
        assert sampling_residual(17) / sampling_residual(33) >= 3.0


class TestSwitchST:
    """Tests for the compatibility of time and scale velocities."""

    def test_correct_bracket_passes(self):
        """With [u, v] = Du.v - Dv.u the residual is small."""
        assert check_switch_st(0).passed

    def test_flipped_bracket_fails(self):
        """The opposite sign convention is detected."""
        result = check_switch_st(0, bracket=lambda u, v: lie_bracket(v, u))
        assert not result.passed
