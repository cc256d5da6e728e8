"""Tests for the iterated semidirect products and the per-scale reconstructions."""

import numpy as np
import pytest

from msdiffeo.exceptions import NotInvertibleError, OrderingMismatchError
from msdiffeo.fields import Grid2
from msdiffeo.flows import Diffeomorphism
from msdiffeo.semidirect import (
    COARSE_FIRST, COARSE_LAST, MatrixGroupElement, ScaleTuple, SdpTuple, ad_rule_residual, chain_kinds,
    diagram_residual, max_entry_error, random_chain, reconstruct_coarse_first, reconstruct_coarse_last,
    reconstructed_total, reorder_hom, reorder_hom_inverse, reorder_tangent, sdp_inverse, sdp_multiply, trivialize
)
from msdiffeo.verification import diagram_residuals, matrix_oracle
from msdiffeo.verification.verify_utils import ROTATION, SHEAR, STRETCH, affine_path


class TestMatrixGroups:
    """Tests for the 3x3 matrix chain."""

    def test_chain_kinds_per_ordering(self):
        """Coarse-last tuples start with the largest group, coarse-first tuples end with it."""
        assert chain_kinds(3, COARSE_LAST) == ["gl", "upper", "unipotent"]
        assert chain_kinds(3, COARSE_FIRST) == ["unipotent", "upper", "gl"]

    def test_singular_matrix_rejected(self):
        """Group elements must be invertible."""
        with pytest.raises(NotInvertibleError):
            MatrixGroupElement(np.zeros((3, 3)))

    def test_subgroup_membership_checked(self):
        """A lower-triangular entry is not allowed in the upper subgroup."""
        m = np.eye(3)
        m[2, 0] = 0.5
        with pytest.raises(ValueError):
            MatrixGroupElement(m, "upper")

    def test_ad_rule(self, rng):
        """d/dt Ad_g u = [g' g^-1, Ad_g u] holds to finite-difference accuracy."""
        assert ad_rule_residual(rng) < 1e-8


class TestSemidirectLaws:
    """Group laws of the semidirect products on matrix tuples."""

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_oracle_exact(self, rng, n):
        """Every law holds to rounding for random tuples."""
        errors = matrix_oracle(rng, n, 25)
        assert max(errors.values()) < 1e-11, errors

    def test_triangle_reverses_factors(self, rng):
        """T2 of the reordered tuple lists the T1 factors in reverse."""
        a = SdpTuple(tuple(random_chain(3, COARSE_LAST, rng)), COARSE_LAST)
        left = trivialize(reorder_hom(a), "T2").elements
        right = trivialize(a, "T1").elements[::-1]
        assert max_entry_error(list(left), list(right)) < 1e-12

    def test_reorder_round_trip(self, rng):
        """reorder_hom_inverse undoes reorder_hom."""
        a = SdpTuple(tuple(random_chain(4, COARSE_LAST, rng)), COARSE_LAST)
        back = reorder_hom_inverse(reorder_hom(a))
        assert back.ordering == COARSE_LAST
        assert max_entry_error(list(back.elements), list(a.elements)) < 1e-12

    def test_reorder_tangent_matches_finite_differences(self, rng):
        """The derivative of reorder_hom at the identity reverses the tangent tuple."""
        masks = {"gl": np.ones((3, 3)), "upper": np.triu(np.ones((3, 3))), "unipotent": np.triu(np.ones((3, 3)), 1)}
        kinds = chain_kinds(3, COARSE_LAST)
        tangent = [masks[k] * rng.standard_normal((3, 3)) for k in kinds]
        eps = 1e-5

        def curve(sign):
            a = SdpTuple(tuple(MatrixGroupElement(np.eye(3) + sign * eps * x, k) for x, k in zip(tangent, kinds)))
            return [e.matrix for e in reorder_hom(a).elements]

        fd = [(p - m) / (2 * eps) for p, m in zip(curve(1.0), curve(-1.0))]
        expected = reorder_tangent(tangent)
        assert max(float(np.max(np.abs(a - b))) for a, b in zip(fd, expected)) < 1e-6

    def test_orderings_cannot_mix(self, rng):
        """Multiplying tuples of different orderings is an error."""
        a = SdpTuple(tuple(random_chain(2, COARSE_LAST, rng)), COARSE_LAST)
        b = SdpTuple(tuple(random_chain(2, COARSE_FIRST, rng)), COARSE_FIRST)
        with pytest.raises(OrderingMismatchError):
            sdp_multiply(a, b)

    def test_wrong_trivialization(self, rng):
        """T1 applies to coarse-last tuples only."""
        b = SdpTuple(tuple(random_chain(2, COARSE_FIRST, rng)), COARSE_FIRST)
        with pytest.raises(OrderingMismatchError):
            trivialize(b, "T1")

    def test_diffeomorphism_tuples(self):
        """The product also works on grid maps: translations commute, so the laws reduce to sums."""
        g = Grid2.unit(9)
        a = SdpTuple((Diffeomorphism.translation(g, [0.02, 0.0]), Diffeomorphism.translation(g, [0.0, 0.01])))
        ident = sdp_multiply(a, sdp_inverse(a))
        inner = g.interior_mask(0.25)
        for e in ident.elements:
            assert e.max_displacement(inner) < 1e-12


class TestReconstruction:
    """Tests for the per-scale maps of a scale tuple."""

    @pytest.fixture
    def tuple_grid(self):
        return Grid2.unit(24)

    def _tuple(self, grid, ordering, steps=16):
        mats = [0.15 * ROTATION, 0.15 * STRETCH]
        return ScaleTuple(tuple(affine_path(grid, steps, m) for m in mats), ordering)

    def test_single_scale_is_plain_flow(self, tuple_grid):
        """With one scale the reconstruction is the flow of that scale."""
        st = ScaleTuple((affine_path(tuple_grid, 8, 0.15 * SHEAR),), COARSE_FIRST)
        psi = reconstruct_coarse_first(st)
        assert diagram_residual(st, psi) < 1e-12

    @pytest.mark.parametrize("ordering", [COARSE_LAST, COARSE_FIRST])
    def test_product_scheme_small_residual(self, tuple_grid, ordering):
        """The composed maps track the summed flow."""
        st = self._tuple(tuple_grid, ordering)
        if ordering == COARSE_LAST:
            psi = reconstruct_coarse_last(st)
        else:
            psi = reconstruct_coarse_first(st)
        assert diagram_residual(st, psi, mask=tuple_grid.interior_mask(0.3)) < 5e-3

    def test_ode_scheme_is_more_accurate(self, tuple_grid):
        """Integrating the coupled equations with RK4 beats first-order splitting."""
        st = self._tuple(tuple_grid, COARSE_FIRST)
        mask = tuple_grid.interior_mask(0.3)
        product = diagram_residual(st, reconstruct_coarse_first(st, scheme="product"), mask=mask)
        ode = diagram_residual(st, reconstruct_coarse_first(st, scheme="ode"), mask=mask)
        assert ode < product

    def test_coarse_outer_convention_reverses_composition(self, tuple_grid):
        """Both conventions reconstruct the same total map."""
        st = self._tuple(tuple_grid, COARSE_LAST)
        mask = tuple_grid.interior_mask(0.3)
        fine = reconstructed_total(reconstruct_coarse_last(st), COARSE_LAST)
        coarse = reconstructed_total(reconstruct_coarse_last(st, convention="coarse_outer"), COARSE_LAST, "coarse_outer")
        assert fine.sup_distance(coarse, mask) < 1e-2

    def test_unknown_scheme(self, tuple_grid):
        """Only product and ode reconstructions exist."""
        with pytest.raises(ValueError):
            reconstruct_coarse_first(self._tuple(tuple_grid, COARSE_FIRST), scheme="magnus")

    def test_reversed_tuple_swaps_ordering(self, tuple_grid):
        """Reversing a tuple reverses its scales and flips the ordering."""
        st = self._tuple(tuple_grid, COARSE_FIRST)
        rev = st.reversed()
        assert rev.ordering == COARSE_LAST
        assert rev.paths[0] is st.paths[1]

    @pytest.mark.slow
    @pytest.mark.parametrize("ordering", [COARSE_LAST, COARSE_FIRST])
    def test_first_order_decay(self, ordering):
        """Doubling the time steps halves the residual."""
        res = diagram_residuals(2, ordering)
        ratios = [a / b for a, b in zip(res, res[1:])]
        assert all(1.6 <= r <= 2.6 for r in ratios), ratios
