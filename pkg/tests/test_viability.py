import numpy as np
import pytest

from viakernel.cone import ConvexCone
from viakernel.dynamics import Box, ControlledSystem, Finite, Reduction, SamplingPlan, everywhere
from viakernel.flow import ControlPath, integrate
from viakernel.viability import (DesirableSet, GridSpec, KernelGrid, boundary_layer,
                                 check_equality_condition, compute_kernel, dilate,
                                 extend_desirable, kernel_inclusion, reduced_dynamics,
                                 symmetric_difference)

from systems import METZLER, decay, dense_viability_oracle, from_callable, integrator, linear


def interval(lo, hi, ulo=-1.0, uhi=1.0):
    return DesirableSet.box([lo], [hi], [ulo], [uhi])


def oscillator(controls=(-0.5, 0.0, 0.5)):
    f = lambda x, u: np.stack([x[..., 1], -x[..., 0] - 0.3 * x[..., 1] + u[..., 0]], axis=-1)
    return ControlledSystem(2, 1, f, Finite([[c] for c in controls]), everywhere, "oscillator")


GRID2 = GridSpec((-1.5, -1.5), (1.5, 1.5), (40, 40))
BOX2 = DesirableSet.box([-1.0, -1.0], [1.0, 1.0], [-0.5], [0.5])


def only_boundary_cells_differ(mask, oracle):
    """Disagreements are at most one cell at each end of the oracle interval."""
    diff = mask ^ oracle
    edge = dilate(oracle, 1) & dilate(~oracle, 1)
    return bool(np.all(~diff | edge)) and diff.sum() <= 2


class TestOneDimensionalOracles:
    h = 0.01

    def _grid(self, lo, hi):
        return GridSpec((lo,), (hi,), (int(round((hi - lo) / self.h)),))

    def test_integrator_keeps_whole_interval(self):
        grid = self._grid(-0.5, 1.5)
        K = compute_kernel(integrator(), interval(0.0, 1.0), grid, [[-1.0], [0.0], [1.0]], dt=0.05)
        c = grid.centers()[:, 0]
        oracle = dense_viability_oracle(lambda x, u: np.full_like(x, u), c, [-1.0, 0.0, 1.0], 0.0, 1.0)
        oracle &= (c >= 0) & (c <= 1)
        assert only_boundary_cells_differ(K.mask, oracle)
        assert K.count == 100

    def test_decay_keeps_interval_containing_equilibria(self):
        grid = self._grid(0.0, 2.5)
        D = interval(0.5, 2.0, 0.0, 1.0)
        K = compute_kernel(decay(), D, grid, [[0.0], [0.5], [1.0]], dt=0.05)
        c = grid.centers()[:, 0]
        oracle = dense_viability_oracle(lambda x, u: -x + u, c, [0.0, 0.5, 1.0], 0.5, 2.0)
        assert oracle.sum() == 150
        assert only_boundary_cells_differ(K.mask, oracle)

    def test_decay_empties_interval_above_equilibria(self):
        grid = self._grid(0.0, 2.5)
        D = interval(1.5, 2.0, 0.0, 1.0)
        K = compute_kernel(decay(), D, grid, [[0.0], [0.5], [1.0]], dt=0.05)
        c = grid.centers()[:, 0]
        oracle = dense_viability_oracle(lambda x, u: -x + u, c, [0.0, 0.5, 1.0], 1.5, 2.0)
        assert not oracle.any()
        assert K.count == 0
        assert K.meta["converged"]


class TestComputeKernel:
    def test_iteration_is_monotone(self):
        K = compute_kernel(oscillator(), BOX2, GRID2, [[-0.5], [0.0], [0.5]], dt=0.1)
        h = K.meta["history"]
        assert all(a >= b for a, b in zip(h, h[1:]))
        assert K.meta["initial_cells"] == h[0] and K.count == h[-1]

    def test_members_are_admissible(self):
        K = compute_kernel(oscillator(), BOX2, GRID2, [[0.0]], dt=0.1)
        assert np.all(BOX2.contains_state(K.member_centers()))

    def test_antimonotone_in_D(self):
        small = DesirableSet.box([-0.8, -0.8], [0.8, 0.8], [-0.5], [0.5])
        ctrls = [[-0.5], [0.0], [0.5]]
        A = compute_kernel(oscillator(), small, GRID2, ctrls, dt=0.1)
        B = compute_kernel(oscillator(), BOX2, GRID2, ctrls, dt=0.1)
        assert kernel_inclusion(A, B)[0]
        assert A.count < B.count

    def test_monotone_in_controls(self):
        A = compute_kernel(oscillator(), BOX2, GRID2, [[0.0]], dt=0.1)
        B = compute_kernel(oscillator(), BOX2, GRID2, [[-0.5], [0.0], [0.5]], dt=0.1)
        assert kernel_inclusion(A, B)[0]

    def test_absorbing_face_keeps_drifting_cells(self):
        drift = from_callable(1, 1, lambda x, u: np.ones_like(x))
        D = DesirableSet.box([0.0], [None], [0.0], [0.0])
        grid = GridSpec((0.0,), (1.0,), (20,))
        lost = compute_kernel(drift, D, grid, [[0.0]], dt=0.1)
        kept = compute_kernel(drift, D, GridSpec((0.0,), (1.0,), (20,), ((0, "upper"),)),
                              [[0.0]], dt=0.1)
        assert lost.count == 0
        assert kept.count == 20

    def test_threads_do_not_change_result(self):
        grid = GridSpec((-1.5, -1.5), (1.5, 1.5), (220, 220))
        ctrls = [[-0.5], [0.0], [0.5]]
        a = compute_kernel(oscillator(), BOX2, grid, ctrls, dt=0.1, threads=1)
        b = compute_kernel(oscillator(), BOX2, grid, ctrls, dt=0.1, threads=4)
        np.testing.assert_array_equal(a.mask, b.mask)

    def test_euclidean_norm_option(self):
        K = compute_kernel(oscillator(), BOX2, GRID2, [[0.0]], dt=0.1, norm="euclidean")
        assert K.meta["radius"] == pytest.approx(np.sqrt(2) / 2)

    @pytest.mark.parametrize("kwargs", [dict(controls=[]), dict(dt=0.0), dict(norm="taxicab")])
    def test_errors(self, kwargs):
        args = dict(controls=[[0.0]], dt=0.1)
        args.update(kwargs)
        with pytest.raises(ValueError):
            compute_kernel(oscillator(), BOX2, GRID2, **args)

    def test_grid_dimension_mismatch(self):
        with pytest.raises(ValueError):
            compute_kernel(oscillator(), BOX2, GridSpec((0,), (1,), (5,)), [[0.0]], dt=0.1)


class TestInclusion:
    def test_examples(self):
        spec = GridSpec((0, 0), (1, 1), (4, 4))
        rng = np.random.default_rng(0)
        A = KernelGrid(spec, rng.random((4, 4)) < 0.5)
        empty = KernelGrid(spec, np.zeros((4, 4), bool))
        assert kernel_inclusion(A, A) == (True, [])
        assert kernel_inclusion(empty, A)[0]
        ok, wit = kernel_inclusion(A, empty)
        assert not ok and len(wit) == A.count
        assert symmetric_difference(A, empty) == A.count

    def test_grid_mismatch(self):
        A = KernelGrid(GridSpec((0,), (1,), (4,)), np.ones(4, bool))
        B = KernelGrid(GridSpec((0,), (2,), (4,)), np.ones(4, bool))
        with pytest.raises(ValueError):
            kernel_inclusion(A, B)
        with pytest.raises(ValueError):
            symmetric_difference(A, B)

    def test_boundary_layer_and_dilate(self):
        m = np.zeros((5, 5), bool)
        m[1:4, 1:4] = True
        layer = boundary_layer(KernelGrid(GridSpec((0, 0), (1, 1), (5, 5)), m))
        assert layer.sum() == 8 and not layer[2, 2]
        assert dilate(m, 1).sum() == 9 + 12


class TestReductionMachinery:
    def test_reduced_dynamics(self, rng):
        sys = linear(METZLER, B=[[1.0], [2.0]])
        x = rng.normal(size=(50, 2))
        u = rng.uniform(-1, 1, size=(50, 1))
        np.testing.assert_array_equal(reduced_dynamics(sys, Reduction.identity()).f(x, u), sys.f(x, u))
        scalar = from_callable(1, 1, lambda x, u: np.broadcast_to(u, x.shape).copy())
        zero = reduced_dynamics(scalar, Reduction.constant([0.0]))
        assert np.all(zero.f(x[:, :1], u) == 0)

    def test_extend_desirable(self):
        D = DesirableSet.box([0.0, 0.0], [1.0, 1.0], [0.0], [1.0])
        zero = ConvexCone.polyhedral([[1, 0], [-1, 0], [0, 1], [0, -1]], [[0, 0]])
        assert extend_desirable(D, zero).same_as(D)
        half = DesirableSet.box([None], [1.0], [0.0], [1.0])
        ext = extend_desirable(half, ConvexCone.orthant([1]))
        assert np.isinf(ext.state_upper[0]) and np.isinf(ext.state_lower[0])
        ext = extend_desirable(D, ConvexCone.orthant([1, -1]))
        np.testing.assert_array_equal(ext.state_lower, [0.0, -np.inf])
        np.testing.assert_array_equal(ext.state_upper, [np.inf, 1.0])

    def test_extend_needs_structure(self):
        D = DesirableSet([0.0], [1.0], [0.0], [1.0], predicate=lambda x, u: True)
        with pytest.raises(ValueError):
            extend_desirable(D, ConvexCone.orthant([1]))
        wedge = ConvexCone.polyhedral([[0, 1], [1, -1]], [[1, 0], [1, 1]])
        with pytest.raises(ValueError):
            extend_desirable(DesirableSet.box([0, 0], [1, 1], [0], [1]), wedge)

    def test_equality_condition(self):
        plan = SamplingPlan((0.0, 0.0), (3.0, 3.0), n_samples=500)
        K = ConvexCone.orthant([1, 1])
        upset = DesirableSet.box([1.0, 0.5], [None, None], [0.0], [1.0])
        assert check_equality_condition(upset, K, Reduction.identity(), plan).passed
        box = DesirableSet.box([0.0, 0.0], [2.0, 2.0], [0.0], [1.0])
        rep = check_equality_condition(box, K, Reduction.identity(), plan)
        assert not rep.passed
        assert np.any(rep.witness["x"] + rep.witness["k"] > 2.0)

    def test_desirable_spec_round_trip(self):
        D = DesirableSet.box([1.0, None], [None, 2.0], [0.0], [1.0])
        D2 = DesirableSet.from_spec(D.to_spec())
        assert D2.same_as(D)

    def test_gridspec_round_trip(self):
        g = GridSpec((0, 1), (2, 3), (4, 5), ((1, "upper"), (0, "lower")))
        assert GridSpec.from_spec(g.to_spec()) == g
        with pytest.raises(ValueError):
            GridSpec((0,), (0,), (3,))
        with pytest.raises(ValueError):
            GridSpec((0,), (1,), (3,), ((0, "side"),))
