import numpy as np
import pytest

from viakernel.cone import ConvexCone
from viakernel.dynamics import (Box, ControlledSystem, Finite, Reduction, Report, SamplingPlan,
                                check_general_quasimonotone, check_orthant_quasimonotone,
                                check_reduction, check_reduction_maps_into, jacobian_fd,
                                lipschitz_estimate, nonnegative)

from systems import METZLER, from_callable, linear, random_separable

POS2 = ConvexCone.orthant([1, 1])
PLAN2 = SamplingPlan((-2.0, -2.0), (2.0, 2.0), n_samples=500, seed=3)


def anti_coupled():
    # f = (-x2, 0): df1/dx2 = -1
    return from_callable(2, 1, lambda x, u: np.stack([-x[..., 1], 0 * x[..., 0]], axis=-1))


class TestJacobian:
    def test_linear(self):
        J = jacobian_fd(linear(METZLER), [0.3, -1.2], [0.0])
        np.testing.assert_allclose(J, METZLER, atol=1e-8)

    def test_polynomial(self):
        sys = from_callable(2, 1, lambda x, u: np.stack([x[..., 1] ** 2, 0 * x[..., 0]], axis=-1))
        np.testing.assert_allclose(jacobian_fd(sys, [0.0, 1.0], [0.0]), [[0, 2], [0, 0]], atol=1e-6)

    def test_batch(self, rng):
        sys = linear(METZLER)
        J = jacobian_fd(sys, rng.normal(size=(9, 2)), np.zeros((9, 1)))
        assert J.shape == (9, 2, 2)
        np.testing.assert_allclose(J, np.broadcast_to(METZLER, (9, 2, 2)), atol=1e-8)

    def test_second_order_convergence(self):
        # f = (x1^3 x2, x2^3): error of central differences is O(h^2)
        sys = from_callable(2, 1, lambda x, u: np.stack(
            [x[..., 0] ** 3 * x[..., 1], x[..., 1] ** 3], axis=-1))
        x = np.array([1.3, 0.7])
        exact = np.array([[3 * x[0] ** 2 * x[1], x[0] ** 3], [0, 3 * x[1] ** 2]])
        e1 = np.abs(jacobian_fd(sys, x, [0.0], h=1e-3) - exact).max()
        e2 = np.abs(jacobian_fd(sys, x, [0.0], h=1e-4) - exact).max()
        assert e1 < 1e-5
        assert e2 < e1 / 50

    def test_failure_names_coordinate(self):
        def f(x, u):
            if np.any(x[..., 1] > 1.0):
                raise ValueError("out of range")
            return x
        sys = from_callable(2, 1, f)
        with pytest.raises(ValueError, match="coordinate 1"):
            jacobian_fd(sys, [0.0, 1.0], [0.0], h=0.1)

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            jacobian_fd(linear(METZLER), [0.0, 0.0], [0.0], h=0.0)


class TestOrthantCheck:
    def test_metzler_passes(self):
        rep = check_orthant_quasimonotone(linear(METZLER), POS2, PLAN2)
        assert rep.passed and rep.checked == 500

    def test_negative_coupling_fails_with_witness(self):
        rep = check_orthant_quasimonotone(anti_coupled(), POS2, PLAN2)
        assert not rep.passed
        assert (rep.witness["i"], rep.witness["j"]) == (0, 1)
        assert rep.witness["value"] == pytest.approx(-1.0)
        assert "FAIL" in rep.summary()

    def test_needs_orthant(self):
        wedge = ConvexCone.polyhedral([[0, 1], [1, -1]], [[1, 0], [1, 1]])
        with pytest.raises(ValueError):
            check_orthant_quasimonotone(linear(METZLER), wedge, PLAN2)


class TestGeneralCheck:
    def test_constant_field_passes_any_cone(self):
        sys = from_callable(2, 1, lambda x, u: np.broadcast_to([3.0, -1.0], x.shape).copy())
        wedge = ConvexCone.polyhedral([[0, 1], [1, -1]], [[1, 0], [1, 1]])
        for K in (POS2, ConvexCone.orthant([1, -1]), wedge):
            assert check_general_quasimonotone(sys, K, PLAN2).passed

    def test_negative_coupling_fails(self):
        rep = check_general_quasimonotone(anti_coupled(), POS2, PLAN2)
        assert not rep.passed
        np.testing.assert_array_equal(rep.witness["y"], [1, 0])
        assert rep.witness["d"][0] == 0 and rep.witness["d"][1] > 0
        assert rep.witness["value"] < 0

    def test_linear_polyhedral_cone(self):
        wedge = ConvexCone.polyhedral([[0, 1], [1, -1]], [[1, 0], [1, 1]])
        # identity preserves every face; a quarter turn pushes (1,0) out of the wedge
        assert check_general_quasimonotone(linear(np.eye(2)), wedge, PLAN2).passed
        rot = np.array([[0.0, -1.0], [1.0, 0.0]])
        assert not check_general_quasimonotone(linear(rot), wedge, PLAN2).passed

    def test_respects_state_domain(self):
        sys = from_callable(2, 1, lambda x, u: x @ METZLER.T, domain=nonnegative)
        plan = SamplingPlan((0.0, 0.0), (1.0, 1.0), n_samples=200)
        rep = check_general_quasimonotone(sys, ConvexCone.orthant([1, -1]), plan)
        assert rep.witness is not None
        assert np.all(rep.witness["x"] + rep.witness["d"] >= 0)

    def test_agrees_with_orthant_check(self, rng):
        plan = SamplingPlan((-4.0,) * 3, (4.0,) * 3, n_samples=300, seed=1)
        verdicts = set()
        for _ in range(20):
            signs = rng.choice([-1, 1], size=3)
            sys = random_separable(rng, signs, p_bad=0.15)
            K = ConvexCone.orthant(signs)
            a = check_orthant_quasimonotone(sys, K, plan).passed
            b = check_general_quasimonotone(sys, K, plan).passed
            assert a == b
            verdicts.add(a)
        assert verdicts == {True, False}


class TestReduction:
    def test_identity_always_passes(self):
        for sys in (linear(METZLER, B=[[1.0], [0.0]]), anti_coupled()):
            for K in (POS2, ConvexCone.orthant([-1, 1])):
                assert check_reduction(sys, K, Reduction.identity(), PLAN2).passed

    def test_monotone_input(self):
        # x' = A x + b u with b >= 0: raising u to its max is a K-reduction for R+^2
        sys = linear(METZLER, B=[[1.0], [2.0]])
        assert check_reduction(sys, POS2, Reduction.constant([1.0]), PLAN2).passed
        rep = check_reduction(sys, POS2, Reduction.constant([-1.0]), PLAN2)
        assert not rep.passed
        assert np.all(rep.witness["difference"] <= 0)

    def test_phi_outside_control_set_raises(self):
        sys = linear(METZLER, B=[[1.0], [0.0]])
        with pytest.raises(ValueError, match="outside the control set"):
            check_reduction(sys, POS2, Reduction.constant([2.0]), PLAN2)

    def test_finite_control_set(self):
        sys = linear(METZLER, B=[[1.0], [0.0]], controls=Finite([[0.0], [1.0]]))
        check_reduction_maps_into(sys, Reduction.constant([1.0]), [[0.0], [1.0]])
        with pytest.raises(ValueError):
            check_reduction_maps_into(sys, Reduction.constant([0.5]), [[0.0]])


class TestSamplingAndReports:
    def test_plan_is_deterministic(self):
        sys = linear(METZLER)
        x1, u1 = PLAN2.points(sys)
        x2, u2 = PLAN2.points(sys)
        np.testing.assert_array_equal(x1, x2)
        np.testing.assert_array_equal(u1, u2)
        assert np.all((x1 >= -2) & (x1 <= 2))
        assert np.all(Box([-1.0], [1.0]).contains(u1))

    def test_plan_seed_matters(self):
        sys = linear(METZLER)
        other = SamplingPlan((-2.0, -2.0), (2.0, 2.0), n_samples=500, seed=4)
        assert not np.array_equal(PLAN2.points(sys)[0], other.points(sys)[0])

    def test_plan_dimension_check(self):
        with pytest.raises(ValueError):
            SamplingPlan((0.0,), (1.0,)).points(linear(METZLER))

    def test_merge(self):
        a = Report("x", checked=10, failed=0, worst_margin=0.5)
        b = Report("x", checked=5, failed=2, worst_margin=-1.0, witness={"k": 1})
        m = a.merge(b)
        assert (m.checked, m.failed, m.worst_margin, m.witness) == (15, 2, -1.0, {"k": 1})
        assert not m.passed

    def test_lipschitz_estimate_linear(self):
        L = lipschitz_estimate(linear(METZLER), PLAN2)
        assert L <= np.linalg.norm(METZLER, 2) + 1e-9
        assert L > 0.5 * np.linalg.norm(METZLER, 2)
