import numpy as np
from django.test import SimpleTestCase

from qotkit.channels import KrausChannel, coupling_from_channel, random_channel
from qotkit.conic import SolveStatus
from qotkit.exceptions import NotATransportPlan, ShapeMismatch
from qotkit.quadratic import (
    centered_from_values,
    cost_operator,
    dquad,
    dquad_lower_bound,
    dquad_program,
    lieb_monotonicity_gap,
    plan_cost,
    self_cost_identity,
)
from qotkit.states import DensityOperator, Observable, random_observable, random_state


class TestCostOperator(SimpleTestCase):
    def test_pauli_z(self):
        cost = cost_operator([Observable.pauli("Z")])
        self.assertTrue(np.allclose(cost.operator.mat, np.diag([0, 4, 4, 0])))
        self.assertEqual(cost.dim, 2)

    def test_empty_cost(self):
        cost = cost_operator([], dim=3)
        self.assertEqual(cost.num_observables, 0)
        self.assertTrue(np.allclose(cost.operator.mat, 0))
        with self.assertRaises(ShapeMismatch):
            cost_operator([])

    def test_dimension_mismatch(self):
        with self.assertRaises(ShapeMismatch):
            cost_operator([Observable.pauli("Z"), random_observable(3, seed=0)])
        with self.assertRaises(ShapeMismatch):
            cost_operator([Observable.pauli("Z")], dim=3)


class TestDquad(SimpleTestCase):
    def setUp(self):
        self.cost = cost_operator([Observable.pauli("X"), Observable.pauli("Z")])

    def test_pure_source_uses_product_coupling(self):
        sigma = DensityOperator.pure([1, 0])
        rho = random_state(2, seed=0)
        result = dquad(sigma, rho, self.cost)
        expected = 0.0
        for R in self.cost.observables:
            expected += np.real(np.trace(R.mat @ R.mat @ sigma.mat)) + np.real(np.trace(R.mat @ R.mat @ rho.mat))
            expected -= 2 * R.expectation(sigma) * R.expectation(rho)
        self.assertAlmostEqual(result.value_squared, expected, places=10)
        self.assertEqual(result.status, SolveStatus.OPTIMAL)

    def test_self_cost_matches_closed_form(self):
        sigma = random_state(2, seed=1)
        result = dquad(sigma, sigma, self.cost)
        self.assertAlmostEqual(result.value_squared, self_cost_identity(sigma, self.cost), places=5)
        self.assertGreater(result.value_squared, 0)

    def test_bounds(self):
        rng = np.random.default_rng(2)
        for _ in range(3):
            sigma, rho = random_state(2, seed=rng), random_state(2, seed=rng)
            value = dquad(sigma, rho, self.cost).value_squared
            self.assertGreaterEqual(value, dquad_lower_bound(sigma, rho, self.cost) - 1e-6)
            self.assertAlmostEqual(value, dquad(rho, sigma, self.cost).value_squared, places=5)

    def test_coupling_marginals(self):
        sigma, rho = random_state(2, seed=3), random_state(2, seed=4)
        coupling = dquad(sigma, rho, self.cost).coupling
        self.assertTrue(np.allclose(coupling.first_marginal(), sigma.mat.T, atol=1e-6))
        self.assertTrue(np.allclose(coupling.second_marginal(), rho.mat, atol=1e-6))

    def test_program_shape(self):
        program = dquad_program(random_state(2, seed=5), random_state(2, seed=6), self.cost)
        self.assertEqual(program.num_constraints, 7)

    def test_plan_is_upper_bound(self):
        sigma = random_state(2, seed=7)
        channel = random_channel(2, 2, 2, seed=8)
        rho = channel(sigma)
        self.assertLessEqual(dquad(sigma, rho, self.cost).value_squared, plan_cost(channel, sigma, rho, self.cost) + 1e-6)


class TestPlanCost(SimpleTestCase):
    def setUp(self):
        self.cost = cost_operator([random_observable(3, seed=0), random_observable(3, seed=1)])

    def test_identity_plan(self):
        sigma = random_state(3, seed=2)
        identity = KrausChannel.identity(3)
        self.assertAlmostEqual(
            plan_cost(identity, sigma, sigma, self.cost), self_cost_identity(sigma, self.cost), places=10
        )

    def test_matches_coupling_cost(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            sigma = random_state(3, seed=rng)
            channel = random_channel(3, 3, 3, seed=rng)
            rho = channel(sigma)
            coupling = coupling_from_channel(channel, sigma)
            expected = np.real(np.trace(self.cost.operator.mat @ coupling.state.mat))
            self.assertAlmostEqual(plan_cost(channel, sigma, rho, self.cost), expected, delta=1e-7)

    def test_not_a_plan(self):
        sigma, rho = random_state(3, seed=4), random_state(3, seed=5)
        with self.assertRaises(NotATransportPlan):
            plan_cost(KrausChannel.identity(3), sigma, rho, self.cost)


class TestMonotonicity(SimpleTestCase):
    def test_lieb_gap_nonnegative(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            sigma = random_state(3, seed=rng)
            channel = random_channel(3, 2, 2, seed=rng)
            R = random_observable(2, seed=rng)
            self.assertGreaterEqual(lieb_monotonicity_gap(channel, sigma, R), -1e-9)

    def test_centered_clamps(self):
        self.assertEqual(centered_from_values(1.0, 3.0, 3.0), 0.0)
        self.assertAlmostEqual(centered_from_values(5.0, 2.0, 4.0), np.sqrt(2.0))
