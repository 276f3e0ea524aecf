from unittest import mock

import numpy as np
import pytest
from django.test import SimpleTestCase

from qotkit.channels import KrausChannel, random_channel, random_neighbor_pair
from qotkit.classical import Distribution, hamming_w1
from qotkit.exceptions import MarginalMismatch, ShapeMismatch
from qotkit.linalg import FactorShape, lift, partial_trace, permute_factors
from qotkit.states import DensityOperator, Observable, random_state, random_unitary, trace_distance
from qotkit.wasserstein import (
    contraction_interval,
    lipschitz,
    lipschitz_program,
    local_channel_bound,
    neighbor_bound,
    spectrum_interval_check,
    telescoping_decomposition,
    w1,
    w1_dual,
    w1_program,
    w1_with_dual,
)


def qubit_state(n, seed):
    return random_state(FactorShape.qubits(n), seed=seed)


class TestW1(SimpleTestCase):
    def test_basis_states_give_hamming_distance(self):
        shape = FactorShape.qubits(3)
        for i in range(8):
            for j in range(8):
                rho = DensityOperator.basis_state(i, shape)
                sigma = DensityOperator.basis_state(j, shape)
                with self.subTest(i=i, j=j):
                    self.assertAlmostEqual(w1(rho, sigma).value, bin(i ^ j).count("1"), delta=1e-6)

    def test_uniform_against_delta(self):
        shape = FactorShape.qubits(3)
        uniform = DensityOperator.maximally_mixed(shape)
        delta = DensityOperator.basis_state(0, shape)
        self.assertAlmostEqual(w1(uniform, delta).value, 1.5, delta=1e-6)
        self.assertAlmostEqual(w1(delta, uniform).value, 1.5, delta=1e-6)
        classical = hamming_w1(Distribution.uniform(8), Distribution.delta(8, 0))
        self.assertAlmostEqual(classical, 1.5, delta=1e-6)

    def test_equal_states_skip_the_solver(self):
        rho = qubit_state(2, 0)
        result = w1(rho, rho)
        self.assertEqual(result.value, 0.0)
        self.assertEqual(len(result.decomposition), 2)
        self.assertEqual(w1_dual(rho, rho).value, 0.0)

    def test_diagonal_states_match_hamming_transport(self):
        rng = np.random.default_rng(1)
        shape = FactorShape.qubits(2)
        for _ in range(3):
            rho = DensityOperator.from_diagonal(qubit_state(2, rng).diagonal(), shape)
            sigma = DensityOperator.from_diagonal(qubit_state(2, rng).diagonal(), shape)
            self.assertAlmostEqual(w1(rho, sigma).value, hamming_w1(rho.diagonal(), sigma.diagonal()), places=5)

    def test_trace_distance_sandwich(self):
        rng = np.random.default_rng(2)
        for _ in range(3):
            rho, sigma = qubit_state(2, rng), qubit_state(2, rng)
            value = w1(rho, sigma).value
            distance = trace_distance(rho, sigma)
            self.assertGreaterEqual(value, distance - 1e-6)
            self.assertLessEqual(value, 2 * distance + 1e-6)

    def test_decomposition(self):
        rho, sigma = qubit_state(2, 3), qubit_state(2, 4)
        result = w1(rho, sigma)
        shape = FactorShape.qubits(2)
        self.assertTrue(np.allclose(sum(result.decomposition), rho.mat - sigma.mat, atol=1e-6))
        for site, X in enumerate(result.decomposition):
            self.assertLess(np.max(np.abs(partial_trace(X, shape, [site]))), 1e-6)
        self.assertAlmostEqual(result.decomposition_cost, result.value, places=5)
        for (c, plus, minus), X in zip(result.jordan_terms(), result.decomposition):
            if c:
                self.assertTrue(np.allclose(c * (plus - minus), X, atol=1e-9))

    def test_permutation_invariance(self):
        shape = FactorShape.qubits(3)
        rho, sigma = qubit_state(3, 5), qubit_state(3, 6)
        perm = [2, 0, 1]
        swapped = [DensityOperator(permute_factors(s.mat, shape, perm), shape) for s in (rho, sigma)]
        self.assertAlmostEqual(w1(rho, sigma).value, w1(*swapped).value, places=5)

    def test_single_qubit_unitary_invariance(self):
        shape = FactorShape.qubits(2)
        rho, sigma = qubit_state(2, 20), qubit_state(2, 21)
        U = lift(random_unitary(2, seed=22), shape, [1])
        rotated = [DensityOperator(U @ s.mat @ U.conj().T, shape) for s in (rho, sigma)]
        self.assertAlmostEqual(w1(rho, sigma).value, w1(*rotated).value, places=5)

    def test_norm_properties(self):
        shape = FactorShape.qubits(2)
        rho, sigma, tau = qubit_state(2, 23), qubit_state(2, 24), qubit_state(2, 25)
        mixed = DensityOperator(0.7 * rho.mat + 0.3 * sigma.mat, shape)
        self.assertAlmostEqual(w1(rho, mixed).value, 0.3 * w1(rho, sigma).value, places=5)
        self.assertLessEqual(w1(rho, tau).value, w1(rho, sigma).value + w1(sigma, tau).value + 1e-6)

    def test_tensorization(self):
        rho, sigma = qubit_state(3, 26), qubit_state(3, 27)
        split = w1(rho.reduce([0]), sigma.reduce([0])).value + w1(rho.reduce([1, 2]), sigma.reduce([1, 2])).value
        self.assertGreaterEqual(w1(rho, sigma).value, split - 1e-6)
        a, b, c, d = qubit_state(1, 28), qubit_state(2, 29), qubit_state(1, 30), qubit_state(2, 31)
        product = w1(DensityOperator.product([a, b]), DensityOperator.product([c, d])).value
        self.assertAlmostEqual(product, w1(a, c).value + w1(b, d).value, places=5)

    def test_program_shape(self):
        program = w1_program(qubit_state(2, 7), qubit_state(2, 8))
        self.assertEqual(len(program.blocks), 4)
        self.assertEqual(program.num_constraints, 15 + 2 * 4)

    def test_shape_errors(self):
        with self.assertRaises(ShapeMismatch):
            w1(random_state(3, seed=0), random_state(3, seed=1))
        with self.assertRaises(ShapeMismatch):
            w1(qubit_state(1, 0), qubit_state(2, 1))


class TestDuality(SimpleTestCase):
    def test_strong_duality(self):
        rho, sigma = qubit_state(2, 10), qubit_state(2, 11)
        primal = w1(rho, sigma).value
        dual = w1_dual(rho, sigma)
        self.assertAlmostEqual(dual.value, primal, places=5)
        self.assertAlmostEqual(np.trace(dual.witness.mat).real, 0.0)
        self.assertLessEqual(lipschitz(dual.witness).value, 1 + 1e-4)

    def test_primal_and_dual_share_one_solve(self):
        rho, sigma = qubit_state(2, 12), qubit_state(2, 13)
        with mock.patch("qotkit.wasserstein.w1_program", wraps=w1_program) as program:
            primal, dual = w1_with_dual(rho, sigma)
        self.assertEqual(program.call_count, 1)
        self.assertAlmostEqual(primal.value, w1(rho, sigma).value, places=9)
        self.assertAlmostEqual(dual.value, w1_dual(rho, sigma).value, places=9)
        self.assertAlmostEqual(primal.value, dual.value, delta=1e-6)


class TestLipschitz(SimpleTestCase):
    def test_identity_is_zero(self):
        self.assertLess(lipschitz(Observable.identity(FactorShape.qubits(2))).value, 1e-5)

    def test_local_pauli(self):
        result = lipschitz(Observable.pauli("ZI"))
        self.assertAlmostEqual(result.value, 2.0, places=5)
        self.assertLess(result.per_site[1].t, 1e-5)
        self.assertAlmostEqual(lipschitz(Observable.pauli("ZZ")).value, 2.0, places=5)

    def test_sum_of_local_terms(self):
        A = Observable(Observable.pauli("ZII").mat + Observable.pauli("IIX").mat, FactorShape.qubits(3))
        self.assertAlmostEqual(lipschitz(A).value, 2.0, places=5)

    def test_program_needs_valid_site(self):
        with self.assertRaises(ShapeMismatch):
            lipschitz_program(Observable.pauli("ZZ"), 2)

    def test_spectrum_interval(self):
        A = Observable.pauli("ZZ")
        self.assertTrue(spectrum_interval_check(A))
        self.assertTrue(spectrum_interval_check(A, lipschitz_value=2.0))
        self.assertFalse(spectrum_interval_check(A, lipschitz_value=0.1))


class TestTelescoping(SimpleTestCase):
    def test_terms(self):
        shape = FactorShape.qubits(3)
        rho = qubit_state(3, 12)
        channel = random_channel(4, 4, 2, seed=13).tensor_identity(shape, [0, 2])
        sigma = channel(rho)
        terms = telescoping_decomposition(rho, sigma, [0, 2])
        self.assertEqual([site for site, _ in terms], [0, 2])
        self.assertTrue(np.allclose(sum(X for _, X in terms), rho.mat - sigma.mat))
        for site, X in terms:
            self.assertLess(np.max(np.abs(partial_trace(X, shape, [site]))), 1e-10)

    def test_mismatch(self):
        with self.assertRaises(MarginalMismatch):
            telescoping_decomposition(qubit_state(2, 0), qubit_state(2, 1), [0])


class TestBounds(SimpleTestCase):
    def test_neighbor_bound(self):
        rho, sigma = random_neighbor_pair(2, 1, seed=14)
        check = neighbor_bound(rho, sigma, 1)
        self.assertTrue(check.holds)
        self.assertEqual(check.bound, 1.0)
        self.assertLessEqual(check.value, check.decomposition_cost + 1e-6)
        with self.assertRaises(MarginalMismatch):
            neighbor_bound(qubit_state(2, 0), qubit_state(2, 1), 0)

    def test_local_channel_bound(self):
        rho = qubit_state(3, 15)
        check = local_channel_bound(random_channel(4, 4, 3, seed=16), rho, [0, 2])
        self.assertEqual(check.bound, 4.0)
        self.assertTrue(check.holds)
        self.assertLessEqual(check.value, check.decomposition_cost + 1e-6)
        with self.assertRaises(ShapeMismatch):
            local_channel_bound(random_channel(2, 2, 1, seed=0), rho, [0, 1])


class TestContraction(SimpleTestCase):
    def test_identity(self):
        interval = contraction_interval(KrausChannel.identity(4), trials=4)
        self.assertGreaterEqual(interval.lower, 1 - 1e-6)
        self.assertEqual(interval.upper, 2.0)

    def test_constant(self):
        channel = KrausChannel.constant(qubit_state(1, 0), 4)
        interval = contraction_interval(channel, trials=4)
        self.assertLess(interval.lower, 1e-6)
        self.assertEqual(interval.upper, 1.0)

    def test_injected_distance(self):
        calls = []

        def fake(a, b):
            calls.append((a.dim, b.dim))
            return 1.0

        interval = contraction_interval(KrausChannel.identity(2), trials=3, w1_fn=fake)
        self.assertEqual(interval.lower, 1.0)
        self.assertEqual(len(calls), 6)

    def test_requires_qubits(self):
        with self.assertRaises(ShapeMismatch):
            contraction_interval(KrausChannel.identity(3), trials=1)


@pytest.mark.slow
class TestW1FullRuns(SimpleTestCase):
    def test_diagonal_states(self):
        rng = np.random.default_rng(40)
        for n in (2, 3):
            shape = FactorShape.qubits(n)
            for _ in range(25):
                rho = DensityOperator.from_diagonal(qubit_state(n, rng).diagonal(), shape)
                sigma = DensityOperator.from_diagonal(qubit_state(n, rng).diagonal(), shape)
                expected = hamming_w1(rho.diagonal(), sigma.diagonal())
                self.assertAlmostEqual(w1(rho, sigma).value, expected, delta=1e-6)

    def test_duality_and_sandwich(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            rho, sigma = qubit_state(2, rng), qubit_state(2, rng)
            primal, dual = w1_with_dual(rho, sigma)
            self.assertAlmostEqual(primal.value, dual.value, delta=1e-6)
            self.assertLessEqual(lipschitz(dual.witness).value, 1 + 1e-5)
            distance = trace_distance(rho, sigma)
            self.assertGreaterEqual(primal.value, distance - 1e-6)
            self.assertLessEqual(primal.value, 2 * distance + 1e-6)

    def test_tensorization(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            a, b, c, d = qubit_state(1, rng), qubit_state(2, rng), qubit_state(1, rng), qubit_state(2, rng)
            product = w1(DensityOperator.product([a, b]), DensityOperator.product([c, d])).value
            self.assertAlmostEqual(product, w1(a, c).value + w1(b, d).value, delta=1e-6)
        for _ in range(50):
            rho, sigma = qubit_state(3, rng), qubit_state(3, rng)
            split = w1(rho.reduce([0]), sigma.reduce([0])).value + w1(rho.reduce([1, 2]), sigma.reduce([1, 2])).value
            self.assertGreaterEqual(w1(rho, sigma).value, split - 1e-6)

    def test_neighbor_pairs(self):
        rng = np.random.default_rng(43)
        for trial in range(50):
            site = trial % 3
            rho, sigma = random_neighbor_pair(3, site, rng)
            self.assertTrue(neighbor_bound(rho, sigma, site).holds)

    def test_single_qubit_channels(self):
        rng = np.random.default_rng(44)
        for trial in range(50):
            channel = random_channel(2, 2, int(rng.integers(1, 5)), seed=rng)
            check = local_channel_bound(channel, qubit_state(3, rng), [trial % 3])
            self.assertLessEqual(check.value, 2 + 1e-6)
