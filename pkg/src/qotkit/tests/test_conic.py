import io

import numpy as np
from django.test import SimpleTestCase, override_settings

from qotkit.conic import (
    Block,
    BlockKind,
    ConicProgram,
    ProgramBuilder,
    SolveOptions,
    SolveStatus,
    embed_hermitian,
    solve,
    unembed_hermitian,
)
from qotkit.exceptions import NotHermitian, QotkitError, ShapeMismatch


def simple_lp():
    builder = ProgramBuilder()
    x = builder.add_nonneg_block(2)
    builder.set_objective(x, [1.0, 2.0])
    builder.add_constraint({x: [1.0, 1.0]}, 1.0)
    return builder.build()


class TestHermitianEmbedding(SimpleTestCase):
    def test_roundtrip_and_spectrum(self):
        rng = np.random.default_rng(0)
        G = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        H = G + G.conj().T
        E = embed_hermitian(H)
        self.assertTrue(np.allclose(E, E.T))
        self.assertTrue(np.allclose(unembed_hermitian(E), H))
        w = np.linalg.eigvalsh(H)
        self.assertTrue(np.allclose(np.linalg.eigvalsh(E), np.sort(np.repeat(w, 2))))

    def test_rejects_non_hermitian(self):
        with self.assertRaises(NotHermitian):
            embed_hermitian(np.array([[0, 1], [2, 0]]))


class TestProgramValidation(SimpleTestCase):
    def test_needs_constraints(self):
        builder = ProgramBuilder()
        builder.add_nonneg_block(2)
        with self.assertRaises(ShapeMismatch):
            builder.build()

    def test_too_many_constraints(self):
        builder = ProgramBuilder()
        x = builder.add_nonneg_block(1)
        builder.add_constraint({x: [1.0]}, 1.0)
        builder.add_constraint({x: [2.0]}, 2.0)
        with self.assertRaises(ShapeMismatch):
            builder.build()

    def test_asymmetric_coefficient(self):
        block = Block(BlockKind.PSD, 2)
        with self.assertRaises(ShapeMismatch):
            ConicProgram(
                blocks=(block,),
                objective=(np.zeros((2, 2)),),
                constraints=(np.array([[[1.0, 1.0], [0.0, 1.0]]]),),
                rhs=np.array([1.0]),
            )

    def test_bad_block_index_and_shape(self):
        builder = ProgramBuilder()
        x = builder.add_psd_block(2)
        with self.assertRaises(ShapeMismatch):
            builder.set_objective(x + 1, np.eye(2))
        with self.assertRaises(ShapeMismatch):
            builder.set_objective(x, np.eye(3))

    def test_hermitian_block_sizes(self):
        with self.assertRaises(ShapeMismatch):
            Block(BlockKind.PSD, 3, hermitian=True)
        self.assertEqual(Block(BlockKind.PSD, 4).real_dimension, 10)
        self.assertEqual(Block(BlockKind.NONNEG, 4).real_dimension, 4)

    def test_apply_and_adjoint_are_adjoint(self):
        program = simple_lp()
        X = [np.array([0.3, 0.7])]
        y = np.array([2.5])
        lhs = float(y @ program.apply(X))
        rhs = float(sum(np.vdot(A, Xb) for A, Xb in zip(program.adjoint(y), X)))
        self.assertAlmostEqual(lhs, rhs)


class TestSolveOptions(SimpleTestCase):
    def test_defaults(self):
        options = SolveOptions()
        self.assertEqual(options.max_iters, 200)
        self.assertEqual(options.gap_tol, 1e-8)

    @override_settings(QOTKIT_SOLVER_OPTIONS={"max_iters": 5})
    def test_from_settings(self):
        self.assertEqual(SolveOptions.from_settings().max_iters, 5)
        self.assertEqual(SolveOptions.from_settings(max_iters=7).max_iters, 7)

    @override_settings(QOTKIT_SOLVER_OPTIONS={"tolerance": 1e-3})
    def test_unknown_setting(self):
        with self.assertRaises(QotkitError):
            SolveOptions.from_settings()

    def test_invalid_values(self):
        with self.assertRaises(QotkitError):
            SolveOptions(step_fraction=1.5)
        with self.assertRaises(QotkitError):
            SolveOptions(gap_tol=0)


class TestSolve(SimpleTestCase):
    def assertOptimal(self, solution):
        self.assertEqual(solution.status, SolveStatus.OPTIMAL)
        self.assertLessEqual(solution.relative_gap, 1e-7)

    def test_linear_program(self):
        solution = solve(simple_lp())
        self.assertOptimal(solution)
        self.assertAlmostEqual(solution.obj_primal, 1.0, places=7)
        self.assertTrue(np.allclose(solution.primal[0], [1.0, 0.0], atol=1e-6))
        self.assertAlmostEqual(solution.y[0], 1.0, places=6)

    def test_smallest_eigenvalue_sdp(self):
        rng = np.random.default_rng(1)
        G = rng.standard_normal((4, 4))
        C = G + G.T
        builder = ProgramBuilder()
        X = builder.add_psd_block(4)
        builder.set_objective(X, C)
        builder.add_constraint({X: np.eye(4)}, 1.0)
        solution = solve(builder.build())
        self.assertOptimal(solution)
        self.assertAlmostEqual(solution.obj_primal, np.linalg.eigvalsh(C)[0], places=6)
        self.assertAlmostEqual(solution.obj_dual, np.linalg.eigvalsh(C)[0], places=6)
        self.assertGreaterEqual(np.linalg.eigvalsh(solution.slacks[0])[0], -1e-8)

    def test_hermitian_block(self):
        rng = np.random.default_rng(2)
        G = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        H = G + G.conj().T
        builder = ProgramBuilder()
        X = builder.add_hermitian_block(3)
        builder.set_objective(X, H)
        builder.add_constraint({X: np.eye(3)}, 1.0)
        solution = solve(builder.build())
        self.assertOptimal(solution)
        w, V = np.linalg.eigh(H)
        self.assertAlmostEqual(solution.obj_primal, w[0], places=6)
        ground = np.outer(V[:, 0], V[:, 0].conj())
        self.assertTrue(np.allclose(solution.hermitian_primal(X), ground, atol=1e-4))
        self.assertAlmostEqual(np.trace(solution.hermitian_primal(X)).real, 1.0, places=7)
        lp_solution = solve(simple_lp())
        with self.assertRaises(ShapeMismatch):
            lp_solution.hermitian_primal(0)

    def test_mixed_blocks(self):
        # min 2x + tr X  s.t.  x + X_11 = 2, X_22 = 1, X ⪰ 0, x >= 0
        builder = ProgramBuilder()
        X = builder.add_psd_block(2)
        x = builder.add_nonneg_block(1)
        builder.set_objective(X, np.eye(2))
        builder.set_objective(x, [2.0])
        builder.add_constraint({X: np.diag([1.0, 0.0]), x: [1.0]}, 2.0)
        builder.add_constraint({X: np.diag([0.0, 1.0])}, 1.0)
        solution = solve(builder.build())
        self.assertOptimal(solution)
        self.assertAlmostEqual(solution.obj_primal, 3.0, places=6)

    def test_infeasible_does_not_raise(self):
        builder = ProgramBuilder()
        x = builder.add_nonneg_block(2)
        builder.set_objective(x, [1.0, 1.0])
        builder.add_constraint({x: [1.0, 1.0]}, -1.0)
        solution = solve(builder.build())
        self.assertFalse(solution.is_optimal)
        self.assertNotEqual(solution.status, SolveStatus.OPTIMAL)

    def test_iteration_limit(self):
        solution = solve(simple_lp(), SolveOptions(max_iters=1))
        self.assertIn(solution.status, {SolveStatus.ITER_LIMIT, SolveStatus.NUMERICAL_FAILURE})
        self.assertLessEqual(solution.iterations, 1)

    def test_rejects_other_types(self):
        with self.assertRaises(TypeError):
            solve("program")
        with self.assertRaises(TypeError):
            solve(simple_lp(), {"max_iters": 3})


class TestDump(SimpleTestCase):
    def test_format(self):
        stream = io.StringIO()
        simple_lp().dump(stream)
        lines = stream.getvalue().splitlines()
        self.assertTrue(lines[0].startswith("#"))
        self.assertEqual(lines[1], "blocks nonneg:2")
        self.assertEqual(lines[2], "objective 1,1,1,1 1,2,2,2")
        self.assertEqual(lines[3], "constraint 1 rhs=1 1,1,1,1 1,2,2,1")
        self.assertEqual(len(lines), 4)

    def test_psd_upper_triangle(self):
        builder = ProgramBuilder()
        X = builder.add_psd_block(2)
        builder.set_objective(X, np.array([[1.0, 0.5], [0.5, 0.0]]))
        builder.add_constraint({X: np.eye(2)}, 1.0)
        stream = io.StringIO()
        builder.build().dump(stream)
        lines = stream.getvalue().splitlines()
        self.assertEqual(lines[1], "blocks psd:2")
        self.assertEqual(lines[2], "objective 1,1,1,1 1,1,2,0.5")
