"""Dense conic programs and their primal-dual interior-point solver.

A :class:`ConicProgram` is in equality standard form::

    minimize    sum_b <C_b, X_b>
    subject to  sum_b <A_kb, X_b> = b_k     for every constraint k
                X_b PSD (psd blocks) or X_b >= 0 (nonneg blocks)

and its dual is ``maximize b^T y`` subject to ``C_b - sum_k y_k A_kb = S_b`` in
the cone. Complex Hermitian variables are handled through
:func:`embed_hermitian`; :class:`ProgramBuilder` does the embedding so callers
work with complex data throughout.

The solver is a Mehrotra predictor-corrector method with Nesterov-Todd
scaling, an infeasible identity-scaled starting point and a dense Schur
complement factored by Cholesky.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, TextIO

import numpy as np
import numpy.typing as npt
import scipy.linalg as la

from . import conf
from .exceptions import QotkitError, ShapeMismatch
from .linalg import ComplexMatrix, check_hermitian


logger = logging.getLogger(__name__)

#: Symmetry tolerance for real PSD-block coefficients.
SYMMETRY_TOL = 1e-12

_SCHUR_REGULARIZATION = (1e-12, 1e-10, 1e-8)
_DIVERGENCE = 1e10
_MIN_STEP = 1e-10


class BlockKind(str, enum.Enum):
    PSD = "psd"
    NONNEG = "nonneg"


class SolveStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    ITER_LIMIT = "IterLimit"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class Block:
    """A cone block: a PSD matrix of order ``size`` or a nonnegative vector.

    ``hermitian`` marks PSD blocks holding the real embedding of a complex
    Hermitian variable of order ``size // 2``.
    """

    kind: BlockKind
    size: int
    hermitian: bool = False

    def __post_init__(self):
        if self.size < 1:
            raise ShapeMismatch(f"Block size must be positive, got {self.size}")
        if self.hermitian and (self.kind != BlockKind.PSD or self.size % 2):
            raise ShapeMismatch("Hermitian blocks are PSD blocks of even size")

    @property
    def shape(self) -> tuple:
        if self.kind == BlockKind.PSD:
            return (self.size, self.size)
        return (self.size,)

    @property
    def real_dimension(self) -> int:
        if self.kind == BlockKind.PSD:
            return self.size * (self.size + 1) // 2
        return self.size


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 200
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    step_fraction: float = 0.98

    def __post_init__(self):
        for name in ("max_iters", "gap_tol", "feas_tol", "step_fraction"):
            if not getattr(self, name) > 0:
                raise QotkitError(f"Solver option {name} must be positive")
        if self.step_fraction >= 1:
            raise QotkitError("Solver option step_fraction must be below 1")

    @classmethod
    def from_settings(cls, **overrides) -> "SolveOptions":
        """Defaults, then ``QOTKIT_SOLVER_OPTIONS``, then ``overrides``."""
        values = dict(conf.get_setting("QOTKIT_SOLVER_OPTIONS"))
        values.update(overrides)
        unknown = set(values) - set(cls.__dataclass_fields__)
        if unknown:
            raise QotkitError(f"Unknown solver options {sorted(unknown)}")
        return cls(**values)


def embed_hermitian(H) -> npt.NDArray[np.float64]:
    """Real symmetric embedding ``A + iB -> [[A, -B], [B, A]]``.

    The embedding has the spectrum of ``H`` with every eigenvalue doubled, so
    ``H`` is PSD exactly when its embedding is.

    Raises
    ------
    NotHermitian
        If ``H`` is not Hermitian.
    """
    H = check_hermitian(H)
    A, B = H.real, H.imag
    return np.block([[A, -B], [B, A]])


def unembed_hermitian(X) -> ComplexMatrix:
    """Inverse of :func:`embed_hermitian`, averaging the redundant blocks."""
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[0] // 2
    X11, X12, X21, X22 = X[:d, :d], X[:d, d:], X[d:, :d], X[d:, d:]
    H = (X11 + X22) / 2 + 1j * (X21 - X12) / 2
    return (H + H.conj().T) / 2


@dataclass(frozen=True, eq=False)
class ConicProgram:
    """Dense conic program in equality standard form (minimization).

    Parameters
    ----------
    blocks : tuple of Block
    objective : tuple of ndarray
        ``C_b`` per block, shaped like the block.
    constraints : tuple of ndarray
        ``A_b`` per block with the constraint index first, i.e. of shape
        ``(m, s, s)`` for PSD blocks and ``(m, l)`` for nonneg blocks.
    rhs : ndarray
        Right-hand sides ``b``, of shape ``(m,)``.
    """

    blocks: tuple
    objective: tuple
    constraints: tuple
    rhs: np.ndarray

    def __post_init__(self):
        if not all(isinstance(b, Block) for b in self.blocks) or not self.blocks:
            raise ShapeMismatch("A program needs at least one Block")
        rhs = np.asarray(self.rhs, dtype=np.float64).reshape(-1)
        m = rhs.size
        if m == 0:
            raise ShapeMismatch("A program needs at least one constraint")
        if len(self.objective) != len(self.blocks) or len(self.constraints) != len(self.blocks):
            raise ShapeMismatch("One objective and one constraint array per block")
        objective, constraints = [], []
        for block, C, A in zip(self.blocks, self.objective, self.constraints):
            C = np.asarray(C, dtype=np.float64)
            A = np.asarray(A, dtype=np.float64)
            if C.shape != block.shape or A.shape != (m,) + block.shape:
                raise ShapeMismatch(f"Coefficient shapes do not match block {block}")
            if block.kind == BlockKind.PSD:
                if np.max(np.abs(C - C.T)) > SYMMETRY_TOL * (1 + np.max(np.abs(C))):
                    raise ShapeMismatch("PSD objective coefficients must be symmetric")
                if np.max(np.abs(A - A.transpose(0, 2, 1)), initial=0.0) > SYMMETRY_TOL * (
                    1 + np.max(np.abs(A), initial=0.0)
                ):
                    raise ShapeMismatch("PSD constraint coefficients must be symmetric")
                C = (C + C.T) / 2
                A = (A + A.transpose(0, 2, 1)) / 2
            C.setflags(write=False)
            A.setflags(write=False)
            objective.append(C)
            constraints.append(A)
        if m > sum(b.real_dimension for b in self.blocks):
            raise ShapeMismatch(f"{m} constraints exceed the variable dimension")
        rhs.setflags(write=False)
        object.__setattr__(self, "objective", tuple(objective))
        object.__setattr__(self, "constraints", tuple(constraints))
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def num_constraints(self) -> int:
        return self.rhs.size

    def apply(self, values) -> npt.NDArray[np.float64]:
        """Constraint map ``X -> (sum_b <A_kb, X_b>)_k``."""
        out = np.zeros(self.num_constraints)
        for A, X in zip(self.constraints, values):
            out += A.reshape(self.num_constraints, -1) @ np.asarray(X).reshape(-1)
        return out

    def adjoint(self, y) -> list:
        """Adjoint map ``y -> (sum_k y_k A_kb)_b``."""
        y = np.asarray(y, dtype=np.float64)
        return [np.tensordot(y, A, axes=1) for A in self.constraints]

    def objective_value(self, values) -> float:
        return float(sum(np.vdot(C, X).real for C, X in zip(self.objective, values)))

    def dump(self, stream: TextIO) -> None:
        """Write the program in the text debug format.

        The format has a ``blocks`` line, an ``objective`` line and one
        ``constraint`` line per constraint. Coefficients are
        ``block,row,col,value`` triplets with 1-based indices, upper triangle
        only for PSD blocks and ``row == col`` for nonneg entries.
        """
        stream.write("# qotkit conic program, minimize <C, X> s.t. <A_k, X> = b_k\n")
        stream.write("blocks " + " ".join(f"{b.kind.value}:{b.size}" for b in self.blocks) + "\n")
        stream.write("objective" + _triplets(self.blocks, self.objective) + "\n")
        for k in range(self.num_constraints):
            coefficients = [A[k] for A in self.constraints]
            stream.write(
                f"constraint {k + 1} rhs={self.rhs[k]:.17g}"
                + _triplets(self.blocks, coefficients)
                + "\n"
            )


def _triplets(blocks, coefficients) -> str:
    parts = []
    for index, (block, C) in enumerate(zip(blocks, coefficients), start=1):
        if block.kind == BlockKind.PSD:
            rows, cols = np.nonzero(np.triu(C))
            for i, j in zip(rows, cols):
                parts.append(f"{index},{i + 1},{j + 1},{C[i, j]:.17g}")
        else:
            for i in np.nonzero(C)[0]:
                parts.append(f"{index},{i + 1},{i + 1},{C[i]:.17g}")
    return "".join(" " + p for p in parts)


class ProgramBuilder:
    """Incremental construction of a :class:`ConicProgram`.

    Coefficients of Hermitian blocks are given as complex Hermitian matrices
    of the block's complex order and are stored as ``embed_hermitian(F) / 2``,
    so that ``<coefficient, embedding of X> = Re tr[F X]``.
    """

    def __init__(self):
        self._blocks = []
        self._objective = {}
        self._constraints = []
        self._rhs = []

    def _add_block(self, block: Block) -> int:
        self._blocks.append(block)
        return len(self._blocks) - 1

    def add_psd_block(self, size: int) -> int:
        return self._add_block(Block(BlockKind.PSD, int(size)))

    def add_hermitian_block(self, dim: int) -> int:
        return self._add_block(Block(BlockKind.PSD, 2 * int(dim), hermitian=True))

    def add_nonneg_block(self, length: int) -> int:
        return self._add_block(Block(BlockKind.NONNEG, int(length)))

    def _coefficient(self, index: int, coeff) -> np.ndarray:
        if not 0 <= index < len(self._blocks):
            raise ShapeMismatch(f"No block with index {index}")
        block = self._blocks[index]
        if block.hermitian:
            value = embed_hermitian(coeff) / 2
        else:
            value = np.asarray(coeff, dtype=np.float64)
        if value.shape != block.shape:
            raise ShapeMismatch(
                f"Coefficient of shape {np.shape(coeff)} does not fit block {index}"
            )
        return value

    def set_objective(self, index: int, coeff) -> None:
        self._objective[index] = self._coefficient(index, coeff)

    def add_constraint(self, terms: Mapping[int, object], rhs: float) -> int:
        """Add ``sum_b <terms[b], X_b> = rhs`` and return its index."""
        self._constraints.append({b: self._coefficient(b, c) for b, c in terms.items()})
        self._rhs.append(float(rhs))
        return len(self._rhs) - 1

    @property
    def num_constraints(self) -> int:
        return len(self._rhs)

    def build(self) -> ConicProgram:
        m = len(self._rhs)
        objective, constraints = [], []
        for index, block in enumerate(self._blocks):
            objective.append(self._objective.get(index, np.zeros(block.shape)))
            A = np.zeros((m,) + block.shape)
            for k, terms in enumerate(self._constraints):
                if index in terms:
                    A[k] = terms[index]
            constraints.append(A)
        return ConicProgram(
            blocks=tuple(self._blocks),
            objective=tuple(objective),
            constraints=tuple(constraints),
            rhs=np.array(self._rhs),
        )


@dataclass(frozen=True, eq=False)
class ConicSolution:
    status: SolveStatus
    primal: tuple
    y: np.ndarray
    slacks: tuple
    obj_primal: float
    obj_dual: float
    gap: float
    iterations: int = 0
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")
    blocks: tuple = field(default=(), repr=False)

    @property
    def is_optimal(self) -> bool:
        return self.status == SolveStatus.OPTIMAL

    @property
    def relative_gap(self) -> float:
        return abs(self.obj_primal - self.obj_dual) / (1 + abs(self.obj_primal))

    def _hermitian(self, values, index: int) -> ComplexMatrix:
        if not self.blocks[index].hermitian:
            raise ShapeMismatch(f"Block {index} is not a Hermitian block")
        return unembed_hermitian(values[index])

    def hermitian_primal(self, index: int) -> ComplexMatrix:
        """Complex Hermitian value of primal block ``index``."""
        return self._hermitian(self.primal, index)

    def hermitian_slack(self, index: int) -> ComplexMatrix:
        return self._hermitian(self.slacks, index)


def solve(program: ConicProgram, options: Optional[SolveOptions] = None) -> ConicSolution:
    """Solve a conic program.

    Never raises on solver trouble: the returned status says what happened.
    Callers that need an optimum check ``solution.is_optimal`` and raise
    :class:`~qotkit.exceptions.SolverError` themselves.
    """
    if not isinstance(program, ConicProgram):
        raise TypeError(f"Expected ConicProgram, got {type(program)}")
    if options is None:
        options = SolveOptions.from_settings()
    elif not isinstance(options, SolveOptions):
        raise TypeError(f"Expected SolveOptions, got {type(options)}")
    return _InteriorPointSolver(program, options).run()


def _sym(M):
    return (M + M.T) / 2


def _psd_step(v, D) -> float:
    """Largest step ``a`` with ``diag(v) + a D`` PSD."""
    r = 1.0 / np.sqrt(v)
    lam = np.linalg.eigvalsh(_sym(D * r[:, None] * r[None, :]))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _orthant_step(x, dx) -> float:
    neg = dx < 0
    return float(np.min(-x[neg] / dx[neg])) if np.any(neg) else np.inf


class _PsdScaling:
    """Nesterov-Todd scaling of one PSD block.

    With ``X = L L^T`` and ``L^T S L = U diag(d) U^T``, ``G = L U diag(d^-1/4)``
    maps both iterates to ``V = diag(sqrt(d))``: ``G^-1 X G^-T = G^T S G = V``.
    ``W = G G^T`` is the scaling point, ``W S W = X``.
    """

    def __init__(self, X, S):
        L = la.cholesky(X, lower=True)
        Linv = la.solve_triangular(L, np.eye(X.shape[0]), lower=True)
        d, U = np.linalg.eigh(_sym(L.T @ S @ L))
        if d[0] <= 0:
            raise np.linalg.LinAlgError("Dual slack lost positive definiteness")
        d4 = d ** 0.25
        self.G = (L @ U) / d4[None, :]
        self.Ginv = (U.T @ Linv) * d4[:, None]
        self.W = self.G @ self.G.T
        self.v = np.sqrt(d)

    def scaled(self, dX, dS):
        return self.Ginv @ dX @ self.Ginv.T, self.G.T @ dS @ self.G


class _InteriorPointSolver:
    def __init__(self, program: ConicProgram, options: SolveOptions):
        self.program = program
        self.options = options
        self.m = program.num_constraints
        self.flat = [A.reshape(self.m, -1) for A in program.constraints]
        self.nu = sum(b.size for b in program.blocks)
        self.b_scale = 1 + float(np.max(np.abs(program.rhs)))
        self.c_scale = 1 + max(float(np.max(np.abs(C), initial=0.0)) for C in program.objective)

    def starting_point(self):
        b = self.program.rhs
        X, S = [], []
        for block, A, C in zip(self.program.blocks, self.flat, self.program.objective):
            s = block.size
            row_norms = np.linalg.norm(A, axis=1)
            xi = max(10.0, np.sqrt(s), s * float(np.max((1 + np.abs(b)) / (1 + row_norms))))
            eta = max(10.0, np.sqrt(s), float(np.max(row_norms)), float(np.linalg.norm(C)))
            if block.kind == BlockKind.PSD:
                X.append(xi * np.eye(s))
                S.append(eta * np.eye(s))
            else:
                X.append(np.full(s, xi))
                S.append(np.full(s, eta))
        return X, np.zeros(self.m), S

    def apply(self, values):
        out = np.zeros(self.m)
        for A, V in zip(self.flat, values):
            out += A @ V.reshape(-1)
        return out

    def adjoint(self, y):
        return [(y @ A).reshape(block.shape) for A, block in zip(self.flat, self.program.blocks)]

    def solution(self, status, X, y, S, iterations, pinf=float("nan"), dinf=float("nan")):
        obj_primal = self.program.objective_value(X)
        obj_dual = float(self.program.rhs @ y)
        gap = float(sum(np.vdot(Xb, Sb) for Xb, Sb in zip(X, S)))
        for arr in (*X, *S, y):
            arr.setflags(write=False)
        log = logger.info if status == SolveStatus.OPTIMAL else logger.warning
        log(
            f"Solver finished with {status.value} after {iterations} iterations: "
            f"primal {obj_primal:.10g}, dual {obj_dual:.10g}, gap {gap:.3e}"
        )
        return ConicSolution(
            status=status,
            primal=tuple(X),
            y=y,
            slacks=tuple(S),
            obj_primal=obj_primal,
            obj_dual=obj_dual,
            gap=gap,
            iterations=iterations,
            primal_residual=pinf,
            dual_residual=dinf,
            blocks=self.program.blocks,
        )

    def factor_schur(self, scalings, ratios):
        M = np.zeros((self.m, self.m))
        for block, A3, A, scale, ratio in zip(
            self.program.blocks, self.program.constraints, self.flat, scalings, ratios
        ):
            if block.kind == BlockKind.PSD:
                WAW = scale.W @ A3 @ scale.W
                M += A @ WAW.reshape(self.m, -1).T
            else:
                M += (A * ratio) @ A.T
        M = _sym(M)
        size = max(1.0, float(np.max(np.diag(M))))
        for reg in _SCHUR_REGULARIZATION:
            try:
                return la.cho_factor(M + reg * size * np.eye(self.m))
            except la.LinAlgError:
                logger.debug(f"Schur complement not positive definite at regularization {reg}")
        raise np.linalg.LinAlgError("Schur complement factorization failed")

    def run(self) -> ConicSolution:
        opts = self.options
        program = self.program
        blocks = program.blocks
        C, b = program.objective, program.rhs
        X, y, S = self.starting_point()
        pinf = dinf = float("inf")

        for it in range(opts.max_iters + 1):
            rp = b - self.apply(X)
            At_y = self.adjoint(y)
            Rd = [Cb - Ab - Sb for Cb, Ab, Sb in zip(C, At_y, S)]
            pobj = program.objective_value(X)
            dobj = float(b @ y)
            gap = float(sum(np.vdot(Xb, Sb) for Xb, Sb in zip(X, S)))
            mu = gap / self.nu
            pinf = float(np.max(np.abs(rp))) / self.b_scale
            dinf = max(float(np.max(np.abs(R))) for R in Rd) / self.c_scale
            rel_gap = abs(pobj - dobj) / (1 + abs(pobj))
            rel_compl = gap / (1 + abs(pobj))

            if pinf <= opts.feas_tol and dinf <= opts.feas_tol and max(rel_gap, rel_compl) <= opts.gap_tol:
                return self.solution(SolveStatus.OPTIMAL, X, y, S, it, pinf, dinf)
            if max(float(np.max(np.abs(Xb))) for Xb in X) > _DIVERGENCE * self.b_scale:
                return self.solution(SolveStatus.DUAL_INFEASIBLE, X, y, S, it, pinf, dinf)
            if float(np.max(np.abs(y))) > _DIVERGENCE * self.c_scale:
                return self.solution(SolveStatus.PRIMAL_INFEASIBLE, X, y, S, it, pinf, dinf)
            if it == opts.max_iters:
                break

            try:
                scalings, ratios = [], []
                for block, Xb, Sb in zip(blocks, X, S):
                    if block.kind == BlockKind.PSD:
                        scalings.append(_PsdScaling(Xb, Sb))
                        ratios.append(None)
                    else:
                        scalings.append(None)
                        ratios.append(Xb / Sb)
                factor = self.factor_schur(scalings, ratios)
            except np.linalg.LinAlgError as e:
                logger.warning(f"Newton system failed at iteration {it}: {e}")
                return self._stalled(X, y, S, it, pinf, dinf, rel_gap, rel_compl)

            def direction(Rc):
                HRd = [
                    sc.W @ R @ sc.W if sc is not None else ratio * R
                    for sc, ratio, R in zip(scalings, ratios, Rd)
                ]
                h = rp - self.apply(Rc) + self.apply(HRd)
                dy = la.cho_solve(factor, h)
                dS = [R - Ab for R, Ab in zip(Rd, self.adjoint(dy))]
                dX = []
                for sc, ratio, Rcb, dSb in zip(scalings, ratios, Rc, dS):
                    if sc is not None:
                        dX.append(_sym(Rcb - sc.W @ dSb @ sc.W))
                    else:
                        dX.append(Rcb - ratio * dSb)
                return dX, dy, dS

            def step_lengths(dX, dS):
                ap = ad = np.inf
                scaled = []
                for sc, Xb, Sb, dXb, dSb in zip(scalings, X, S, dX, dS):
                    if sc is not None:
                        dXt, dSt = sc.scaled(dXb, dSb)
                        scaled.append((dXt, dSt))
                        ap = min(ap, _psd_step(sc.v, dXt))
                        ad = min(ad, _psd_step(sc.v, dSt))
                    else:
                        scaled.append(None)
                        ap = min(ap, _orthant_step(Xb, dXb))
                        ad = min(ad, _orthant_step(Sb, dSb))
                return ap, ad, scaled

            # predictor
            dXa, dya, dSa = direction([-Xb for Xb in X])
            ap, ad, scaled_a = step_lengths(dXa, dSa)
            ap, ad = min(1.0, ap), min(1.0, ad)
            mu_aff = sum(
                np.vdot(Xb + ap * dXb, Sb + ad * dSb) for Xb, dXb, Sb, dSb in zip(X, dXa, S, dSa)
            ) / self.nu
            sigma = float(min(1.0, max(0.0, mu_aff / mu) ** 3))

            # corrector
            Rc = []
            for sc, Xb, Sb, dXb, dSb, sa in zip(scalings, X, S, dXa, dSa, scaled_a):
                if sc is not None:
                    dXt, dSt = sa
                    R = -(dXt @ dSt + dSt @ dXt)
                    R[np.diag_indices_from(R)] += 2 * sigma * mu - 2 * sc.v ** 2
                    E = R / (sc.v[:, None] + sc.v[None, :])
                    Rc.append(_sym(sc.G @ E @ sc.G.T))
                else:
                    Rc.append((sigma * mu - Xb * Sb - dXb * dSb) / Sb)
            dX, dy, dS = direction(Rc)
            ap, ad, _ = step_lengths(dX, dS)
            ap = min(1.0, opts.step_fraction * ap)
            ad = min(1.0, opts.step_fraction * ad)

            logger.debug(
                f"iter {it:3d} pobj {pobj:+.10e} dobj {dobj:+.10e} pinf {pinf:.2e} "
                f"dinf {dinf:.2e} mu {mu:.2e} sigma {sigma:.2e} ap {ap:.3f} ad {ad:.3f}"
            )
            if ap < _MIN_STEP and ad < _MIN_STEP:
                logger.warning(f"Step lengths collapsed at iteration {it}")
                return self._stalled(X, y, S, it, pinf, dinf, rel_gap, rel_compl)

            X = [
                _sym(Xb + ap * dXb) if block.kind == BlockKind.PSD else Xb + ap * dXb
                for block, Xb, dXb in zip(blocks, X, dX)
            ]
            S = [
                _sym(Sb + ad * dSb) if block.kind == BlockKind.PSD else Sb + ad * dSb
                for block, Sb, dSb in zip(blocks, S, dS)
            ]
            y = y + ad * dy

        return self._stalled(X, y, S, opts.max_iters, pinf, dinf, rel_gap, rel_compl, limit=True)

    def _stalled(self, X, y, S, it, pinf, dinf, rel_gap, rel_compl, limit=False):
        """Accept a point that stalled within ten times the gap tolerance."""
        opts = self.options
        if (
            pinf <= opts.feas_tol
            and dinf <= opts.feas_tol
            and max(rel_gap, rel_compl) <= 10 * opts.gap_tol
        ):
            logger.info(f"Accepting solution at reduced accuracy, relative gap {rel_gap:.2e}")
            return self.solution(SolveStatus.OPTIMAL, X, y, S, it, pinf, dinf)
        status = SolveStatus.ITER_LIMIT if limit else SolveStatus.NUMERICAL_FAILURE
        return self.solution(status, X, y, S, it, pinf, dinf)
