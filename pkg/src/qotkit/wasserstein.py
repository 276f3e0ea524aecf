"""Wasserstein distance of order 1 between n-qubit states and its dual.

``W1(ρ, σ)`` is the smallest ``Σ_i ½ ||X_i||_1`` over decompositions
``ρ - σ = Σ_i X_i`` with ``tr_i X_i = 0``. Splitting ``X_i = P_i - N_i`` with
``P_i, N_i ⪰ 0`` turns it into the SDP built by :func:`w1_program`. Its dual
maximizes ``tr[A (ρ - σ)]`` over observables of quantum Lipschitz constant at
most 1, where ``||A||_L = 2 max_i min_B ||A - 1_i ⊗ B||``.
"""

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from . import conf
from .channels import KrausChannel, random_neighbor_pair
from .conic import ConicProgram, ProgramBuilder, SolveOptions, SolveStatus, solve
from .exceptions import MarginalMismatch, ShapeMismatch, SolverError
from .linalg import FactorShape, hermitian_basis, lift, opnorm, partial_trace, schatten1
from .states import DensityOperator, Observable, random_state


logger = logging.getLogger(__name__)

#: States closer than this entrywise are treated as equal.
EQUAL_TOL = 1e-14
MARGINAL_TOL = 1e-7
BOUND_TOL = 1e-6


def _num_qubits(obj) -> int:
    if not isinstance(obj, Observable):
        raise TypeError(f"Expected Observable or DensityOperator, got {type(obj)}")
    if not obj.shape.is_qubits:
        raise ShapeMismatch(f"Expected an all-qubit shape, got factor dims {obj.shape.dims}")
    n = len(obj.shape)
    limit = conf.nmax()
    if n > limit:
        raise ShapeMismatch(f"{n} qubits exceed the cap of {limit} (QOTKIT_NMAX)")
    return n


def _check_pair(rho, sigma) -> int:
    for state in (rho, sigma):
        if not isinstance(state, DensityOperator):
            raise TypeError(f"Expected DensityOperator, got {type(state)}")
    n = _num_qubits(rho)
    if sigma.shape != rho.shape:
        raise ShapeMismatch(f"States on {rho.shape.dims} and {sigma.shape.dims}")
    return n


def _site_operators(n: int, site: int) -> list:
    """Hermitian basis of the qubits other than ``site``, lifted to all ``n`` qubits."""
    shape = FactorShape.qubits(n)
    rest = [j for j in range(n) if j != site]
    return [lift(E, shape, rest) for E in hermitian_basis(2 ** (n - 1))]


def _jordan(X):
    w, V = np.linalg.eigh(X)
    positive = (V * np.clip(w, 0, None)) @ V.conj().T
    return positive, positive - X


@dataclass(frozen=True, eq=False)
class W1Result:
    """Optimal value and decomposition ``ρ - σ = Σ_i X_i`` with ``tr_i X_i = 0``."""

    value: float
    decomposition: tuple
    status: SolveStatus

    def jordan_terms(self) -> list:
        """``(c_i, ρ^(i), σ^(i))`` with ``X_i = c_i (ρ^(i) - σ^(i))``, ``c_i = ½ ||X_i||_1``.

        Sites with ``c_i`` below 1e-12 give ``(0.0, None, None)``.
        """
        terms = []
        for X in self.decomposition:
            positive, negative = _jordan(X)
            c = float(np.real(np.trace(positive) + np.trace(negative))) / 2
            if c <= 1e-12:
                terms.append((0.0, None, None))
            else:
                terms.append((c, positive / c, negative / c))
        return terms

    @property
    def decomposition_cost(self) -> float:
        return float(sum(0.5 * schatten1(X) for X in self.decomposition))


@dataclass(frozen=True, eq=False)
class DualW1Result:
    value: float
    witness: Observable
    status: SolveStatus


@dataclass(frozen=True, eq=False)
class SiteLipschitz:
    """``t = ||A - 1_i ⊗ B||`` for the minimizer ``B`` on the other qubits."""

    t: float
    minimizer: Observable


@dataclass(frozen=True, eq=False)
class LipschitzResult:
    value: float
    per_site: tuple


@dataclass(frozen=True)
class BoundCheck:
    value: float
    bound: float
    holds: bool
    decomposition_cost: Optional[float] = None


class ContractionInterval(NamedTuple):
    lower: float
    upper: float


def w1_program(rho: DensityOperator, sigma: DensityOperator) -> ConicProgram:
    """Primal SDP for ``W1(ρ, σ)`` with blocks ``P_1, N_1, ..., P_n, N_n``.

    The first ``4^n - 1`` constraints impose ``Σ_i (P_i - N_i) = ρ - σ`` on the
    matrix-unit basis without its last diagonal unit, their multipliers are
    the coordinates of the dual witness. The rest impose ``tr_i X_i = 0``.
    """
    n = _check_pair(rho, sigma)
    D = 2 ** n
    builder = ProgramBuilder()
    blocks = []
    for _ in range(n):
        P, N = builder.add_hermitian_block(D), builder.add_hermitian_block(D)
        builder.set_objective(P, np.eye(D) / 2)
        builder.set_objective(N, np.eye(D) / 2)
        blocks.append((P, N))
    delta = rho.mat - sigma.mat
    for k, F in enumerate(hermitian_basis(D)):
        if k == D - 1:
            continue
        terms = {}
        for P, N in blocks:
            terms[P] = F
            terms[N] = -F
        builder.add_constraint(terms, np.real(np.trace(F @ delta)))
    for site, (P, N) in enumerate(blocks):
        for G in _site_operators(n, site):
            builder.add_constraint({P: G, N: -G}, 0.0)
    return builder.build()


def _solve_w1(rho, sigma, options):
    solution = solve(w1_program(rho, sigma), options)
    if not solution.is_optimal:
        raise SolverError(f"W1 SDP ended with {solution.status.value}", solution)
    return solution


def _decomposition(solution, n: int) -> tuple:
    return tuple(solution.hermitian_primal(2 * i) - solution.hermitian_primal(2 * i + 1) for i in range(n))


def _witness(solution, rho: DensityOperator, sigma: DensityOperator, n: int) -> DualW1Result:
    D = 2 ** n
    basis = np.delete(np.asarray(hermitian_basis(D)), D - 1, axis=0)
    A = np.tensordot(solution.y[: D * D - 1], basis, axes=1)
    A = (A + A.conj().T) / 2
    A = A - np.trace(A).real / D * np.eye(D)
    value = float(np.real(np.trace(A @ (rho.mat - sigma.mat))))
    return DualW1Result(value, Observable(A, FactorShape.qubits(n)), solution.status)


def _zero_pair(n: int) -> tuple:
    D = 2 ** n
    zeros = tuple(np.zeros((D, D), dtype=np.complex128) for _ in range(n))
    primal = W1Result(0.0, zeros, SolveStatus.OPTIMAL)
    dual = DualW1Result(0.0, Observable(np.zeros((D, D)), FactorShape.qubits(n)), SolveStatus.OPTIMAL)
    return primal, dual


def w1_with_dual(
    rho: DensityOperator, sigma: DensityOperator, options: Optional[SolveOptions] = None
) -> tuple[W1Result, DualW1Result]:
    """:func:`w1` and :func:`w1_dual` read off a single SDP solve."""
    n = _check_pair(rho, sigma)
    if np.max(np.abs(rho.mat - sigma.mat)) <= EQUAL_TOL:
        return _zero_pair(n)
    solution = _solve_w1(rho, sigma, options)
    logger.debug(f"W1 = {solution.obj_primal:.10g} on {n} qubits")
    primal = W1Result(float(solution.obj_primal), _decomposition(solution, n), solution.status)
    return primal, _witness(solution, rho, sigma, n)


def w1(rho: DensityOperator, sigma: DensityOperator, options: Optional[SolveOptions] = None) -> W1Result:
    """Quantum W1 distance with an optimal decomposition.

    Raises
    ------
    ShapeMismatch
        If the states are not on the same all-qubit shape or exceed the qubit cap.
    SolverError
        If the SDP is not solved to optimality.
    """
    return w1_with_dual(rho, sigma, options)[0]


def w1_dual(rho: DensityOperator, sigma: DensityOperator, options: Optional[SolveOptions] = None) -> DualW1Result:
    """Dual of :func:`w1`: a traceless witness ``A`` with ``||A||_L <= 1`` and its value ``tr[A(ρ - σ)]``."""
    return w1_with_dual(rho, sigma, options)[1]


def lipschitz_program(A: Observable, site: int) -> ConicProgram:
    """Site SDP whose optimum is ``-min_B ||A - 1_site ⊗ B||``.

    Primal: ``min <-A, X1> + <A, X2>`` over ``X1, X2 ⪰ 0`` with
    ``tr X1 + tr X2 = 1`` and ``tr_site X1 = tr_site X2``. The multipliers of
    the marginal constraints give ``-B``.
    """
    n = _num_qubits(A)
    if not 0 <= site < n:
        raise ShapeMismatch(f"Site {site} out of range for {n} qubits")
    D = 2 ** n
    builder = ProgramBuilder()
    X1, X2 = builder.add_hermitian_block(D), builder.add_hermitian_block(D)
    builder.set_objective(X1, -A.mat)
    builder.set_objective(X2, A.mat)
    builder.add_constraint({X1: np.eye(D), X2: np.eye(D)}, 1.0)
    for G in _site_operators(n, site):
        builder.add_constraint({X1: G, X2: -G}, 0.0)
    return builder.build()


def lipschitz(A: Observable, options: Optional[SolveOptions] = None) -> LipschitzResult:
    """Quantum Lipschitz constant ``||A||_L = 2 max_i t_i``.

    Each ``t_i`` is reported as ``||A - 1_i ⊗ B_i||`` for the minimizer ``B_i``
    recovered from the site SDP, which is an upper bound on the exact site
    value within solver accuracy.
    """
    n = _num_qubits(A)
    shape = FactorShape.qubits(n)
    sub_basis = np.asarray(hermitian_basis(2 ** (n - 1)))
    per_site = []
    for site in range(n):
        solution = solve(lipschitz_program(A, site), options)
        if not solution.is_optimal:
            raise SolverError(f"Lipschitz SDP for site {site} ended with {solution.status.value}", solution)
        B = -np.tensordot(solution.y[1:], sub_basis, axes=1)
        B = (B + B.conj().T) / 2
        rest = [j for j in range(n) if j != site]
        t = opnorm(A.mat - lift(B, shape, rest))
        minimizer = Observable(B, FactorShape.qubits(n - 1) if n > 1 else FactorShape.single(1))
        per_site.append(SiteLipschitz(t, minimizer))
        logger.debug(f"Site {site}: t = {t:.10g}, SDP value {-solution.obj_primal:.10g}")
    return LipschitzResult(2 * max(s.t for s in per_site), tuple(per_site))


def spectrum_interval_check(A: Observable, lipschitz_value: Optional[float] = None) -> bool:
    """Whether every eigenvalue of ``A`` lies in ``tr A / 2^n ± n ||A||_L``."""
    n = _num_qubits(A)
    if lipschitz_value is None:
        lipschitz_value = lipschitz(A).value
    w = np.linalg.eigvalsh(A.mat)
    center = float(np.real(np.trace(A.mat))) / A.dim
    return bool(np.max(np.abs(w - center)) <= n * lipschitz_value + BOUND_TOL)


def telescoping_decomposition(rho: DensityOperator, sigma: DensityOperator, sites: Sequence[int]) -> list:
    """Feasible W1 decomposition for states that agree after tracing out ``sites``.

    With ``ρ^(j) = 2^-j 1 ⊗ tr_{s_1..s_j} ρ`` the terms
    ``X_j = (ρ^(j-1) - ρ^(j)) - (σ^(j-1) - σ^(j))`` satisfy ``tr_{s_j} X_j = 0``
    and sum to ``ρ - σ``. Returns ``(site, X_j)`` pairs, cost at most ``2k``.

    Raises
    ------
    MarginalMismatch
        If ``ρ`` and ``σ`` differ after tracing out ``sites``.
    """
    n = _check_pair(rho, sigma)
    shape = FactorShape.qubits(n)
    sites = list(sites)
    err = float(
        np.max(np.abs(partial_trace(rho.mat, shape, sites) - partial_trace(sigma.mat, shape, sites)))
    )
    if err > MARGINAL_TOL:
        raise MarginalMismatch(f"States differ by {err:.3e} after tracing out {sites}")

    def hybrid(state, j):
        traced = sites[:j]
        kept = shape.complement(traced)
        return lift(partial_trace(state.mat, shape, traced), shape, kept) / 2 ** j

    terms = []
    for j in range(1, len(sites) + 1):
        X = (hybrid(rho, j - 1) - hybrid(rho, j)) - (hybrid(sigma, j - 1) - hybrid(sigma, j))
        terms.append([sites[j - 1], X])
    if terms:
        terms[-1][1] = terms[-1][1] + hybrid(rho, len(sites)) - hybrid(sigma, len(sites))
    return [tuple(t) for t in terms]


def neighbor_bound(
    rho: DensityOperator,
    sigma: DensityOperator,
    site: int,
    options: Optional[SolveOptions] = None,
) -> BoundCheck:
    """Check ``W1(ρ, σ) <= 1`` for states that agree after tracing out ``site``.

    Raises
    ------
    MarginalMismatch
        If ``tr_site ρ`` and ``tr_site σ`` differ by more than 1e-7.
    """
    n = _check_pair(rho, sigma)
    if not 0 <= site < n:
        raise ShapeMismatch(f"Site {site} out of range for {n} qubits")
    (_, X), = telescoping_decomposition(rho, sigma, [site])
    value = w1(rho, sigma, options).value
    return BoundCheck(value, 1.0, value <= 1.0 + BOUND_TOL, 0.5 * schatten1(X))


def local_channel_bound(
    channel: KrausChannel,
    rho: DensityOperator,
    sites: Sequence[int],
    options: Optional[SolveOptions] = None,
) -> BoundCheck:
    """Check ``W1(ρ, Φ(ρ)) <= 2k`` for a channel ``Φ`` acting on the ``k`` qubits in ``sites``.

    ``channel`` acts on ``2^k`` dimensions and is applied to ``sites`` with the
    identity elsewhere. The telescoping decomposition gives a feasible point
    whose cost is reported alongside.
    """
    n = _num_qubits(rho)
    sites = list(sites)
    shape = FactorShape.qubits(n)
    if channel.dim_in != 2 ** len(sites) or channel.dim_out != channel.dim_in:
        raise ShapeMismatch(f"Channel of dims {channel.dim_in} -> {channel.dim_out} for sites {sites}")
    image = DensityOperator(channel.tensor_identity(shape, sites).apply(rho.mat), shape)
    terms = telescoping_decomposition(rho, image, sites)
    cost = float(sum(0.5 * schatten1(X) for _, X in terms))
    value = w1(rho, image, options).value
    bound = 2.0 * len(sites)
    return BoundCheck(value, bound, value <= bound + BOUND_TOL, cost)


def contraction_interval(
    channel: KrausChannel,
    trials: int,
    seed: int = 0,
    options: Optional[SolveOptions] = None,
    w1_fn: Callable = None,
) -> ContractionInterval:
    """Interval containing the W1 contraction coefficient of a qubit channel.

    The lower end is the largest sampled ratio ``W1(Φρ, Φσ) / W1(ρ, σ)``;
    odd trials draw neighbor pairs. The upper end is the number of output
    qubits, from ``W1 <= n D_tr`` and trace-distance contraction.
    """
    w1_fn = w1_fn or (lambda a, b: w1(a, b, options).value)
    n_in = int(channel.dim_in).bit_length() - 1
    n_out = int(channel.dim_out).bit_length() - 1
    if 2 ** n_in != channel.dim_in or 2 ** n_out != channel.dim_out or n_in < 1 or n_out < 1:
        raise ShapeMismatch("Contraction needs a channel between qubit systems")
    in_shape, out_shape = FactorShape.qubits(n_in), FactorShape.qubits(n_out)
    lower = 0.0
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        if trial % 2:
            rho, sigma = random_neighbor_pair(n_in, (trial // 2) % n_in, rng)
        else:
            rho, sigma = random_state(in_shape, seed=rng), random_state(in_shape, seed=rng)
        before = w1_fn(rho, sigma)
        if before <= 1e-9:
            continue
        after = w1_fn(
            DensityOperator(channel.apply(rho.mat), out_shape),
            DensityOperator(channel.apply(sigma.mat), out_shape),
        )
        lower = max(lower, after / before)
    return ContractionInterval(lower, float(n_out))


def contraction_lower_bound(
    channel: KrausChannel,
    trials: int,
    seed: int = 0,
    options: Optional[SolveOptions] = None,
) -> float:
    return contraction_interval(channel, trials, seed, options).lower
