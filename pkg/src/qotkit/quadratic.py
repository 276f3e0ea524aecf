"""Quadratic-cost optimal transport between quantum states.

The squared distance is ``D(σ, ρ)^2 = min tr[C π]`` over couplings ``π`` of
``σ`` and ``ρ``, with the cost operator
``C = Σ_i (R_i ⊗ 1 - 1 ⊗ R_i^T)^2`` built from observables ``R_i``. It is a
transport cost, not a distance: ``D(σ, σ)`` is generally positive.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channels import KrausChannel, QuantumCoupling, product_coupling
from .conic import ConicProgram, ProgramBuilder, SolveOptions, SolveStatus, solve
from .exceptions import NotATransportPlan, ShapeMismatch, SolverError
from .linalg import FactorShape, hermitian_basis, sqrtm_psd
from .states import DensityOperator, Observable


logger = logging.getLogger(__name__)

PSD_TOL = 1e-8
PLAN_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class QuadraticCost:
    """Observables ``R_i`` on ``X`` and the cost operator ``C`` on ``X ⊗ X*``."""

    observables: tuple
    dim: int
    operator: Observable

    @property
    def num_observables(self) -> int:
        return len(self.observables)


def cost_operator(observables: Sequence[Observable], dim: Optional[int] = None) -> QuadraticCost:
    """Assemble ``C = Σ_i (R_i ⊗ 1 - 1 ⊗ R_i^T)^2``.

    ``dim`` is required when ``observables`` is empty, in which case ``C = 0``.

    Raises
    ------
    ShapeMismatch
        If the observables have different dimensions or disagree with ``dim``.
    """
    observables = tuple(observables)
    for R in observables:
        if not isinstance(R, Observable):
            raise TypeError(f"Expected Observable, got {type(R)}")
    dims = {R.dim for R in observables} | ({dim} if dim is not None else set())
    if len(dims) != 1:
        raise ShapeMismatch(f"Cost observables need one common dimension, got {sorted(dims)}")
    d = dims.pop()
    identity = np.eye(d)
    C = np.zeros((d * d, d * d), dtype=np.complex128)
    for R in observables:
        K = np.kron(R.mat, identity) - np.kron(identity, R.mat.T)
        C += K @ K
    operator = Observable(C, FactorShape((d, d)))
    lam = float(np.linalg.eigvalsh(operator.mat)[0]) if observables else 0.0
    if lam < -PSD_TOL:
        raise ShapeMismatch(f"Cost operator is not PSD, smallest eigenvalue {lam:.3e}")
    return QuadraticCost(observables, d, operator)


@dataclass(frozen=True, eq=False)
class QuadResult:
    value_squared: float
    coupling: QuantumCoupling
    status: SolveStatus

    @property
    def value(self) -> float:
        return float(np.sqrt(max(0.0, self.value_squared)))


def _check(sigma, rho, cost):
    for state in (sigma, rho):
        if not isinstance(state, DensityOperator):
            raise TypeError(f"Expected DensityOperator, got {type(state)}")
    if not isinstance(cost, QuadraticCost):
        raise TypeError(f"Expected QuadraticCost, got {type(cost)}")
    if sigma.dim != cost.dim or rho.dim != cost.dim:
        raise ShapeMismatch(f"States of dims {sigma.dim}, {rho.dim} for a cost on dim {cost.dim}")


def dquad_program(sigma: DensityOperator, rho: DensityOperator, cost: QuadraticCost) -> ConicProgram:
    """The coupling SDP: ``min tr[C π]``, ``π ⪰ 0``, ``tr_Y π = σ^T``, ``tr_X* π = ρ``.

    Marginals are imposed on the Hermitian matrix-unit basis; the last
    diagonal unit of the second family is dropped since both families fix
    the trace.
    """
    _check(sigma, rho, cost)
    d = cost.dim
    identity = np.eye(d)
    builder = ProgramBuilder()
    block = builder.add_hermitian_block(d * d)
    builder.set_objective(block, cost.operator.mat)
    sigma_t = sigma.mat.T
    for E in hermitian_basis(d):
        builder.add_constraint({block: np.kron(identity, E)}, np.real(np.trace(E @ sigma_t)))
    for k, E in enumerate(hermitian_basis(d)):
        if k == d - 1:
            continue
        builder.add_constraint({block: np.kron(E, identity)}, np.real(np.trace(E @ rho.mat)))
    return builder.build()


def dquad(
    sigma: DensityOperator,
    rho: DensityOperator,
    cost: QuadraticCost,
    options: Optional[SolveOptions] = None,
) -> QuadResult:
    """Minimal quadratic transport cost ``D(σ, ρ)^2`` and an optimal coupling.

    When ``σ`` or ``ρ`` is pure, or the cost is zero, the product coupling is
    optimal (it is the only coupling in the pure case) and no SDP is solved.

    Raises
    ------
    SolverError
        If the SDP is not solved to optimality.
    """
    _check(sigma, rho, cost)
    if cost.num_observables == 0 or sigma.rank == 1 or rho.rank == 1:
        coupling = product_coupling(sigma, rho)
        value = float(np.real(np.trace(cost.operator.mat @ coupling.state.mat)))
        return QuadResult(value, coupling, SolveStatus.OPTIMAL)

    solution = solve(dquad_program(sigma, rho, cost), options)
    if not solution.is_optimal:
        raise SolverError(f"Coupling SDP ended with {solution.status.value}", solution)
    pi = solution.hermitian_primal(0)
    pi = pi / np.real(np.trace(pi))
    state = DensityOperator(pi, FactorShape((rho.dim, sigma.dim)))
    coupling = QuantumCoupling(state, sigma, rho)
    value = float(np.real(np.trace(cost.operator.mat @ pi)))
    logger.debug(f"D^2 = {value:.10g} after {solution.iterations} iterations")
    return QuadResult(value, coupling, solution.status)


def _second_moments(sigma: DensityOperator, cost: QuadraticCost):
    """``(Σ tr[R^2 σ], Σ tr[R sqrt(σ) R sqrt(σ)])``."""
    root = sqrtm_psd(sigma.mat)
    square = sum(np.real(np.trace(R.mat @ R.mat @ sigma.mat)) for R in cost.observables)
    cross = sum(np.real(np.trace(R.mat @ root @ R.mat @ root)) for R in cost.observables)
    return float(square), float(cross)


def plan_cost(
    channel: KrausChannel,
    sigma: DensityOperator,
    rho: DensityOperator,
    cost: QuadraticCost,
) -> float:
    """Cost of the transport plan ``Φ`` from ``σ`` to ``ρ``.

    ``Σ_i tr[R_i^2 σ] + tr[R_i^2 ρ] - 2 tr[R_i sqrt(σ) Φ^dagger(R_i) sqrt(σ)]``,
    equal to ``tr[C π_Φ]``.

    Raises
    ------
    NotATransportPlan
        If ``Φ(σ)`` differs from ``ρ`` by more than 1e-6.
    """
    _check(sigma, rho, cost)
    if channel.dim_in != sigma.dim or channel.dim_out != rho.dim:
        raise ShapeMismatch("Channel dimensions do not match the states")
    err = float(np.max(np.abs(channel.apply(sigma.mat) - rho.mat)))
    if err > PLAN_TOL:
        raise NotATransportPlan(f"Channel maps σ to a state {err:.3e} away from ρ")
    root = sqrtm_psd(sigma.mat)
    adjoint = channel.adjoint()
    total = 0.0
    for R in cost.observables:
        total += np.real(np.trace(R.mat @ R.mat @ sigma.mat))
        total += np.real(np.trace(R.mat @ R.mat @ rho.mat))
        total -= 2 * np.real(np.trace(R.mat @ root @ adjoint.apply(R.mat) @ root))
    return float(total)


def self_cost_identity(sigma: DensityOperator, cost: QuadraticCost) -> float:
    """``D(σ, σ)^2`` in closed form: ``2 Σ_i (tr[R_i^2 σ] - tr[R_i sqrt(σ) R_i sqrt(σ)])``."""
    _check(sigma, sigma, cost)
    square, cross = _second_moments(sigma, cost)
    return 2 * (square - cross)


def dquad_lower_bound(sigma: DensityOperator, rho: DensityOperator, cost: QuadraticCost) -> float:
    """``½ D(σ, σ)^2 + ½ D(ρ, ρ)^2``, a lower bound on ``D(σ, ρ)^2``, tight for ``σ = ρ``."""
    _check(sigma, rho, cost)
    s_square, s_cross = _second_moments(sigma, cost)
    r_square, r_cross = _second_moments(rho, cost)
    return (s_square - s_cross) + (r_square - r_cross)


def lieb_monotonicity_gap(channel: KrausChannel, sigma: DensityOperator, R: Observable) -> float:
    """``tr[R sqrt(ρ) R sqrt(ρ)] - tr[Φ^dagger(R) sqrt(σ) Φ^dagger(R) sqrt(σ)]`` with ``ρ = Φ(σ)``.

    Nonnegative by the monotonicity form of Lieb's concavity theorem.
    """
    rho_root = sqrtm_psd(channel.apply(sigma.mat))
    sigma_root = sqrtm_psd(sigma.mat)
    pulled = channel.adjoint().apply(R.mat)
    outer = np.real(np.trace(R.mat @ rho_root @ R.mat @ rho_root))
    inner = np.real(np.trace(pulled @ sigma_root @ pulled @ sigma_root))
    return float(outer - inner)


def centered_from_values(cross: float, self_sigma: float, self_rho: float) -> float:
    """``sqrt(D(σ,ρ)^2 - ½ D(σ,σ)^2 - ½ D(ρ,ρ)^2)`` from the three squared costs, clamped at 0."""
    return float(np.sqrt(max(0.0, cross - 0.5 * self_sigma - 0.5 * self_rho)))


def centered_distance(
    sigma: DensityOperator,
    rho: DensityOperator,
    cost: QuadraticCost,
    options: Optional[SolveOptions] = None,
) -> float:
    """Centered transport cost, an experimental statistic whose triangle inequality is open."""
    cross = dquad(sigma, rho, cost, options).value_squared
    return centered_from_values(cross, self_cost_identity(sigma, cost), self_cost_identity(rho, cost))
