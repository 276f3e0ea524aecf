"""Discrete optimal transport and classical divergences.

Distributions on ``{0,1}^n`` are indexed in big-endian bit order: index
``x = sum_i b_i 2^(n-1-i)`` with bit 0 the most significant, the same order
as the computational basis of an n-qubit system.

Kantorovich problems are solved as LPs through :mod:`qotkit.conic`.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional

import numpy as np
import numpy.typing as npt
from scipy.special import rel_entr

from .conic import ProgramBuilder, SolveOptions, solve
from .exceptions import (
    DomainError,
    InvalidDistribution,
    MarginalMismatch,
    NonMetricCost,
    ShapeMismatch,
    SolverError,
)


logger = logging.getLogger(__name__)

NEGATIVE_TOL = 1e-12
SUM_TOL = 1e-9
METRIC_TOL = 1e-9
COUPLING_TOL = 1e-8

#: LP tolerances for Kantorovich problems, tighter than the solver defaults.
KANTOROVICH_OPTIONS = {"gap_tol": 1e-11, "feas_tol": 1e-11}


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector on ``{0, ..., N-1}``.

    Entries down to ``-1e-12`` are accepted and clamped to 0.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise InvalidDistribution(f"Expected a non-empty vector, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidDistribution("Probabilities must be finite")
        if np.min(p) < -NEGATIVE_TOL:
            raise InvalidDistribution(f"Negative probability {np.min(p):.3e}")
        if abs(p.sum() - 1) > SUM_TOL:
            raise InvalidDistribution(f"Probabilities sum to {p.sum():.12g}, not 1")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, size: int) -> "Distribution":
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def delta(cls, size: int, index: int) -> "Distribution":
        p = np.zeros(size)
        p[index] = 1.0
        return cls(p)

    @classmethod
    def normalized(cls, weights) -> "Distribution":
        w = np.asarray(weights, dtype=np.float64)
        return cls(w / w.sum())

    @property
    def size(self) -> int:
        return self.probs.size

    @property
    def support(self) -> npt.NDArray[np.bool_]:
        return self.probs > 0


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Finite real cost ``c(x, y)``; metric properties are checked on demand."""

    values: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.values, dtype=np.float64)
        if c.ndim != 2 or c.size == 0:
            raise ShapeMismatch(f"Expected a non-empty matrix, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise DomainError("Cost entries must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "values", c)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def metric_violation(self) -> float:
        """Largest violation of symmetry, zero diagonal, nonnegativity or the triangle inequality."""
        c = self.values
        if c.shape[0] != c.shape[1]:
            return np.inf
        triangle = c[:, None, :] - c[:, :, None] - c[None, :, :]
        # triangle[x, y, z] = c(x, z) - c(x, y) - c(y, z)
        return float(
            max(
                np.max(np.abs(c - c.T)),
                np.max(np.abs(np.diag(c))),
                max(0.0, -np.min(c)),
                max(0.0, np.max(triangle)),
            )
        )

    def is_metric(self, tol: float = METRIC_TOL) -> bool:
        return self.metric_violation() <= tol

    def check_metric(self, tol: float = METRIC_TOL) -> None:
        violation = self.metric_violation()
        if violation > tol:
            raise NonMetricCost(f"Cost is not a metric, violation {violation:.3e}")

    def power(self, p: float) -> "CostMatrix":
        return CostMatrix(self.values ** p)


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Nonnegative ``N x M`` matrix with row sums ``σ`` and column sums ``ρ``."""

    values: np.ndarray

    def __post_init__(self):
        pi = np.clip(np.asarray(self.values, dtype=np.float64), 0.0, None)
        if pi.ndim != 2:
            raise ShapeMismatch(f"Expected a matrix, got shape {pi.shape}")
        pi.setflags(write=False)
        object.__setattr__(self, "values", pi)

    def check_marginals(self, sigma: Distribution, rho: Distribution, tol: float = COUPLING_TOL):
        if self.values.shape != (sigma.size, rho.size):
            raise ShapeMismatch("Coupling shape does not match the marginals")
        err = max(
            np.max(np.abs(self.values.sum(axis=1) - sigma.probs)),
            np.max(np.abs(self.values.sum(axis=0) - rho.probs)),
        )
        if err > tol:
            raise MarginalMismatch(f"Coupling marginals off by {err:.3e}")

    def cost(self, c: CostMatrix) -> float:
        return float(np.sum(c.values * self.values))


class TransportResult(NamedTuple):
    value: float
    plan: CouplingMatrix


class DualPotential(NamedTuple):
    value: float
    potential: npt.NDArray[np.float64]


def _check_pair(sigma, rho, c: Optional[CostMatrix] = None):
    if not isinstance(sigma, Distribution) or not isinstance(rho, Distribution):
        raise TypeError(f"Expected Distribution, got {type(sigma)} and {type(rho)}")
    if c is not None:
        if not isinstance(c, CostMatrix):
            raise TypeError(f"Expected CostMatrix, got {type(c)}")
        if c.shape != (sigma.size, rho.size):
            raise ShapeMismatch(f"Cost of shape {c.shape} for supports {sigma.size}, {rho.size}")
    elif sigma.size != rho.size:
        raise ShapeMismatch(f"Support sizes differ: {sigma.size} and {rho.size}")


def _solve_transport(sigma, rho, c, options):
    """Solve the Kantorovich LP, returning the plan and the row/column multipliers."""
    N, M = c.shape
    builder = ProgramBuilder()
    block = builder.add_nonneg_block(N * M)
    builder.set_objective(block, c.values.reshape(-1))
    for x in range(N):
        row = np.zeros((N, M))
        row[x, :] = 1
        builder.add_constraint({block: row.reshape(-1)}, sigma.probs[x])
    # the last column sum is implied by the others
    for y in range(M - 1):
        col = np.zeros((N, M))
        col[:, y] = 1
        builder.add_constraint({block: col.reshape(-1)}, rho.probs[y])

    if options is None:
        options = SolveOptions.from_settings(**KANTOROVICH_OPTIONS)
    solution = solve(builder.build(), options)
    if not solution.is_optimal:
        raise SolverError(f"Kantorovich LP ended with {solution.status.value}", solution)
    plan = CouplingMatrix(solution.primal[block].reshape(N, M))
    f = solution.y[:N]
    g = np.concatenate([solution.y[N:], [0.0]])
    return plan, f, g


def kantorovich(
    sigma: Distribution,
    rho: Distribution,
    c: CostMatrix,
    options: Optional[SolveOptions] = None,
) -> TransportResult:
    """Optimal transport cost ``min_π Σ c π`` over couplings of ``σ`` and ``ρ``.

    Raises
    ------
    ShapeMismatch
        If the cost shape does not match the supports.
    SolverError
        If the LP is not solved to optimality.
    """
    _check_pair(sigma, rho, c)
    plan, _, _ = _solve_transport(sigma, rho, c, options)
    return TransportResult(plan.cost(c), plan)


def product_coupling(sigma: Distribution, rho: Distribution) -> CouplingMatrix:
    _check_pair(sigma, rho, CostMatrix(np.zeros((sigma.size, rho.size))))
    return CouplingMatrix(np.outer(sigma.probs, rho.probs))


def is_lipschitz(f, d: CostMatrix, tol: float = 1e-8) -> bool:
    """Whether ``|f(x) - f(y)| <= d(x, y) + tol`` for all pairs."""
    f = np.asarray(f, dtype=np.float64)
    return bool(np.all(np.abs(f[:, None] - f[None, :]) <= d.values + tol))


def dual_w1(
    sigma: Distribution,
    rho: Distribution,
    d: CostMatrix,
    options: Optional[SolveOptions] = None,
) -> DualPotential:
    """Kantorovich-Rubinstein dual: ``max Σ f (σ - ρ)`` over 1-Lipschitz ``f``.

    The potential comes from the LP multipliers: the column potential ``g`` is
    turned into ``φ(x) = min_y d(x, y) - g(y)`` and then re-projected by the
    inf-convolution ``φ(x) = min_y φ(y) + d(x, y)``, which makes it
    1-Lipschitz up to rounding.

    Raises
    ------
    NonMetricCost
        If ``d`` is not a metric.
    """
    _check_pair(sigma, rho, d)
    d.check_metric()
    _, _, g = _solve_transport(sigma, rho, d, options)
    D = d.values
    phi = np.min(D - g[None, :], axis=1)
    phi = np.min(phi[None, :] + D, axis=1)
    phi = phi - phi.min()
    value = float(phi @ (sigma.probs - rho.probs))
    return DualPotential(value, phi)


def wasserstein_p(
    sigma: Distribution,
    rho: Distribution,
    d: CostMatrix,
    p: float,
    options: Optional[SolveOptions] = None,
) -> float:
    """Wasserstein distance of order ``p``.

    For ``p >= 1`` this is ``(min Σ d^p π)^(1/p)``; for ``0 < p < 1`` the
    transport cost ``min Σ d^p π`` itself, which is then a distance.

    Raises
    ------
    DomainError
        If ``p <= 0``.
    """
    if not p > 0:
        raise DomainError(f"Order p must be positive, got {p}")
    d.check_metric()
    value = kantorovich(sigma, rho, d.power(p), options).value
    value = max(value, 0.0)
    return value ** (1.0 / p) if p >= 1 else value


def tv(sigma: Distribution, rho: Distribution) -> float:
    _check_pair(sigma, rho)
    return 0.5 * float(np.sum(np.abs(sigma.probs - rho.probs)))


def hellinger(sigma: Distribution, rho: Distribution) -> float:
    """Hellinger distance ``sqrt(1 - Σ sqrt(σ ρ))``, in ``[0, 1]``."""
    _check_pair(sigma, rho)
    affinity = float(np.sum(np.sqrt(sigma.probs * rho.probs)))
    return float(np.sqrt(max(0.0, 1.0 - affinity)))


def kl(sigma: Distribution, rho: Distribution) -> float:
    """Kullback-Leibler divergence with natural logarithm; ``inf`` off support."""
    _check_pair(sigma, rho)
    return max(0.0, float(np.sum(rel_entr(sigma.probs, rho.probs))))


def _cube_order(size: int) -> int:
    n = int(size).bit_length() - 1
    if size < 2 or 2 ** n != size:
        raise ShapeMismatch(f"Support size {size} is not a power of 2")
    return n


def hamming_cost(n: int) -> CostMatrix:
    """Hamming distance on ``{0,1}^n`` in big-endian index order."""
    x = np.arange(2 ** n)
    xor = x[:, None] ^ x[None, :]
    bits = (xor[..., None] >> np.arange(n)) & 1
    return CostMatrix(bits.sum(axis=-1).astype(np.float64))


def hamming_w1(p: Distribution, q: Distribution, options: Optional[SolveOptions] = None) -> float:
    """W1 on the Hamming cube.

    Raises
    ------
    ShapeMismatch
        If the support size is not a power of 2.
    """
    _check_pair(p, q)
    n = _cube_order(p.size)
    return kantorovich(p, q, hamming_cost(n), options).value


def marginal(p: Distribution, dropped: Iterable[int]) -> Distribution:
    """Marginal of a cube distribution after deleting the bits in ``dropped``.

    Bit 0 is the most significant bit.
    """
    n = _cube_order(p.size)
    dropped = sorted(set(dropped))
    if any(i < 0 or i >= n for i in dropped):
        raise ShapeMismatch(f"Bit indices {dropped} out of range for n = {n}")
    if len(dropped) == n:
        return Distribution(np.ones(1))
    tensor = p.probs.reshape((2,) * n)
    return Distribution(tensor.sum(axis=tuple(dropped)).reshape(-1))


def kantorovich_2x2_bruteforce(sigma: Distribution, rho: Distribution, c: CostMatrix) -> float:
    """Exact optimum on two-point spaces by enumerating the transport polytope.

    The couplings form the segment ``[[a, σ0 - a], [ρ0 - a, σ1 - ρ0 + a]]``
    with ``max(0, ρ0 - σ1) <= a <= min(σ0, ρ0)``; the cost is linear in ``a``
    so the optimum is at an endpoint.
    """
    _check_pair(sigma, rho, c)
    if c.shape != (2, 2):
        raise ShapeMismatch("Brute force is only implemented for two-point spaces")
    s0, s1 = sigma.probs
    r0 = rho.probs[0]
    best = np.inf
    for a in (max(0.0, r0 - s1), min(s0, r0)):
        plan = np.array([[a, s0 - a], [r0 - a, s1 - r0 + a]])
        best = min(best, float(np.sum(c.values * plan)))
    return best
