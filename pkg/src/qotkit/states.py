"""Observables, density operators, entropies and distances between states."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import numpy.typing as npt
from scipy.special import entr

from .classical import Distribution
from .exceptions import NotADensityOperator, ShapeMismatch
from .linalg import (
    ComplexMatrix,
    FactorShape,
    HermitianEig,
    check_hermitian,
    eigh,
    hermitian_part,
    kron_all,
    lift,
    matfunc,
    partial_trace,
    schatten1,
    sqrtm_psd,
    transpose_op,
)


logger = logging.getLogger(__name__)

PSD_TOL = 1e-9
TRACE_TOL = 1e-9
NORM_TOL = 1e-9
#: Eigenvalues at or below this span the kernel in :func:`rel_entropy`.
KERNEL_TOL = 1e-10
#: Eigenvalues at or below this do not contribute to :func:`vn_entropy`.
ENTROPY_CUTOFF = 1e-12
#: Ties in the Helstrom measurement go to the positive projector.
HELSTROM_TIE = 1e-12

Seed = Union[int, Sequence[int], np.random.Generator, None]

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def make_rng(seed: Seed) -> np.random.Generator:
    """Return ``seed`` if it is a generator, else a fresh PCG64 generator seeded with it."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _as_shape(shape) -> FactorShape:
    if isinstance(shape, FactorShape):
        return shape
    if isinstance(shape, (int, np.integer)):
        return FactorShape.single(int(shape))
    return FactorShape(tuple(shape))


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian operator on a composite system.

    ``shape`` defaults to a single factor. The stored matrix is the exact
    Hermitian part of the input and is read-only.
    """

    mat: np.ndarray
    shape: Optional[FactorShape] = None

    def __post_init__(self):
        mat = check_hermitian(self.mat)
        shape = _as_shape(self.shape) if self.shape is not None else FactorShape.single(mat.shape[0])
        shape.check(mat.shape[0])
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)
        object.__setattr__(self, "shape", shape)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def num_qubits(self) -> int:
        if not self.shape.is_qubits:
            raise ShapeMismatch(f"Factor dims {self.shape.dims} are not all qubits")
        return len(self.shape)

    def eigh(self) -> HermitianEig:
        return eigh(self.mat)

    def expectation(self, rho: "DensityOperator") -> float:
        return float(np.real(np.trace(self.mat @ rho.mat)))

    @classmethod
    def identity(cls, shape) -> "Observable":
        shape = _as_shape(shape)
        return cls(np.eye(shape.total), shape)

    @classmethod
    def local(cls, op, shape, sites: Sequence[int]) -> "Observable":
        """``op`` acting on ``sites``, identity elsewhere."""
        shape = _as_shape(shape)
        return cls(lift(op, shape, sites), shape)

    @classmethod
    def pauli(cls, label: str) -> "Observable":
        """Pauli string such as ``"XZ"``, factor 0 first."""
        ops = [PAULI[c] for c in label.upper()]
        return cls(kron_all(ops), FactorShape.qubits(len(ops)))


@dataclass(frozen=True, eq=False)
class DensityOperator(Observable):
    """PSD operator with unit trace, validated within 1e-9."""

    def __post_init__(self):
        super().__post_init__()
        w = np.linalg.eigvalsh(self.mat)
        if w[0] < -PSD_TOL:
            raise NotADensityOperator(f"Smallest eigenvalue {w[0]:.3e} is negative")
        tr = float(np.real(np.trace(self.mat)))
        if abs(tr - 1) > TRACE_TOL:
            raise NotADensityOperator(f"Trace is {tr:.12g}, not 1")

    @classmethod
    def maximally_mixed(cls, shape) -> "DensityOperator":
        shape = _as_shape(shape)
        return cls(np.eye(shape.total) / shape.total, shape)

    @classmethod
    def basis_state(cls, index: int, shape) -> "DensityOperator":
        shape = _as_shape(shape)
        mat = np.zeros((shape.total, shape.total), dtype=np.complex128)
        mat[index, index] = 1.0
        return cls(mat, shape)

    @classmethod
    def from_diagonal(cls, probs, shape=None) -> "DensityOperator":
        """Classical state ``Σ p(x) |x><x|``."""
        if isinstance(probs, Distribution):
            probs = probs.probs
        probs = np.asarray(probs, dtype=np.float64)
        return cls(np.diag(probs).astype(np.complex128), shape)

    @classmethod
    def pure(cls, vec, shape=None) -> "DensityOperator":
        return PureState(vec, shape).density()

    @classmethod
    def product(cls, factors: Sequence["DensityOperator"]) -> "DensityOperator":
        dims = tuple(d for f in factors for d in f.shape.dims)
        return cls(kron_all([f.mat for f in factors]), FactorShape(dims))

    def reduce(self, keep: Sequence[int]) -> "DensityOperator":
        """Marginal on the factors in ``keep`` (kept in increasing order)."""
        keep = sorted(set(keep))
        traced = self.shape.complement(keep)
        return DensityOperator(partial_trace(self.mat, self.shape, traced), self.shape.keep(keep))

    def trace_out(self, traced: Sequence[int]) -> "DensityOperator":
        return self.reduce(self.shape.complement(traced))

    def transpose(self) -> "DensityOperator":
        return DensityOperator(transpose_op(self.mat), self.shape)

    def diagonal(self) -> Distribution:
        return Distribution(np.clip(np.real(np.diag(self.mat)), 0.0, None))

    def dephase(self) -> "DensityOperator":
        """Discard the off-diagonal entries in the computational basis."""
        return DensityOperator.from_diagonal(np.real(np.diag(self.mat)), self.shape)

    @property
    def rank(self) -> int:
        return int(np.sum(np.linalg.eigvalsh(self.mat) > KERNEL_TOL))

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.mat)[0])


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit vector, optionally with a factor shape."""

    vec: np.ndarray
    shape: Optional[FactorShape] = None

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=np.complex128).reshape(-1)
        if not np.isfinite(v).all():
            raise NotADensityOperator("State vector has non-finite entries")
        norm = np.linalg.norm(v)
        if abs(norm - 1) > NORM_TOL:
            raise NotADensityOperator(f"State vector has norm {norm:.12g}, not 1")
        shape = _as_shape(self.shape) if self.shape is not None else FactorShape.single(v.size)
        shape.check(v.size)
        v.setflags(write=False)
        object.__setattr__(self, "vec", v)
        object.__setattr__(self, "shape", shape)

    def density(self) -> DensityOperator:
        return DensityOperator(np.outer(self.vec, self.vec.conj()), self.shape)


def _check_pair(rho, sigma):
    if not isinstance(rho, DensityOperator) or not isinstance(sigma, DensityOperator):
        raise TypeError(f"Expected DensityOperator, got {type(rho)} and {type(sigma)}")
    if rho.dim != sigma.dim:
        raise ShapeMismatch(f"States of different dimension {rho.dim} and {sigma.dim}")


def trace_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    _check_pair(rho, sigma)
    return 0.5 * schatten1(rho.mat - sigma.mat)


def fidelity(rho: DensityOperator, sigma: DensityOperator) -> float:
    """``(tr sqrt(sqrt(ρ) σ sqrt(ρ)))^2``."""
    _check_pair(rho, sigma)
    sr = sqrtm_psd(rho.mat)
    inner = hermitian_part(sr @ sigma.mat @ sr)
    w = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(np.sum(np.sqrt(w)) ** 2)


def bures(rho: DensityOperator, sigma: DensityOperator) -> float:
    return float(np.sqrt(max(0.0, (1 - fidelity(rho, sigma)) / 2)))


def vn_entropy(rho: DensityOperator) -> float:
    """Von Neumann entropy in nats."""
    if not isinstance(rho, DensityOperator):
        raise TypeError(f"Expected DensityOperator, got {type(rho)}")
    w = np.linalg.eigvalsh(rho.mat)
    w = np.where(w > ENTROPY_CUTOFF, w, 0.0)
    return float(np.sum(entr(w)))


def rel_entropy(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Umegaki relative entropy ``tr ρ (ln ρ - ln σ)`` in nats.

    Returns ``inf`` when the kernel of ``σ`` (eigenvalues at or below 1e-10)
    carries weight of ``ρ`` above 1e-10.
    """
    _check_pair(rho, sigma)
    w, V = np.linalg.eigh(sigma.mat)
    kernel = V[:, w <= KERNEL_TOL]
    if kernel.shape[1] and np.real(np.trace(kernel.conj().T @ rho.mat @ kernel)) > KERNEL_TOL:
        return float("inf")
    log_sigma = matfunc(sigma.mat, "log", clamp_neg=True, cutoff=KERNEL_TOL)
    value = -vn_entropy(rho) - float(np.real(np.trace(rho.mat @ log_sigma)))
    if -1e-12 < value < 0:
        value = 0.0
    return value


def purify(sigma: DensityOperator) -> PureState:
    """Canonical purification ``|Ψ> = vec(sqrt(σ))`` on ``H ⊗ H*``.

    Tracing out the second factor gives ``σ``, tracing out the first gives ``σ^T``.
    """
    if not isinstance(sigma, DensityOperator):
        raise TypeError(f"Expected DensityOperator, got {type(sigma)}")
    root = sqrtm_psd(sigma.mat)
    vec = root.reshape(-1)
    return PureState(vec / np.linalg.norm(vec), FactorShape((sigma.dim, sigma.dim)))


def helstrom_projectors(rho: DensityOperator, sigma: DensityOperator):
    """Projectors onto the nonnegative and negative eigenspaces of ``ρ - σ``."""
    _check_pair(rho, sigma)
    w, V = np.linalg.eigh(hermitian_part(rho.mat - sigma.mat))
    Vp = V[:, w > -HELSTROM_TIE]
    positive = Vp @ Vp.conj().T
    return positive, np.eye(rho.dim) - positive


def helstrom_distributions(rho: DensityOperator, sigma: DensityOperator):
    """Outcome distributions ``(r, s)`` of the Helstrom measurement, outcome order ``(+, -)``."""
    positive, negative = helstrom_projectors(rho, sigma)
    r = [np.real(np.trace(positive @ rho.mat)), np.real(np.trace(negative @ rho.mat))]
    s = [np.real(np.trace(positive @ sigma.mat)), np.real(np.trace(negative @ sigma.mat))]
    return Distribution.normalized(np.clip(r, 0, None)), Distribution.normalized(np.clip(s, 0, None))


def ginibre(rng: np.random.Generator, rows: int, cols: int) -> npt.NDArray[np.complex128]:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_state(shape, rank: Optional[int] = None, seed: Seed = None) -> DensityOperator:
    """Ginibre random state ``G G^dagger / tr``, with ``G`` of size ``dim x rank``.

    ``shape`` is a dimension or a :class:`FactorShape`; ``rank`` defaults to full rank.
    """
    shape = _as_shape(shape)
    dim = shape.total
    rank = dim if rank is None else int(rank)
    if not 1 <= rank <= dim:
        raise ShapeMismatch(f"Rank must be between 1 and {dim}, got {rank}")
    G = ginibre(make_rng(seed), dim, rank)
    mat = G @ G.conj().T
    return DensityOperator(mat / np.real(np.trace(mat)), shape)


def random_observable(shape, seed: Seed = None) -> Observable:
    shape = _as_shape(shape)
    G = ginibre(make_rng(seed), shape.total, shape.total)
    return Observable((G + G.conj().T) / 2, shape)


def random_unitary(dim: int, seed: Seed = None) -> ComplexMatrix:
    """Haar unitary from the QR decomposition of a Ginibre matrix."""
    Q, R = np.linalg.qr(ginibre(make_rng(seed), dim, dim))
    phases = np.diag(R) / np.abs(np.diag(R))
    return Q * phases[None, :]


def random_product_state(n: int, seed: Seed = None, min_eig: float = 0.05) -> DensityOperator:
    """Product of ``n`` random qubit states, each with eigenvalues at least ``min_eig``."""
    if not 0 <= min_eig < 0.5:
        raise ShapeMismatch(f"min_eig must lie in [0, 0.5), got {min_eig}")
    rng = make_rng(seed)
    factors = []
    for _ in range(n):
        q = random_state(2, seed=rng)
        mat = (1 - 2 * min_eig) * q.mat + min_eig * np.eye(2)
        factors.append(DensityOperator(mat, FactorShape.single(2)))
    return DensityOperator.product(factors)

