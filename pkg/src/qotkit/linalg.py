"""Dense complex linear algebra.

Operators are plain square ``numpy`` arrays of dtype ``complex128``. Tensor
products follow one global convention: row-major storage with factor 0 the
leftmost (most significant) factor, so ``kron(A, B)`` acts on factor 0 with
``A``. Factor indices used by :func:`partial_trace`, :func:`permute_factors`
and :func:`lift` refer to this ordering.

All functions are pure and never modify their inputs.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Callable, Iterable, NamedTuple, Sequence, Union

import numpy as np
import numpy.typing as npt

from .exceptions import DomainError, NegativeEigenvalue, NotHermitian, ShapeMismatch


logger = logging.getLogger(__name__)

ComplexMatrix = npt.NDArray[np.complex128]

#: Maximum absolute entry of ``H - H^dagger`` accepted as Hermitian.
HERMITIAN_TOL = 1e-9

#: Eigenvalues below ``-NEGATIVE_TOL`` are an error for PSD-only functions.
NEGATIVE_TOL = 1e-9

#: Eigenvalues at or below this are treated as zero by the support-restricted log.
LOG_CUTOFF = 1e-12


class HermitianEig(NamedTuple):
    """Eigendecomposition ``H = V diag(values) V^dagger`` with ascending values."""

    values: npt.NDArray[np.float64]
    vectors: ComplexMatrix

    def reconstruct(self) -> ComplexMatrix:
        return (self.vectors * self.values) @ self.vectors.conj().T


@dataclass(frozen=True)
class FactorShape:
    """Dimensions of the tensor factors of a composite system.

    Parameters
    ----------
    dims : tuple of int
        Positive factor dimensions, factor 0 first.
    """

    dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) == 0:
            raise ShapeMismatch("A factor shape needs at least one factor")
        if any(d < 1 for d in dims):
            raise ShapeMismatch(f"Factor dimensions must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def qubits(cls, n: int) -> "FactorShape":
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ShapeMismatch(f"Expected a positive number of qubits, got {n}")
        return cls((2,) * int(n))

    @classmethod
    def single(cls, dim: int) -> "FactorShape":
        return cls((int(dim),))

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    @property
    def is_qubits(self) -> bool:
        return all(d == 2 for d in self.dims)

    def __len__(self) -> int:
        return len(self.dims)

    def check(self, dim: int) -> None:
        """Raise :class:`ShapeMismatch` unless the factors multiply to ``dim``."""
        if self.total != dim:
            raise ShapeMismatch(
                f"Factor dims {self.dims} multiply to {self.total}, matrix dim is {dim}"
            )

    def keep(self, kept: Iterable[int]) -> "FactorShape":
        kept = sorted(set(kept))
        if not kept:
            return FactorShape((1,))
        return FactorShape(tuple(self.dims[k] for k in kept))

    def complement(self, sites: Iterable[int]) -> list:
        sites = set(sites)
        return [k for k in range(len(self.dims)) if k not in sites]


def as_matrix(A) -> ComplexMatrix:
    """Return ``A`` as a square complex128 array.

    Raises
    ------
    ShapeMismatch
        If ``A`` is not a square two-dimensional array.
    """
    M = np.asarray(A, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise ShapeMismatch(f"Expected a non-empty square matrix, got shape {M.shape}")
    return M


def dagger(A) -> ComplexMatrix:
    return np.asarray(A).conj().T


def hermitian_part(A) -> ComplexMatrix:
    """Return ``(A + A^dagger) / 2``."""
    A = np.asarray(A, dtype=np.complex128)
    return (A + A.conj().T) / 2


def hermiticity_error(A) -> float:
    A = np.asarray(A, dtype=np.complex128)
    return float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0


def is_hermitian(A, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_error(A) <= tol


def check_hermitian(A, tol: float = HERMITIAN_TOL) -> ComplexMatrix:
    """Validate Hermiticity and return the exactly Hermitian part of ``A``.

    Raises
    ------
    NotHermitian
        If ``max |A - A^dagger|`` exceeds ``tol`` or ``A`` has a non-finite entry.
    """
    A = as_matrix(A)
    if not np.isfinite(A).all():
        raise NotHermitian("Matrix has non-finite entries")
    err = hermiticity_error(A)
    if err > tol:
        raise NotHermitian(f"Matrix is not Hermitian: max |A - A^dagger| = {err:.3e}")
    return hermitian_part(A)


def eigh(H) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Raises
    ------
    NotHermitian
        If ``H`` is not Hermitian within :data:`HERMITIAN_TOL`.
    """
    H = check_hermitian(H)
    values, vectors = np.linalg.eigh(H)
    return HermitianEig(values, vectors)


def eigvalsh(H) -> npt.NDArray[np.float64]:
    return np.linalg.eigvalsh(check_hermitian(H))


_NAMED_FUNCTIONS = {
    "sqrt": np.sqrt,
    "log": np.log,
    "exp": np.exp,
    "abs": np.abs,
    "identity": lambda x: x,
}

_PSD_FUNCTIONS = ("sqrt", "log", "inv_sqrt")


def matfunc(
    H,
    f: Union[str, Callable],
    clamp_neg: bool = False,
    cutoff: float = None,
) -> ComplexMatrix:
    """Apply a scalar function to a Hermitian matrix by spectral calculus.

    Parameters
    ----------
    H : array_like
        Hermitian matrix.
    f : str or callable
        Either a vectorized real function or one of ``"sqrt"``, ``"log"``,
        ``"exp"``, ``"abs"``, ``"identity"`` and ``"inv_sqrt"``.
    clamp_neg : bool
        For ``"sqrt"``, ``"log"`` and ``"inv_sqrt"`` only: eigenvalues in
        ``[-1e-9, cutoff]`` are clamped. ``sqrt`` maps them to 0, ``log`` and
        ``inv_sqrt`` act on the support only (clamped eigenvalues map to 0).
    cutoff : float, optional
        Upper end of the clamped interval. Defaults to 0 for ``sqrt`` and to
        :data:`LOG_CUTOFF` for ``log`` and ``inv_sqrt``.

    Raises
    ------
    NegativeEigenvalue
        If ``clamp_neg`` is set and the smallest eigenvalue is below -1e-9.
    DomainError
        If ``f`` produces a non-finite value at some eigenvalue.
    """
    values, vectors = eigh(H)
    name = f if isinstance(f, str) else None
    if name is not None and name not in _NAMED_FUNCTIONS and name != "inv_sqrt":
        raise DomainError(f"Unknown matrix function {name!r}")

    support = np.ones_like(values, dtype=bool)
    if clamp_neg and name in _PSD_FUNCTIONS:
        if values.size and values[0] < -NEGATIVE_TOL:
            raise NegativeEigenvalue(
                f"Smallest eigenvalue {values[0]:.3e} is below {-NEGATIVE_TOL:.0e}"
            )
        if cutoff is None:
            cutoff = 0.0 if name == "sqrt" else LOG_CUTOFF
        support = values > cutoff
        values = np.where(support, values, 0.0)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if name == "inv_sqrt":
            fv = np.zeros_like(values)
            fv[support] = 1.0 / np.sqrt(values[support])
        elif name == "log" and clamp_neg:
            fv = np.zeros_like(values)
            fv[support] = np.log(values[support])
        elif name is not None:
            fv = _NAMED_FUNCTIONS[name](values)
        else:
            fv = np.asarray(f(values), dtype=np.float64)
    if fv.shape != values.shape or not np.all(np.isfinite(fv)):
        raise DomainError(f"Function {name or f} is undefined at some eigenvalue")
    return hermitian_part((vectors * fv) @ vectors.conj().T)


def sqrtm_psd(A) -> ComplexMatrix:
    """Square root of a PSD matrix, tiny negative eigenvalues clamped to 0."""
    return matfunc(A, "sqrt", clamp_neg=True)


def inv_sqrtm_psd(A, cutoff: float = 1e-8) -> ComplexMatrix:
    """Pseudo-inverse square root, eigenvalues at or below ``cutoff`` map to 0."""
    return matfunc(A, "inv_sqrt", clamp_neg=True, cutoff=cutoff)


def kron(A, B) -> ComplexMatrix:
    return np.kron(np.asarray(A, dtype=np.complex128), np.asarray(B, dtype=np.complex128))


def kron_all(ops: Sequence) -> ComplexMatrix:
    if len(ops) == 0:
        return np.ones((1, 1), dtype=np.complex128)
    return reduce(kron, ops)


def _check_sites(shape: FactorShape, sites: Iterable[int]) -> list:
    sites = list(sites)
    k = len(shape)
    if len(set(sites)) != len(sites):
        raise ShapeMismatch(f"Repeated factor index in {sites}")
    for s in sites:
        if not isinstance(s, (int, np.integer)) or s < 0 or s >= k:
            raise ShapeMismatch(f"Factor index {s} out of range for {k} factors")
    return [int(s) for s in sites]


def partial_trace(A, shape: FactorShape, traced: Iterable[int]) -> ComplexMatrix:
    """Trace out the factors listed in ``traced``.

    The kept factors stay in their original order. Tracing out every factor
    returns the 1x1 matrix ``[[tr A]]``.

    Raises
    ------
    ShapeMismatch
        If ``shape`` does not match ``A`` or an index is out of range.
    """
    A = as_matrix(A)
    if not isinstance(shape, FactorShape):
        raise TypeError(f"Expected FactorShape, got {type(shape)}")
    shape.check(A.shape[0])
    traced = sorted(set(_check_sites(shape, traced)), reverse=True)
    dims = list(shape.dims)
    k = len(dims)
    T = A.reshape(dims + dims)
    for idx in traced:
        T = np.trace(T, axis1=idx, axis2=idx + k)
        k -= 1
    kept = [d for i, d in enumerate(shape.dims) if i not in traced]
    size = int(np.prod(kept)) if kept else 1
    return T.reshape(size, size)


def permute_factors(A, shape: FactorShape, perm: Sequence[int]) -> ComplexMatrix:
    """Reorder tensor factors: factor ``j`` of the result is factor ``perm[j]`` of ``A``."""
    A = as_matrix(A)
    shape.check(A.shape[0])
    perm = _check_sites(shape, perm)
    k = len(shape)
    if sorted(perm) != list(range(k)):
        raise ShapeMismatch(f"{perm} is not a permutation of {k} factors")
    T = A.reshape(list(shape.dims) * 2)
    T = T.transpose(perm + [p + k for p in perm])
    return T.reshape(A.shape)


def lift(B, shape: FactorShape, sites: Sequence[int]) -> ComplexMatrix:
    """Embed ``B`` acting on ``sites`` (in that order) into the full system.

    The result acts as the identity on the remaining factors, i.e. it is the
    operator written ``1 ⊗ B`` with the identity on the complement of ``sites``.
    """
    B = as_matrix(B)
    sites = _check_sites(shape, sites)
    rest = shape.complement(sites)
    sub_dim = int(np.prod([shape.dims[s] for s in sites])) if sites else 1
    if B.shape[0] != sub_dim:
        raise ShapeMismatch(f"Operator of dim {B.shape[0]} cannot act on factors {sites}")
    rest_dim = int(np.prod([shape.dims[r] for r in rest])) if rest else 1
    K = np.kron(B, np.eye(rest_dim, dtype=np.complex128))
    order = sites + rest
    ordered_shape = FactorShape(tuple(shape.dims[o] for o in order))
    perm = [order.index(j) for j in range(len(shape))]
    return permute_factors(K, ordered_shape, perm)


def schatten1(A) -> float:
    """Trace norm: sum of singular values (sum of |eigenvalues| for Hermitian A)."""
    A = as_matrix(A)
    if is_hermitian(A):
        return float(np.sum(np.abs(np.linalg.eigvalsh(hermitian_part(A)))))
    return float(np.sum(np.linalg.svd(A, compute_uv=False)))


def opnorm(A) -> float:
    """Operator norm of a Hermitian matrix: largest |eigenvalue|.

    Raises
    ------
    NotHermitian
        If ``A`` is not Hermitian.
    """
    w = eigvalsh(A)
    return float(np.max(np.abs(w)))


def oscillation(A) -> float:
    """``λ_max - λ_min``, equal to ``2 min_c ||A - c 1||`` and to ``max tr[A(ρ - σ)]``."""
    w = eigvalsh(A)
    return float(w[-1] - w[0])


def transpose_op(A) -> ComplexMatrix:
    """Entrywise transpose in the computational basis, no conjugation."""
    return np.array(as_matrix(A).T)


def vec(M) -> npt.NDArray[np.complex128]:
    """Row-major vectorization, ``|a><b| -> |a> ⊗ |b>``."""
    return np.asarray(M, dtype=np.complex128).reshape(-1)


def unvec(v, rows: int, cols: int) -> npt.NDArray[np.complex128]:
    v = np.asarray(v, dtype=np.complex128)
    if v.size != rows * cols:
        raise ShapeMismatch(f"Vector of size {v.size} cannot be reshaped to {rows}x{cols}")
    return v.reshape(rows, cols)


@lru_cache(maxsize=32)
def hermitian_basis(dim: int) -> npt.NDArray[np.complex128]:
    """Orthonormal basis of the Hermitian ``dim x dim`` matrices.

    Returns an array of shape ``(dim**2, dim, dim)``: first the diagonal matrix
    units, then for every ``j < k`` the pair ``(E_jk + E_kj)/√2`` and
    ``i(E_jk - E_kj)/√2``. Orthonormal for ``<F, G> = tr[F G]``. The array is
    read-only because it is cached.
    """
    if dim < 1:
        raise ShapeMismatch(f"Expected a positive dimension, got {dim}")
    basis = np.zeros((dim * dim, dim, dim), dtype=np.complex128)
    idx = 0
    for j in range(dim):
        basis[idx, j, j] = 1.0
        idx += 1
    r = 1.0 / np.sqrt(2.0)
    for j in range(dim):
        for k in range(j + 1, dim):
            basis[idx, j, k] = r
            basis[idx, k, j] = r
            idx += 1
            basis[idx, j, k] = 1j * r
            basis[idx, k, j] = -1j * r
            idx += 1
    basis.setflags(write=False)
    return basis


def hermitian_coordinates(H) -> npt.NDArray[np.float64]:
    """Coordinates of a Hermitian matrix in :func:`hermitian_basis`."""
    H = as_matrix(H)
    basis = hermitian_basis(H.shape[0])
    return np.real(np.einsum("kij,ji->k", basis, H))
