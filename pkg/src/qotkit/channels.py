"""Kraus channels and the correspondence between transport plans and couplings.

A quantum coupling of ``σ`` (on ``X``) and ``ρ`` (on ``Y``) is a state on
``Y ⊗ X*``; the dual space ``X*`` is represented as ``C^dim`` so its marginal
is ``σ^T``. The plan ``Φ`` and its coupling are related by
``π_Φ = (Φ ⊗ id)(|Ψ><Ψ|)`` with ``|Ψ> = vec(sqrt(σ))`` the canonical
purification.
"""

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import InvalidChannel, MarginalMismatch, ShapeMismatch, SingularSigma
from .linalg import FactorShape, dagger, hermitian_part, inv_sqrtm_psd, lift, partial_trace
from .states import DensityOperator, Seed, ginibre, make_rng, purify, random_state


logger = logging.getLogger(__name__)

#: Max entry of ``Σ B^dagger B - 1`` accepted for a channel.
TP_TOL = 1e-8
#: Marginal tolerance of :class:`QuantumCoupling`.
MARGINAL_TOL = 1e-7
#: Eigenvalues of ``σ`` at or below this make it singular for :func:`channel_from_coupling`.
SINGULAR_TOL = 1e-8
#: Kraus operators of weight at or below this are dropped.
KRAUS_CUTOFF = 1e-14

PSEUDO_INVERSE = "pseudo-inverse"


def _kraus_from_choi(J, dim_in: int, dim_out: int) -> list:
    w, V = np.linalg.eigh(hermitian_part(J))
    kraus = []
    for lam, v in zip(w[::-1], V[:, ::-1].T):
        if lam <= KRAUS_CUTOFF * max(1.0, w[-1]):
            break
        kraus.append(np.sqrt(lam) * v.reshape(dim_out, dim_in))
    return kraus


@dataclass(frozen=True, eq=False)
class KrausMap:
    """Completely positive map ``A -> Σ B_i A B_i^dagger`` from its Kraus family."""

    kraus: tuple
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if len(self.kraus) == 0:
            raise InvalidChannel("A Kraus family needs at least one operator")
        ops = [np.asarray(B, dtype=np.complex128) for B in self.kraus]
        shape = ops[0].shape
        if any(B.ndim != 2 or B.shape != shape for B in ops):
            raise InvalidChannel("Kraus operators must be matrices of one shape")
        for B in ops:
            B.setflags(write=False)
        object.__setattr__(self, "kraus", tuple(ops))
        object.__setattr__(self, "flags", frozenset(self.flags))

    @property
    def dim_in(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.kraus[0].shape[0]

    def apply(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=np.complex128)
        if A.shape != (self.dim_in, self.dim_in):
            raise ShapeMismatch(f"Map on dimension {self.dim_in} applied to shape {A.shape}")
        return sum(B @ A @ B.conj().T for B in self.kraus)

    def __call__(self, rho: DensityOperator) -> DensityOperator:
        """Apply the map to a state; the output keeps the shape when dimensions agree."""
        shape = rho.shape if self.dim_out == rho.dim else None
        return DensityOperator(self.apply(rho.mat), shape)

    def choi(self) -> np.ndarray:
        """Choi matrix ``Σ_i vec(B_i) vec(B_i)^dagger`` on ``Y ⊗ X``."""
        vecs = np.array([B.reshape(-1) for B in self.kraus])
        return vecs.T @ vecs.conj()

    def adjoint(self) -> "KrausMap":
        return KrausMap(tuple(dagger(B) for B in self.kraus))


@dataclass(frozen=True, eq=False)
class KrausChannel(KrausMap):
    """Trace-preserving :class:`KrausMap` with at most ``dim_in * dim_out`` operators.

    ``flags`` carries metadata such as ``"pseudo-inverse"`` for channels
    completed off the support of the source state.
    """

    def __post_init__(self):
        super().__post_init__()
        if len(self.kraus) > self.dim_in * self.dim_out:
            raise InvalidChannel(
                f"{len(self.kraus)} Kraus operators exceed dim_in * dim_out = "
                f"{self.dim_in * self.dim_out}"
            )
        T = sum(B.conj().T @ B for B in self.kraus)
        err = float(np.max(np.abs(T - np.eye(self.dim_in))))
        if err > TP_TOL:
            raise InvalidChannel(f"Kraus family is not trace preserving, error {err:.3e}")

    @classmethod
    def from_kraus(cls, kraus: Sequence, flags=frozenset()) -> "KrausChannel":
        """Build a channel, compressing the family through its Choi matrix when too long."""
        kraus = [np.asarray(B, dtype=np.complex128) for B in kraus]
        dim_out, dim_in = kraus[0].shape
        if len(kraus) > dim_in * dim_out:
            kraus = _kraus_from_choi(KrausMap(tuple(kraus)).choi(), dim_in, dim_out)
        return cls(tuple(kraus), flags)

    @classmethod
    def from_choi(cls, J, dim_in: int, dim_out: int) -> "KrausChannel":
        return cls(tuple(_kraus_from_choi(J, dim_in, dim_out)))

    @classmethod
    def identity(cls, dim: int) -> "KrausChannel":
        return cls((np.eye(dim, dtype=np.complex128),))

    @classmethod
    def unitary(cls, U) -> "KrausChannel":
        return cls((np.asarray(U, dtype=np.complex128),))

    @classmethod
    def constant(cls, rho0: DensityOperator, dim_in: int) -> "KrausChannel":
        """Trivial channel ``A -> tr[A] ρ0`` with Kraus ``sqrt(λ_l) |r_l><j|``."""
        w, V = np.linalg.eigh(rho0.mat)
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
        kraus = []
        for lam, r in zip(w, V.T):
            if lam <= KRAUS_CUTOFF:
                continue
            for j in range(dim_in):
                B = np.zeros((rho0.dim, dim_in), dtype=np.complex128)
                B[:, j] = np.sqrt(lam) * r
                kraus.append(B)
        return cls(tuple(kraus))

    @classmethod
    def depolarizing(cls, dim: int, p: float) -> "KrausChannel":
        """``A -> (1 - p) A + p tr[A] 1/dim``."""
        if not 0 <= p <= 1:
            raise InvalidChannel(f"Depolarizing parameter must lie in [0, 1], got {p}")
        kraus = [np.sqrt(1 - p) * np.eye(dim, dtype=np.complex128)]
        for a in range(dim):
            for b in range(dim):
                B = np.zeros((dim, dim), dtype=np.complex128)
                B[a, b] = np.sqrt(p / dim)
                kraus.append(B)
        return cls.from_kraus(kraus)

    def compose(self, other: "KrausChannel") -> "KrausChannel":
        """``self ∘ other``: apply ``other`` first."""
        if other.dim_out != self.dim_in:
            raise ShapeMismatch(f"Cannot compose {other.dim_out} -> {self.dim_in}")
        return KrausChannel.from_kraus([B @ K for B in self.kraus for K in other.kraus])

    def tensor_identity(self, shape: FactorShape, sites: Sequence[int]) -> "KrausChannel":
        """This channel on the factors ``sites`` of ``shape``, identity on the rest."""
        if self.dim_in != self.dim_out:
            raise ShapeMismatch("Only channels with equal input and output dimension can be embedded")
        return KrausChannel(tuple(lift(B, shape, sites) for B in self.kraus), self.flags)


def apply_channel(channel: KrausMap, A) -> np.ndarray:
    if not isinstance(channel, KrausMap):
        raise TypeError(f"Expected KrausMap, got {type(channel)}")
    return channel.apply(A)


def adjoint_channel(channel: KrausMap) -> KrausMap:
    """Heisenberg-picture map ``B -> Σ B_i^dagger B B_i``; unital when ``channel`` is a channel."""
    if not isinstance(channel, KrausMap):
        raise TypeError(f"Expected KrausMap, got {type(channel)}")
    return channel.adjoint()


@dataclass(frozen=True, eq=False)
class QuantumCoupling:
    """State on ``Y ⊗ X*`` with marginals ``σ^T`` (over ``Y``) and ``ρ`` (over ``X*``)."""

    state: DensityOperator
    sigma: DensityOperator
    rho: DensityOperator
    tol: float = MARGINAL_TOL

    def __post_init__(self):
        dim_y, dim_x = self.rho.dim, self.sigma.dim
        if self.state.dim != dim_y * dim_x:
            raise ShapeMismatch(f"Coupling of dim {self.state.dim} for marginals {dim_y}, {dim_x}")
        if self.state.shape.dims != (dim_y, dim_x):
            object.__setattr__(
                self, "state", DensityOperator(self.state.mat, FactorShape((dim_y, dim_x)))
            )
        err = max(
            float(np.max(np.abs(self.first_marginal() - self.sigma.mat.T))),
            float(np.max(np.abs(self.second_marginal() - self.rho.mat))),
        )
        if err > self.tol:
            raise MarginalMismatch(f"Coupling marginals off by {err:.3e}")

    @property
    def shape(self) -> FactorShape:
        return self.state.shape

    def first_marginal(self) -> np.ndarray:
        """``tr_Y π``, equal to ``σ^T``."""
        return partial_trace(self.state.mat, self.state.shape, [0])

    def second_marginal(self) -> np.ndarray:
        """``tr_{X*} π``, equal to ``ρ``."""
        return partial_trace(self.state.mat, self.state.shape, [1])


def product_coupling(sigma: DensityOperator, rho: DensityOperator) -> QuantumCoupling:
    """``ρ ⊗ σ^T``, always a coupling of ``σ`` and ``ρ``."""
    state = DensityOperator(np.kron(rho.mat, sigma.mat.T), FactorShape((rho.dim, sigma.dim)))
    return QuantumCoupling(state, sigma, rho)


def swap_transpose(coupling: QuantumCoupling) -> QuantumCoupling:
    """Bijection ``C(σ, ρ) -> C(ρ, σ)`` mapping ``α ⊗ β^T`` to ``β ⊗ α^T``."""
    dim_y, dim_x = coupling.shape.dims
    T = coupling.state.mat.reshape(dim_y, dim_x, dim_y, dim_x)
    mat = T.transpose(3, 2, 1, 0).reshape(dim_x * dim_y, dim_x * dim_y)
    state = DensityOperator(mat, FactorShape((dim_x, dim_y)))
    return QuantumCoupling(state, coupling.rho, coupling.sigma, coupling.tol)


def coupling_from_channel(channel: KrausChannel, sigma: DensityOperator) -> QuantumCoupling:
    """``π_Φ = Σ_i vec(B_i sqrt(σ)) vec(B_i sqrt(σ))^dagger``."""
    if not isinstance(channel, KrausChannel):
        raise TypeError(f"Expected KrausChannel, got {type(channel)}")
    if channel.dim_in != sigma.dim:
        raise ShapeMismatch(f"Channel on dimension {channel.dim_in}, state of dimension {sigma.dim}")
    root = purify(sigma).vec.reshape(sigma.dim, sigma.dim)
    vecs = np.array([(B @ root).reshape(-1) for B in channel.kraus])
    mat = vecs.T @ vecs.conj()
    rho = DensityOperator(channel.apply(sigma.mat))
    state = DensityOperator(mat, FactorShape((channel.dim_out, sigma.dim)))
    return QuantumCoupling(state, sigma, rho)


def channel_from_coupling(
    coupling: QuantumCoupling,
    sigma: DensityOperator,
    pseudo_inverse: bool = False,
) -> KrausChannel:
    """Transport plan of a coupling: ``B_i = sqrt(p_i) F_i σ^(-1/2)``.

    ``Π = Σ p_i |Ψ_i><Ψ_i|`` is the eigendecomposition of the coupling and
    ``F_i`` the ``dim_y x dim_x`` reshaping of ``Ψ_i``. The family is
    normalized by ``(Σ B^dagger B)^(-1/2)`` to remove solver noise.

    With ``pseudo_inverse`` set, ``σ`` may be singular: ``σ^(-1/2)`` acts on
    the support only and the kernel ``K`` of ``σ`` is sent to the target
    state by the extra operators ``sqrt(λ_l) |r_l><k_j|`` (``ρ = Σ λ_l
    |r_l><r_l|``, ``k_j`` an orthonormal basis of ``K``). The channel is then
    flagged ``"pseudo-inverse"``.

    Raises
    ------
    MarginalMismatch
        If the first marginal of the coupling is not ``σ^T`` within 1e-6.
    SingularSigma
        If ``σ`` has an eigenvalue at or below 1e-8 and ``pseudo_inverse`` is off.
    """
    if not isinstance(coupling, QuantumCoupling):
        raise TypeError(f"Expected QuantumCoupling, got {type(coupling)}")
    dim_y, dim_x = coupling.shape.dims
    if sigma.dim != dim_x:
        raise ShapeMismatch(f"Coupling on X of dim {dim_x}, state of dim {sigma.dim}")
    err = float(np.max(np.abs(coupling.first_marginal() - sigma.mat.T)))
    if err > 1e-6:
        raise MarginalMismatch(f"Coupling first marginal differs from σ^T by {err:.3e}")
    w_sigma, V_sigma = np.linalg.eigh(sigma.mat)
    singular = w_sigma[0] <= SINGULAR_TOL
    if singular and not pseudo_inverse:
        raise SingularSigma(f"σ has eigenvalue {w_sigma[0]:.3e}, enable pseudo_inverse")

    inv_root = inv_sqrtm_psd(sigma.mat, cutoff=SINGULAR_TOL)
    p, Psi = np.linalg.eigh(coupling.state.mat)
    kraus = [
        np.sqrt(pi) * psi.reshape(dim_y, dim_x) @ inv_root
        for pi, psi in zip(p, Psi.T)
        if pi > KRAUS_CUTOFF
    ]
    flags = frozenset()
    if singular:
        w_rho, V_rho = np.linalg.eigh(coupling.rho.mat)
        w_rho = np.clip(w_rho, 0.0, None)
        w_rho = w_rho / w_rho.sum()
        for k in V_sigma[:, w_sigma <= SINGULAR_TOL].T:
            for lam, r in zip(w_rho, V_rho.T):
                if lam > KRAUS_CUTOFF:
                    kraus.append(np.sqrt(lam) * np.outer(r, k.conj()))
        flags = frozenset({PSEUDO_INVERSE})
        logger.info("Completed the plan off the support of σ with the target state")

    T = sum(B.conj().T @ B for B in kraus)
    correction = inv_sqrtm_psd(T, cutoff=1e-12)
    kraus = [B @ correction for B in kraus]
    return KrausChannel.from_kraus(kraus, flags)


def random_channel(dim_in: int, dim_out: int, kraus_rank: int, seed: Seed = None) -> KrausChannel:
    """Random channel from a QR-orthonormalized Ginibre isometry cut into Kraus blocks.

    Requires ``kraus_rank * dim_out >= dim_in`` so that the isometry exists.
    """
    if not 1 <= kraus_rank <= dim_in * dim_out:
        raise InvalidChannel(f"Kraus rank must lie in [1, {dim_in * dim_out}], got {kraus_rank}")
    if kraus_rank * dim_out < dim_in:
        raise InvalidChannel(f"Kraus rank {kraus_rank} too small for {dim_in} -> {dim_out}")
    G = ginibre(make_rng(seed), kraus_rank * dim_out, dim_in)
    Q, _ = np.linalg.qr(G)
    return KrausChannel(tuple(Q[i * dim_out : (i + 1) * dim_out] for i in range(kraus_rank)))


def random_neighbor_pair(n: int, site: int, seed: Seed = None):
    """Random n-qubit states ``(ρ, σ)`` that agree after tracing out ``site``.

    ``σ`` is a random single-qubit channel on ``site`` applied to ``ρ``.
    """
    rng = make_rng(seed)
    shape = FactorShape.qubits(n)
    rho = random_state(shape, seed=rng)
    local = random_channel(2, 2, int(rng.integers(1, 5)), seed=rng)
    sigma = DensityOperator(local.tensor_identity(shape, [site]).apply(rho.mat), shape)
    return rho, sigma
