"""Quantum channels on small Hilbert spaces.

A :class:`Channel` holds one of three representations (Kraus operators, a Choi
matrix or a Pauli transfer matrix) and converts lazily between them.

Conventions used throughout the package:

* Choi matrix: ``J(E) = (E ⊗ id)(|Φ⟩⟨Φ|)`` with the *unnormalized* maximally
  entangled vector ``|Φ⟩ = Σ_j |j⟩|j⟩``, output factor first. Hence
  ``Tr J = dim_in`` and a map is trace preserving iff the partial trace of
  ``J`` over the output factor is the identity.
* Superoperators use column stacking, ``vec(AρB) = (Bᵀ ⊗ A) vec(ρ)``.
* Pauli labels are ordered lexicographically over ``IXYZ`` with the leftmost
  qubit most significant; ``"XZ"`` means ``X ⊗ Z``.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import optimize

#: Eigenvalue threshold used for positivity and rank decisions.
EIG_TOL = 1e-10
#: Tolerance on ``‖Tr_out J − I‖`` for trace preservation.
TP_TOL = 1e-10

REPRESENTATIONS = ("kraus", "choi", "ptm")

_PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class ChannelError(ValueError):
    """Raised for malformed or invalid channels."""


class NotCPError(ChannelError):
    """A Choi matrix has an eigenvalue below ``-EIG_TOL``."""


# ---------------------------------------------------------------------------
# Pauli helpers
# ---------------------------------------------------------------------------


def pauli_labels(n_qubits: int) -> list[str]:
    return ["".join(p) for p in itertools.product("IXYZ", repeat=n_qubits)]


def pauli_matrix(label: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, _PAULI_1Q[ch])
    return out


@functools.lru_cache(maxsize=None)
def _pauli_stack(n_qubits: int) -> np.ndarray:
    stack = np.array([pauli_matrix(lab) for lab in pauli_labels(n_qubits)])
    stack.setflags(write=False)
    return stack


def n_qubits_of(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise ChannelError(f"dimension {dim} is not a power of two")
    return n


# ---------------------------------------------------------------------------
# Low-level array conversions
# ---------------------------------------------------------------------------


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _choi_from_kraus_ops(ops: Sequence[np.ndarray]) -> np.ndarray:
    # (K ⊗ I)|Φ⟩ has entries K[a, j] at index (a, j): the row-major flattening of K.
    vecs = np.array([np.asarray(k).reshape(-1) for k in ops])
    return vecs.T @ vecs.conj()


def _superop_from_choi(choi: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    j4 = choi.reshape(dim_out, dim_in, dim_out, dim_in)  # [a, i, b, j] = E(|i⟩⟨j|)[a, b]
    return j4.transpose(2, 0, 3, 1).reshape(dim_out**2, dim_in**2)


def _choi_from_superop(superop: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    s4 = superop.reshape(dim_out, dim_out, dim_in, dim_in)  # [b, a, j, i]
    return s4.transpose(1, 3, 0, 2).reshape(dim_out * dim_in, dim_out * dim_in)


def _pauli_vec_matrix(n_qubits: int) -> np.ndarray:
    """Columns are vec(P_b) (column stacking) for the ordered Pauli basis."""
    stack = _pauli_stack(n_qubits)
    return np.array([p.T.reshape(-1) for p in stack]).T


def _ptm_from_superop(superop: np.ndarray, dim: int) -> np.ndarray:
    v = _pauli_vec_matrix(n_qubits_of(dim))
    return (v.conj().T @ superop @ v) / dim


def _superop_from_ptm(ptm: np.ndarray, dim: int) -> np.ndarray:
    v = _pauli_vec_matrix(n_qubits_of(dim))
    return (v @ ptm @ v.conj().T) / dim


def partial_trace_output(choi: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    return np.einsum("aiaj->ij", choi.reshape(dim_out, dim_in, dim_out, dim_in))


# ---------------------------------------------------------------------------
# Channel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CPTPReport:
    min_choi_eigenvalue: float
    tp_defect: float
    ptm_first_row: np.ndarray | None
    cp: bool
    tp: bool

    @property
    def ok(self) -> bool:
        return self.cp and self.tp


@dataclass(frozen=True, eq=False)
class Channel:
    """An immutable linear map between operator spaces.

    ``data`` is a tuple of Kraus operators for ``representation="kraus"`` and a
    single square array otherwise. Use the ``from_*`` constructors rather than
    building instances directly.
    """

    representation: str
    data: object
    dim_in: int
    dim_out: int

    def __post_init__(self):
        if self.representation not in REPRESENTATIONS:
            raise ChannelError(f"unknown representation {self.representation!r}")

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_kraus(cls, ops: Iterable[np.ndarray]) -> "Channel":
        ops = [np.atleast_2d(np.asarray(k, dtype=complex)) for k in ops]
        if not ops:
            raise ChannelError("empty Kraus set")
        shape = ops[0].shape
        if any(k.shape != shape for k in ops):
            raise ChannelError("Kraus operators have inconsistent shapes")
        return cls("kraus", tuple(_frozen(k) for k in ops), shape[1], shape[0])

    @classmethod
    def from_choi(cls, choi: np.ndarray, dim_in: int | None = None,
                  dim_out: int | None = None) -> "Channel":
        choi = np.asarray(choi, dtype=complex)
        n = choi.shape[0]
        if choi.ndim != 2 or choi.shape[1] != n:
            raise ChannelError("Choi matrix must be square")
        if dim_in is None and dim_out is None:
            dim_in = dim_out = int(round(np.sqrt(n)))
        elif dim_out is None:
            dim_out = n // dim_in
        elif dim_in is None:
            dim_in = n // dim_out
        if dim_in * dim_out != n:
            raise ChannelError(f"Choi size {n} does not match dims ({dim_in}, {dim_out})")
        return cls("choi", _frozen(choi), dim_in, dim_out)

    @classmethod
    def from_ptm(cls, ptm: np.ndarray) -> "Channel":
        ptm = np.asarray(ptm, dtype=float)
        dim = int(round(np.sqrt(ptm.shape[0])))
        n_qubits_of(dim)
        if ptm.shape != (dim * dim, dim * dim):
            raise ChannelError("PTM must be square of size 4^n")
        ptm = ptm.copy()
        ptm.setflags(write=False)
        return cls("ptm", ptm, dim, dim)

    @classmethod
    def from_superop(cls, superop: np.ndarray, dim_in: int | None = None,
                     dim_out: int | None = None) -> "Channel":
        superop = np.asarray(superop, dtype=complex)
        dim_out = dim_out or int(round(np.sqrt(superop.shape[0])))
        dim_in = dim_in or int(round(np.sqrt(superop.shape[1])))
        return cls.from_choi(_choi_from_superop(superop, dim_in, dim_out), dim_in, dim_out)

    @classmethod
    def identity(cls, dim: int) -> "Channel":
        return cls.from_kraus([np.eye(dim)])

    @classmethod
    def unitary(cls, u: np.ndarray) -> "Channel":
        return cls.from_kraus([u])

    # -- representations ----------------------------------------------------

    @functools.cached_property
    def choi(self) -> np.ndarray:
        if self.representation == "choi":
            return self.data
        if self.representation == "kraus":
            return _frozen(_choi_from_kraus_ops(self.data))
        return _frozen(_choi_from_superop(self.superop, self.dim_in, self.dim_out))

    @functools.cached_property
    def superop(self) -> np.ndarray:
        if self.representation == "kraus":
            return _frozen(sum(np.kron(k.conj(), k) for k in self.data))
        if self.representation == "ptm":
            return _frozen(_superop_from_ptm(self.data, self.dim_in))
        return _frozen(_superop_from_choi(self.data, self.dim_in, self.dim_out))

    @functools.cached_property
    def ptm(self) -> np.ndarray:
        if self.representation == "ptm":
            return self.data
        if self.dim_in != self.dim_out:
            raise ChannelError("PTM requires dim_in == dim_out")
        r = _ptm_from_superop(self.superop, self.dim_in)
        if np.max(np.abs(r.imag), initial=0.0) > 1e-12:
            raise ChannelError("PTM has non-negligible imaginary part (map not Hermiticity preserving)")
        r = r.real.copy()
        r.setflags(write=False)
        return r

    @property
    def kraus(self) -> tuple[np.ndarray, ...]:
        if self.representation == "kraus":
            return self.data
        return choi_to_kraus(self).data

    @property
    def n_qubits(self) -> int:
        return n_qubits_of(self.dim_in)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        if self.representation == "kraus":
            return sum(k @ rho @ k.conj().T for k in self.data)
        out = self.superop @ rho.T.reshape(-1)
        return out.reshape(self.dim_out, self.dim_out).T

    # -- validation ---------------------------------------------------------

    def validate(self, eig_tol: float = EIG_TOL, tp_tol: float = TP_TOL) -> CPTPReport:
        j = self.choi
        herm = 0.5 * (j + j.conj().T)
        min_eig = float(np.linalg.eigvalsh(herm)[0])
        defect = float(np.linalg.norm(
            partial_trace_output(j, self.dim_in, self.dim_out) - np.eye(self.dim_in)))
        first_row = None
        if self.dim_in == self.dim_out and self.dim_in & (self.dim_in - 1) == 0:
            try:
                first_row = np.array(self.ptm[0])
            except ChannelError:
                first_row = None
        return CPTPReport(min_eig, defect, first_row, min_eig >= -eig_tol, defect < tp_tol)

    def is_cptp(self, eig_tol: float = EIG_TOL, tp_tol: float = TP_TOL) -> bool:
        return self.validate(eig_tol, tp_tol).ok

    def require_cptp(self, what: str = "channel") -> "Channel":
        rep = self.validate()
        if not rep.cp:
            raise NotCPError(f"{what} is not CP: min Choi eigenvalue {rep.min_choi_eigenvalue:.3e}")
        if not rep.tp:
            raise ChannelError(f"{what} is not TP: partial-trace defect {rep.tp_defect:.3e}")
        return self

    def __repr__(self) -> str:
        return f"Channel({self.representation}, dim_in={self.dim_in}, dim_out={self.dim_out})"


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------


def kraus_to_choi(channel: Channel) -> Channel:
    return Channel.from_choi(channel.choi, channel.dim_in, channel.dim_out)


def choi_to_kraus(channel: Channel, tol: float = EIG_TOL) -> Channel:
    """Kraus operators from the eigendecomposition of the Choi matrix.

    Eigenvalues in ``[-tol, 0)`` are treated as round-off and dropped; anything
    more negative raises :class:`NotCPError`.
    """
    j = channel.choi
    evals, evecs = np.linalg.eigh(0.5 * (j + j.conj().T))
    if evals[0] < -tol:
        raise NotCPError(f"Choi eigenvalue {evals[0]:.3e} < -{tol:g}")
    keep = evals > tol
    ops = [np.sqrt(lam) * evecs[:, i].reshape(channel.dim_out, channel.dim_in)
           for i, lam in zip(np.flatnonzero(keep), evals[keep])]
    if not ops:
        ops = [np.zeros((channel.dim_out, channel.dim_in))]
    return Channel.from_kraus(ops[::-1])


def channel_to_ptm(channel: Channel) -> Channel:
    return Channel.from_ptm(channel.ptm)


# ---------------------------------------------------------------------------
# Algebra
# ---------------------------------------------------------------------------


def compose(second: Channel, first: Channel) -> Channel:
    """The map ``second ∘ first`` (apply ``first``, then ``second``)."""
    if first.dim_out != second.dim_in:
        raise ChannelError(f"cannot compose: dim_out(first)={first.dim_out} != "
                           f"dim_in(second)={second.dim_in}")
    if first.representation == second.representation == "kraus":
        return Channel.from_kraus([b @ a for b in second.data for a in first.data])
    if first.representation == second.representation == "ptm":
        return Channel.from_ptm(second.data @ first.data)
    return Channel.from_superop(second.superop @ first.superop, first.dim_in, second.dim_out)


def compose_all(*channels: Channel) -> Channel:
    """``compose_all(c, b, a) == c ∘ b ∘ a``."""
    out = channels[-1]
    for ch in reversed(channels[:-1]):
        out = compose(ch, out)
    return out


def power(channel: Channel, m: int) -> Channel:
    s = np.linalg.matrix_power(channel.superop, m)
    return Channel.from_superop(s, channel.dim_in, channel.dim_out)


def tensor(a: Channel, b: Channel) -> Channel:
    if a.representation == b.representation == "ptm":
        return Channel.from_ptm(np.kron(a.data, b.data))
    return Channel.from_kraus([np.kron(ka, kb) for ka in a.kraus for kb in b.kraus])


@dataclass(frozen=True)
class MixtureWeights:
    """A probability vector with its support (entries above ``1e-12``)."""

    weights: np.ndarray
    support: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if np.any(w < -1e-12) or not np.all(np.isfinite(w)):
            raise ChannelError("weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ChannelError(f"weights sum to {w.sum():.12g}, not 1")
        w = np.clip(w, 0.0, None)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "support", tuple(int(i) for i in np.flatnonzero(w > 1e-12)))

    def __len__(self) -> int:
        return len(self.weights)

    def __getitem__(self, i):
        return self.weights[i]


def mix(channels: Sequence[Channel], weights) -> Channel:
    """Convex mixture ``Σ_k r_k G_k``.

    All-Kraus inputs give a Kraus result with ``√r_k``-scaled operators;
    otherwise the Choi matrices are averaged.
    """
    w = weights if isinstance(weights, MixtureWeights) else MixtureWeights(weights)
    if len(w) != len(channels):
        raise ChannelError("one weight per channel required")
    dims = {(c.dim_in, c.dim_out) for c in channels}
    if len(dims) != 1:
        raise ChannelError("mixed channels must share dimensions")
    dim_in, dim_out = dims.pop()
    if all(c.representation == "kraus" for c in channels):
        ops = [np.sqrt(w[k]) * op for k in w.support for op in channels[k].data]
        return Channel.from_kraus(ops)
    choi = sum(w[k] * channels[k].choi for k in w.support)
    return Channel.from_choi(choi, dim_in, dim_out)


# ---------------------------------------------------------------------------
# Pauli channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PauliChannel:
    n_qubits: int
    probs: Mapping[str, float]

    def __post_init__(self):
        probs = {k: float(v) for k, v in self.probs.items()}
        for label, p in probs.items():
            if len(label) != self.n_qubits or set(label) - set("IXYZ"):
                raise ChannelError(f"bad Pauli label {label!r}")
            if not -1e-15 <= p <= 1 + 1e-15:
                raise ChannelError(f"probability {p} for {label} outside [0, 1]")
        if abs(sum(probs.values()) - 1.0) > 1e-12:
            raise ChannelError(f"Pauli probabilities sum to {sum(probs.values())!r}")
        object.__setattr__(self, "probs", probs)

    def prob(self, label: str) -> float:
        return self.probs.get(label, 0.0)

    def to_channel(self) -> Channel:
        ops = [np.sqrt(max(p, 0.0)) * pauli_matrix(lab)
               for lab, p in sorted(self.probs.items()) if p > 0]
        return Channel.from_kraus(ops or [np.zeros((2**self.n_qubits,) * 2)])

    @classmethod
    def from_channel(cls, channel: Channel, tol: float = 1e-10) -> "PauliChannel":
        """Read off Pauli probabilities from a channel with diagonal PTM."""
        n = channel.n_qubits
        r = channel.ptm
        if np.max(np.abs(r - np.diag(np.diag(r)))) > tol:
            raise ChannelError("channel is not a Pauli channel (PTM not diagonal)")
        labels = pauli_labels(n)
        # p_a = 4^-n Σ_b (-1)^{<a,b>} R_bb, with sign +1 when P_a, P_b commute.
        signs = np.array([[1 if _commute(a, b) else -1 for b in labels] for a in labels])
        p = signs @ np.diag(r) / 4**n
        if p.min() < -tol:
            raise ChannelError("PTM diagonal does not correspond to a Pauli channel")
        return cls(n, {lab: float(max(v, 0.0)) for lab, v in zip(labels, p)})


def _commute(a: str, b: str) -> bool:
    anti = sum(1 for x, y in zip(a, b) if x != "I" and y != "I" and x != y)
    return anti % 2 == 0


def dephasing(p: float) -> Channel:
    """Single-qubit ``ρ ↦ (1-p)ρ + p ZρZ``."""
    return PauliChannel(1, {"I": 1 - p, "Z": p}).to_channel()


def amplitude_damping(lam: float) -> Channel:
    k0 = np.array([[1, 0], [0, np.sqrt(1 - lam)]])
    k1 = np.array([[0, np.sqrt(lam)], [0, 0]])
    return Channel.from_kraus([k0, k1])


def embed(channel: Channel, qubit: int, n_qubits: int) -> Channel:
    """Act with a single-qubit channel on ``qubit`` of an ``n_qubits`` register."""
    out = None
    for q in range(n_qubits):
        part = channel if q == qubit else Channel.identity(2)
        out = part if out is None else tensor(out, part)
    return out


# ---------------------------------------------------------------------------
# Choi coordinates
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _coordinate_basis(dim: int) -> np.ndarray:
    """Orthonormal Hermitian basis of ``{H : Tr_out H = 0}``, shape (n_aff, D², D²).

    Elements are ``(P_a ⊗ P_b)/D`` with ``P_a`` ≠ identity on the output factor.
    """
    stack = _pauli_stack(n_qubits_of(dim))
    basis = np.array([np.kron(pa, pb) / dim for pa in stack[1:] for pb in stack])
    basis.setflags(write=False)
    return basis


def affine_dimension(dim: int) -> int:
    return dim**4 - dim**2


@dataclass(frozen=True)
class ChoiCoordinates:
    vector: np.ndarray
    dim: int

    @property
    def affine_dim(self) -> int:
        return affine_dimension(self.dim)


def choi_coordinates(channel: Channel, tol: float = 1e-8) -> ChoiCoordinates:
    """Euclidean coordinates of a TP Choi matrix on the TP affine subspace.

    The map is an isometry: coordinate distances equal Frobenius distances of
    the Choi matrices.
    """
    if channel.dim_in != channel.dim_out:
        raise ChannelError("coordinates defined for square channels only")
    dim = channel.dim_in
    j = channel.choi
    if np.linalg.norm(partial_trace_output(j, dim, dim) - np.eye(dim)) > tol:
        raise ChannelError("choi_coordinates requires a trace-preserving channel")
    basis = _coordinate_basis(dim)
    x = np.einsum("kij,ji->k", basis, j).real
    return ChoiCoordinates(x, dim)


def coordinates_to_choi(coords: ChoiCoordinates | np.ndarray, dim: int | None = None) -> Channel:
    if isinstance(coords, ChoiCoordinates):
        vec, dim = coords.vector, coords.dim
    else:
        vec = np.asarray(coords, dtype=float)
        if dim is None:
            dim = int(round(np.sqrt(0.5 + np.sqrt(0.25 + len(vec)))))
    if len(vec) != affine_dimension(dim):
        raise ChannelError(f"expected {affine_dimension(dim)} coordinates, got {len(vec)}")
    basis = _coordinate_basis(dim)
    choi = np.eye(dim * dim) / dim + np.einsum("k,kij->ij", vec, basis)
    return Channel.from_choi(choi, dim, dim)


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------


def _trace_norm_hermitian(a: np.ndarray) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (a + a.conj().T)))))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return 0.5 * _trace_norm_hermitian(np.asarray(rho) - np.asarray(sigma))


def choi_trace_distance(a: Channel, b: Channel) -> float:
    """``½‖J(a) − J(b)‖₁ / dim_in`` (trace distance of normalized Choi states)."""
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        raise ChannelError("channels have different dimensions")
    return 0.5 * _trace_norm_hermitian(a.choi - b.choi) / a.dim_in


@dataclass(frozen=True)
class DiamondBounds:
    """Interval for ``½‖a − b‖_◇``."""

    lower: float
    upper: float
    converged: bool

    def __iter__(self):
        return iter((self.lower, self.upper))


def diamond_distance_bounds(a: Channel, b: Channel, restarts: int = 8,
                            seed: int = 0, tol: float = 1e-9) -> DiamondBounds:
    """Certified bracket on the half diamond distance between two channels.

    The lower bound maximizes ``½‖((a−b) ⊗ id)(|φ⟩⟨φ|)‖₁`` over pure inputs
    with a multi-start local search (the maximally entangled input is always
    one of the starts). The upper bound is ``½‖J(a) − J(b)‖₁``, capped at 1
    when both maps are CPTP.
    ``converged`` is set when two starts agree on the best value within
    ``1e-6``.
    """
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        raise ChannelError("channels have different dimensions")
    din, dout = a.dim_in, a.dim_out
    jd = a.choi - b.choi
    upper = 0.5 * _trace_norm_hermitian(jd)
    if upper > 1 and a.is_cptp() and b.is_cptp():
        upper = 1.0
    if upper < 1e-15:
        return DiamondBounds(0.0, 0.0, True)

    def value(params: np.ndarray) -> float:
        psi = (params[: din * din] + 1j * params[din * din:]).reshape(din, din)
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            return 0.0
        # |φ⟩ = (I ⊗ Ψᵀ)|Φ⟩ for φ_{ij} = Ψ_{ij}; output = (I⊗Ψᵀ) J (I⊗Ψᵀ)†.
        m = np.kron(np.eye(dout), psi.T / nrm)
        return 0.5 * _trace_norm_hermitian(m @ jd @ m.conj().T)

    rng = np.random.default_rng(seed)
    starts = [np.concatenate([np.eye(din).reshape(-1), np.zeros(din * din)])]
    starts += [rng.normal(size=2 * din * din) for _ in range(restarts)]
    results = []
    for x0 in starts:
        res = optimize.minimize(lambda p: -value(p), x0, method="BFGS",
                                options={"gtol": 1e-10, "maxiter": 2000})
        results.append(max(value(res.x), value(x0)))
    results.sort(reverse=True)
    lower = min(results[0], upper)
    converged = len(results) > 1 and results[0] - results[1] < 1e-6
    return DiamondBounds(float(lower), float(upper), bool(converged))


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------


def check_density_matrix(rho: np.ndarray, trace_tol: float = 1e-10,
                         herm_tol: float = 1e-12, eig_tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if abs(np.trace(rho) - 1) > trace_tol:
        raise ChannelError(f"trace {np.trace(rho).real:.12g} != 1")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ChannelError("density matrix not Hermitian")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -eig_tol:
        raise ChannelError("density matrix has a negative eigenvalue")
    return rho


# ---------------------------------------------------------------------------
# Random instances (tests and studies)
# ---------------------------------------------------------------------------


def random_channel(dim: int, rng: np.random.Generator, rank: int | None = None) -> Channel:
    """Random CPTP map via a Haar-ish isometry of a random Stinespring dilation."""
    rank = rank or dim * dim
    g = rng.normal(size=(dim * rank, dim)) + 1j * rng.normal(size=(dim * rank, dim))
    q, _ = np.linalg.qr(g)
    return Channel.from_kraus([q[i * dim:(i + 1) * dim] for i in range(rank)])


def random_density_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

CHANNEL_FORMAT = "pqec.channel/1"


def channel_to_dict(channel: Channel) -> dict:
    """Serialize as ``{format, dim_in, dim_out, representation, real, imag}``.

    ``real``/``imag`` hold row-major flattened entries; for Kraus channels they
    are lists with one flattened operator each.
    """
    if channel.representation == "kraus":
        real = [k.real.reshape(-1).tolist() for k in channel.data]
        imag = [k.imag.reshape(-1).tolist() for k in channel.data]
    else:
        arr = np.asarray(channel.data)
        real, imag = arr.real.reshape(-1).tolist(), arr.imag.reshape(-1).tolist()
    return {"format": CHANNEL_FORMAT, "dim_in": channel.dim_in, "dim_out": channel.dim_out,
            "representation": channel.representation, "real": real, "imag": imag}


def channel_from_dict(doc: Mapping) -> Channel:
    try:
        rep = doc["representation"]
        din, dout = int(doc["dim_in"]), int(doc["dim_out"])
        real, imag = doc["real"], doc["imag"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ChannelError(f"malformed channel document: {exc}") from exc
    if rep == "kraus":
        ops = [(np.asarray(r, dtype=float) + 1j * np.asarray(i, dtype=float)).reshape(dout, din)
               for r, i in zip(real, imag)]
        return Channel.from_kraus(ops)
    arr = np.asarray(real, dtype=float) + 1j * np.asarray(imag, dtype=float)
    if rep == "choi":
        return Channel.from_choi(arr.reshape(din * dout, din * dout), din, dout)
    if rep == "ptm":
        if np.max(np.abs(arr.imag), initial=0) > 1e-12:
            raise ChannelError("PTM entries must be real")
        return Channel.from_ptm(arr.real.reshape(din * din, din * din))
    raise ChannelError(f"unknown representation {rep!r}")
