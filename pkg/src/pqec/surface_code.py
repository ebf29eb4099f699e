"""Rotated surface code under code-capacity Pauli noise.

Builds the code, computes syndromes, decodes each CSS sector with an exact
minimum-weight matching, and extracts the logical Pauli channel of one
noisy round followed by recovery.

Bit conventions: a :class:`PauliError` stores bitmasks with bit ``q`` for data
qubit ``q``. Syndrome vectors list the X-stabilizer bits (which detect Z
errors) first, then the Z-stabilizer bits. Inside a sector, a syndrome is also
packed into an integer with bit ``i`` for stabilizer ``i``.
"""
from __future__ import annotations

import functools
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .channels import PauliChannel

#: Samples per Monte Carlo chunk; each chunk draws from its own derived seed.
CHUNK = 100_000
EXACT_MAX_DISTANCE = 3

NOISE_KINDS = ("depolarizing", "independent_xz", "dephasing_only")


class CodeError(ValueError):
    pass


class ResourceLimitError(CodeError):
    pass


def _popcount(x: int) -> int:
    return bin(x).count("1")


# ---------------------------------------------------------------------------
# Code construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatchingGraph:
    """Decoding graph of one CSS sector.

    Nodes ``0..n_stab-1`` are stabilizers, node ``n_stab`` is the boundary.
    Every data qubit is an edge of unit weight; when several qubits join the
    same node pair the lowest-index qubit represents the edge.
    """

    n_stab: int
    edge_weights: dict
    edge_qubit: dict
    dist: np.ndarray = field(repr=False)
    path_mask: np.ndarray = field(repr=False)

    @property
    def boundary(self) -> int:
        return self.n_stab

    @classmethod
    def from_checks(cls, checks: Sequence[Sequence[int]], n_qubits: int) -> "MatchingGraph":
        n_stab = len(checks)
        owners: list[list[int]] = [[] for _ in range(n_qubits)]
        for s, check in enumerate(checks):
            for q in check:
                owners[q].append(s)
        edge_qubit: dict = {}
        for q, own in enumerate(owners):
            if len(own) == 1:
                key = (own[0], n_stab)
            elif len(own) == 2:
                key = tuple(sorted(own))
            else:
                continue
            edge_qubit.setdefault(key, q)
        adj: list[list[tuple[int, int]]] = [[] for _ in range(n_stab + 1)]
        for (u, v), q in sorted(edge_qubit.items()):
            adj[u].append((v, q))
            adj[v].append((u, q))
        dist = np.full((n_stab + 1, n_stab + 1), np.inf)
        paths = np.zeros((n_stab + 1, n_stab + 1), dtype=object)
        for src in range(n_stab + 1):
            # BFS; the boundary is never an intermediate node.
            d = {src: 0}
            mask = {src: 0}
            queue = deque([src])
            while queue:
                u = queue.popleft()
                if u == n_stab and u != src:
                    continue
                for v, q in adj[u]:
                    if v not in d:
                        d[v] = d[u] + 1
                        mask[v] = mask[u] ^ (1 << q)
                        queue.append(v)
            for v, dv in d.items():
                dist[src, v] = dv
                paths[src, v] = mask[v]
        weights = {k: 1.0 for k in edge_qubit}
        return cls(n_stab, weights, edge_qubit, dist, paths)


@dataclass(frozen=True, eq=False)
class SurfaceCode:
    """Distance-``d`` rotated surface code on a ``d × d`` grid of data qubits.

    Data qubit ``(r, c)`` has index ``r*d + c``. Plaquette ``(i, j)`` with
    ``0 ≤ i, j ≤ d`` touches the qubits ``(i-1..i, j-1..j)`` that exist; it is
    X-type when ``i + j`` is even. Weight-2 X plaquettes sit on the top and
    bottom edges, weight-2 Z plaquettes on the left and right edges.
    """

    distance: int
    data_qubits: tuple[tuple[int, int], ...]
    x_stabilizers: tuple[tuple[int, ...], ...]
    z_stabilizers: tuple[tuple[int, ...], ...]
    logical_x: tuple[int, ...]
    logical_z: tuple[int, ...]
    hx: np.ndarray = field(repr=False)
    hz: np.ndarray = field(repr=False)
    graph_x: MatchingGraph = field(repr=False)
    graph_z: MatchingGraph = field(repr=False)

    @property
    def n_data(self) -> int:
        return self.distance**2

    @property
    def n_stabilizers(self) -> int:
        return len(self.x_stabilizers) + len(self.z_stabilizers)

    @property
    def patch_qubits(self) -> int:
        """Data qubits plus one syndrome ancilla per stabilizer."""
        return self.n_data + self.n_stabilizers

    @property
    def logical_x_mask(self) -> int:
        return sum(1 << q for q in self.logical_x)

    @property
    def logical_z_mask(self) -> int:
        return sum(1 << q for q in self.logical_z)


def build_code(distance: int) -> SurfaceCode:
    return _build_code(int(distance))


@functools.lru_cache(maxsize=None)
def _build_code(d: int) -> SurfaceCode:
    if d < 3 or d % 2 == 0:
        raise CodeError(f"distance must be odd and >= 3, got {d}")
    data = tuple((r, c) for r in range(d) for c in range(d))
    xs, zs = [], []
    for i in range(d + 1):
        for j in range(d + 1):
            qs = tuple(sorted(r * d + c for r in (i - 1, i) for c in (j - 1, j)
                              if 0 <= r < d and 0 <= c < d))
            is_x = (i + j) % 2 == 0
            if len(qs) == 4:
                (xs if is_x else zs).append(qs)
            elif len(qs) == 2:
                top_bottom = i in (0, d)
                if top_bottom and is_x:
                    xs.append(qs)
                elif not top_bottom and not is_x:
                    zs.append(qs)
    n = d * d
    hx = np.zeros((len(xs), n), dtype=np.uint8)
    hz = np.zeros((len(zs), n), dtype=np.uint8)
    for s, qs in enumerate(xs):
        hx[s, list(qs)] = 1
    for s, qs in enumerate(zs):
        hz[s, list(qs)] = 1
    column = tuple(r * d for r in range(d))
    row = tuple(range(d))
    # Z-type logical must commute with X checks, X-type with Z checks.
    if not (hx[:, list(column)].sum(axis=1) % 2).any():
        logical_z, logical_x = column, row
    else:
        logical_z, logical_x = row, column
    hx.setflags(write=False)
    hz.setflags(write=False)
    return SurfaceCode(d, data, tuple(xs), tuple(zs), logical_x, logical_z, hx, hz,
                       MatchingGraph.from_checks(xs, n), MatchingGraph.from_checks(zs, n))


def check_code(code: SurfaceCode) -> None:
    """Raise :class:`CodeError` if any structural invariant fails."""
    hx, hz = code.hx.astype(int), code.hz.astype(int)
    if (hx @ hz.T % 2).any():
        raise CodeError("X and Z stabilizers do not commute")
    lx = np.zeros(code.n_data, dtype=int)
    lz = np.zeros(code.n_data, dtype=int)
    lx[list(code.logical_x)] = 1
    lz[list(code.logical_z)] = 1
    if (hz @ lx % 2).any() or (hx @ lz % 2).any():
        raise CodeError("logical operators do not commute with the stabilizers")
    if lx @ lz % 2 != 1:
        raise CodeError("logical X and Z must anticommute")
    rank = _gf2_rank(hx) + _gf2_rank(hz)
    if rank != code.n_data - 1:
        raise CodeError(f"expected {code.n_data - 1} independent stabilizers, found {rank}")


def _gf2_rank(m: np.ndarray) -> int:
    m = m.copy() % 2
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if m[r, c]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(rows):
            if r != rank and m[r, c]:
                m[r] ^= m[rank]
        rank += 1
    return rank


# ---------------------------------------------------------------------------
# Errors and syndromes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PauliError:
    x_mask: int = 0
    z_mask: int = 0

    @property
    def weight(self) -> int:
        return _popcount(self.x_mask | self.z_mask)

    def __mul__(self, other: "PauliError") -> "PauliError":
        return PauliError(self.x_mask ^ other.x_mask, self.z_mask ^ other.z_mask)

    @classmethod
    def from_string(cls, s: str) -> "PauliError":
        x = sum(1 << q for q, ch in enumerate(s) if ch in "XY")
        z = sum(1 << q for q, ch in enumerate(s) if ch in "ZY")
        return cls(x, z)


def _mask_bits(mask: int, n: int) -> np.ndarray:
    return np.array([(mask >> q) & 1 for q in range(n)], dtype=np.uint8)


def _pack(bits: np.ndarray) -> np.ndarray:
    """Pack the last axis of a 0/1 array into integers, bit i from column i."""
    bits = np.asarray(bits, dtype=np.int64)
    return bits @ (1 << np.arange(bits.shape[-1], dtype=np.int64))


def syndrome(code: SurfaceCode, error: PauliError) -> np.ndarray:
    n = code.n_data
    sx = code.hx @ _mask_bits(error.z_mask, n) % 2
    sz = code.hz @ _mask_bits(error.x_mask, n) % 2
    return np.concatenate([sx, sz]).astype(np.uint8)


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


def match_defects(defects: Sequence[int], graph: MatchingGraph) -> tuple[float, tuple]:
    """Exact minimum-weight pairing of defects, each possibly to the boundary.

    Memoized recursion over defect subsets: the lowest unmatched defect is
    paired with each later defect in increasing order, then with the
    boundary; only strictly better totals replace the incumbent, so ties go
    to the lexicographically smallest pair list. Returns ``(weight, pairs)``
    with boundary pairings written ``(u, graph.boundary)``.
    """
    defects = list(defects)
    dist = graph.dist
    b = graph.boundary

    @functools.lru_cache(maxsize=None)
    def best(mask: int) -> tuple[float, tuple]:
        if mask == 0:
            return 0.0, ()
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        u = defects[i]
        cost, pairs = np.inf, ()
        j_mask = rest
        while j_mask:
            j = (j_mask & -j_mask).bit_length() - 1
            j_mask &= j_mask - 1
            w = dist[u, defects[j]]
            if w >= cost:
                continue
            sub_c, sub_p = best(rest & ~(1 << j))
            if w + sub_c < cost:
                cost, pairs = w + sub_c, ((u, defects[j]),) + sub_p
        w = dist[u, b]
        if w < cost:
            sub_c, sub_p = best(rest)
            if w + sub_c < cost:
                cost, pairs = w + sub_c, ((u, b),) + sub_p
        return cost, pairs

    return best((1 << len(defects)) - 1)


class SectorDecoder:
    """Minimum-weight matching decoder for one CSS sector, memoized by syndrome."""

    def __init__(self, graph: MatchingGraph):
        self.graph = graph
        self._cache: dict[int, int] = {}

    def correction(self, syndrome_int: int) -> int:
        hit = self._cache.get(syndrome_int)
        if hit is not None:
            return hit
        defects = [i for i in range(self.graph.n_stab) if (syndrome_int >> i) & 1]
        _, pairs = match_defects(defects, self.graph)
        mask = 0
        for u, v in pairs:
            mask ^= self.graph.path_mask[u, v]
        self._cache[syndrome_int] = mask
        return mask

    def table(self, syndromes: np.ndarray) -> np.ndarray:
        return np.array([self.correction(int(s)) for s in syndromes], dtype=object)


@functools.lru_cache(maxsize=None)
def _decoders(distance: int) -> tuple[SectorDecoder, SectorDecoder]:
    code = build_code(distance)
    # X checks see Z errors; Z checks see X errors.
    return SectorDecoder(code.graph_x), SectorDecoder(code.graph_z)


def decode_mwpm(code: SurfaceCode, syndrome_bits: Sequence[int]) -> PauliError:
    """Correction whose syndrome equals ``syndrome_bits``.

    X and Z sectors are matched independently on unit-weight graphs.
    """
    bits = np.asarray(syndrome_bits, dtype=np.int64)
    nx = len(code.x_stabilizers)
    if len(bits) != code.n_stabilizers:
        raise CodeError(f"syndrome length {len(bits)} != {code.n_stabilizers}")
    dec_z_errors, dec_x_errors = _decoders(code.distance)
    z_corr = dec_z_errors.correction(int(_pack(bits[:nx])))
    x_corr = dec_x_errors.correction(int(_pack(bits[nx:])))
    return PauliError(x_corr, z_corr)


# ---------------------------------------------------------------------------
# Noise and recovery policies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """IID single-qubit Pauli noise, one layer per round.

    ``mismatch_factor`` scales the rate actually applied; fitting code works
    with :meth:`nominal` to model a miscalibrated noise assumption.
    """

    kind: str = "dephasing_only"
    p_phys: float = 0.0
    mismatch_factor: float = 1.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise CodeError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.p_phys <= 0.5:
            raise CodeError(f"p_phys={self.p_phys} outside [0, 0.5]")
        if self.mismatch_factor <= 0:
            raise CodeError("mismatch_factor must be positive")
        if self.effective_p > 1.0:
            raise CodeError("p_phys * mismatch_factor exceeds 1")

    @property
    def effective_p(self) -> float:
        return self.p_phys * self.mismatch_factor

    def nominal(self) -> "NoiseModel":
        return replace(self, mismatch_factor=1.0)

    def qubit_probs(self) -> tuple[float, float, float, float]:
        """Probabilities of I, X, Y, Z on one data qubit."""
        p = self.effective_p
        if self.kind == "depolarizing":
            return 1 - p, p / 3, p / 3, p / 3
        if self.kind == "independent_xz":
            return (1 - p) ** 2, p * (1 - p), p * p, p * (1 - p)
        return 1 - p, 0.0, 0.0, p

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p_phys": self.p_phys, "mismatch_factor": self.mismatch_factor}


# Pauli product up to phase is XOR in the encoding I=0, X=1, Z=2, Y=3.
_CODE = {"I": 0, "X": 1, "Z": 2, "Y": 3}
_LABEL = {v: k for k, v in _CODE.items()}
_PAULI_MUL = {(a, b): _LABEL[_CODE[a] ^ _CODE[b]] for a in "IXYZ" for b in "IXYZ"}


def _class_label(flip_x: int, flip_z: int) -> str:
    return _LABEL[flip_x | (flip_z << 1)]


@dataclass(frozen=True)
class RecoveryPolicy:
    """Baseline decoder plus optional logical modifications.

    ``frame`` is a logical Pauli applied after recovery. ``z_coset_flips`` lists
    packed X-check syndromes on which logical Z is added to the correction;
    ``x_coset_flips`` does the same with logical X on Z-check syndromes.
    """

    name: str = "baseline"
    frame: str = "I"
    z_coset_flips: frozenset = frozenset()
    x_coset_flips: frozenset = frozenset()

    def __post_init__(self):
        if self.frame not in ("I", "X", "Y", "Z"):
            raise CodeError(f"frame must be one of I, X, Y, Z, got {self.frame!r}")
        object.__setattr__(self, "z_coset_flips", frozenset(int(s) for s in self.z_coset_flips))
        object.__setattr__(self, "x_coset_flips", frozenset(int(s) for s in self.x_coset_flips))


BASELINE = RecoveryPolicy()


def frame_policies() -> list[RecoveryPolicy]:
    return [RecoveryPolicy("baseline" if f == "I" else f"frame_{f}", f) for f in "IXYZ"]


# ---------------------------------------------------------------------------
# Logical channel extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogicalRoundChannel:
    distance: int
    noise: NoiseModel
    pauli_probs: PauliChannel
    method: str
    samples: int | None = None
    seed: int | None = None
    standard_errors: dict | None = None
    policy: str = "baseline"

    def to_channel(self):
        return self.pauli_probs.to_channel()

    @property
    def logical_error_rate(self) -> float:
        return 1.0 - self.pauli_probs.prob("I")

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "noise": self.noise.to_dict(),
            "method": self.method,
            "samples": self.samples,
            "seed": self.seed,
            "policy": self.policy,
            "pauli_probs": {k: self.pauli_probs.prob(k) for k in "IXYZ"},
            "standard_errors": self.standard_errors,
        }


class _SectorTables:
    """Per-pattern decode outcomes for one sector, vectorized over patterns."""

    def __init__(self, h: np.ndarray, decoder: SectorDecoder, logical_mask_bits: np.ndarray):
        self.h = h.astype(np.int64)
        self.decoder = decoder
        self.logical = logical_mask_bits.astype(np.int64)
        self.n = h.shape[1]

    def outcome(self, patterns: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """For 0/1 error rows: (packed syndrome, logical flip of residual)."""
        synd = _pack(patterns @ self.h.T % 2)
        uniq, inv = np.unique(synd, return_inverse=True)
        corr = np.array([_mask_bits(self.decoder.correction(int(s)), self.n) for s in uniq],
                        dtype=np.int64).reshape(len(uniq), self.n)
        residual = (patterns + corr[inv.reshape(-1)]) % 2
        if (residual @ self.h.T % 2).any():
            raise CodeError("residual operator does not commute with the stabilizers")
        return synd, residual @ self.logical % 2


def _sector_tables(code: SurfaceCode):
    dec_z, dec_x = _decoders(code.distance)
    lx = _mask_bits(code.logical_x_mask, code.n_data)
    lz = _mask_bits(code.logical_z_mask, code.n_data)
    # X-error residual flips the logical iff it anticommutes with logical Z.
    x_sector = _SectorTables(code.hz, dec_x, lz)
    z_sector = _SectorTables(code.hx, dec_z, lx)
    return x_sector, z_sector


def _apply_policy(flip_x, flip_z, synd_x, synd_z, policy: RecoveryPolicy):
    if policy.x_coset_flips:
        flip_x = flip_x ^ np.isin(synd_x, list(policy.x_coset_flips)).astype(flip_x.dtype)
    if policy.z_coset_flips:
        flip_z = flip_z ^ np.isin(synd_z, list(policy.z_coset_flips)).astype(flip_z.dtype)
    return flip_x, flip_z


def _relabel(probs: dict, frame: str) -> dict:
    if frame == "I":
        return dict(probs)
    out = {k: 0.0 for k in "IXYZ"}
    for k, p in probs.items():
        out[_PAULI_MUL[(frame, k)]] += p
    return out


def _all_patterns(n: int) -> np.ndarray:
    idx = np.arange(2**n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.int64)


def extract_logical_channel(code: SurfaceCode, noise: NoiseModel, method: str = "exact",
                            samples: int = 1_000_000, seed: int = 0,
                            policy: RecoveryPolicy = BASELINE) -> LogicalRoundChannel:
    """Logical Pauli channel of one noisy round followed by matching recovery."""
    return logical_channel_family(code, noise, [policy], method, samples, seed)[0]


def logical_channel_family(code: SurfaceCode, noise: NoiseModel,
                           policies: Iterable[RecoveryPolicy], method: str = "exact",
                           samples: int = 1_000_000, seed: int = 0) -> list[LogicalRoundChannel]:
    """One logical channel per recovery policy, sharing a single error sample."""
    policies = list(policies)
    if not policies:
        raise CodeError("at least one recovery policy is required")
    if method == "exact":
        return _family_exact(code, noise, policies)
    if method == "monte_carlo":
        return _family_monte_carlo(code, noise, policies, int(samples), int(seed))
    raise CodeError(f"unknown estimation method {method!r}")


def _family_exact(code, noise, policies):
    if code.distance > EXACT_MAX_DISTANCE:
        raise ResourceLimitError(
            f"exact enumeration is limited to d <= {EXACT_MAX_DISTANCE}; use method='monte_carlo'")
    n = code.n_data
    pats = _all_patterns(n)
    x_sector, z_sector = _sector_tables(code)
    synd_x, fx = x_sector.outcome(pats)
    synd_z, fz = z_sector.outcome(pats)
    p_i, p_x, p_y, p_z = noise.qubit_probs()
    table = np.array([[p_i, p_z], [p_x, p_y]])  # [x bit, z bit]
    joint = np.ones((len(pats), len(pats)))
    for q in range(n):
        joint *= table[pats[:, q][:, None], pats[:, q][None, :]]
    out = []
    for pol in policies:
        px, pz = _apply_policy(fx, fz, synd_x, synd_z, pol)
        probs = {}
        for a in (0, 1):
            for b in (0, 1):
                probs[_class_label(a, b)] = float(joint[np.ix_(px == a, pz == b)].sum())
        probs = _relabel(probs, pol.frame)
        out.append(LogicalRoundChannel(code.distance, noise, PauliChannel(1, probs), "exact",
                                       policy=pol.name))
    return out


def _family_monte_carlo(code, noise, policies, samples, seed):
    n = code.n_data
    x_sector, z_sector = _sector_tables(code)
    cum = np.cumsum(noise.qubit_probs())
    counts = np.zeros((len(policies), 4), dtype=np.int64)
    n_chunks = -(-samples // CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    for c, child in enumerate(children):
        size = min(CHUNK, samples - c * CHUNK)
        rng = np.random.Generator(np.random.Philox(child))
        u = rng.random((size, n))
        kind = np.searchsorted(cum[:3], u, side="right")  # 0=I 1=X 2=Y 3=Z
        xe = ((kind == 1) | (kind == 2)).astype(np.int64)
        ze = ((kind == 2) | (kind == 3)).astype(np.int64)
        synd_x, fx = x_sector.outcome(xe)
        synd_z, fz = z_sector.outcome(ze)
        for k, pol in enumerate(policies):
            px, pz = _apply_policy(fx, fz, synd_x, synd_z, pol)
            # class index in I=0, X=1, Z=2, Y=3 encoding
            counts[k] += np.bincount(px + 2 * pz, minlength=4)
    out = []
    for k, pol in enumerate(policies):
        raw = {_LABEL[i]: counts[k, i] / samples for i in range(4)}
        probs = _relabel(raw, pol.frame)
        se = {lab: float(np.sqrt(p * (1 - p) / samples)) for lab, p in probs.items()}
        out.append(LogicalRoundChannel(code.distance, noise, PauliChannel(1, probs),
                                       "monte_carlo", samples, seed, se, pol.name))
    return out


def brute_force_min_weight(code: SurfaceCode, sector: str) -> dict[int, int]:
    """Minimum correction weight per packed syndrome, by enumerating all patterns.

    ``sector="z"`` enumerates Z-error patterns (checked by X stabilizers).
    """
    h = code.hx if sector == "z" else code.hz
    pats = _all_patterns(code.n_data)
    synd = _pack(pats @ h.T.astype(np.int64) % 2)
    weight = pats.sum(axis=1)
    best: dict[int, int] = {}
    order = np.lexsort((weight, synd))
    for s, w in zip(synd[order], weight[order]):
        best.setdefault(int(s), int(w))
    return best
