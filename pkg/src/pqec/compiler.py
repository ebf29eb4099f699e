"""Compile target time steps into convex mixtures of implementable logical channels.

The fit works in Choi coordinates: with ``A`` the library coordinate matrix
and ``b`` the target's coordinates it minimizes ``f(r) = ½‖Ar − b‖²`` over the
probability simplex with Frank–Wolfe. Strategy A fits the whole step
``E_tar`` against ``G_k ∘ B ∘ U``; Strategy B fits only the dissipator against
the programming library and places it after a corrected baseline.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channels import (
    Channel,
    ChannelError,
    MixtureWeights,
    PauliChannel,
    amplitude_damping,
    choi_coordinates,
    compose,
    compose_all,
    embed,
    mix,
    pauli_labels,
    pauli_matrix,
    tensor,
)
from .library import LogicalChannelLibrary
from .lindblad import LindbladModel, coherent_step, exact_step
from .surface_code import (
    NoiseModel,
    RecoveryPolicy,
    SurfaceCode,
    frame_policies,
    logical_channel_family,
)

#: Strength of the amplitude-damping primitive in the reset/feedback library.
LAMBDA_UNIT = 0.5
#: Duality gaps below this are round-off for unit-scale Choi coordinates.
GAP_FLOOR = 1e-15

__all__ = [
    "LAMBDA_UNIT", "GAP_FLOOR", "LogicalChannelLibrary", "MixtureWeights", "FitResult", "PruneResult",
    "CompiledStep", "CompileOptions", "CompileError", "pauli_frame_library",
    "reset_feedback_library", "strategyA_library", "programmed_library", "ft_baseline",
    "fit_mixture", "caratheodory_prune", "compile_step",
]


class CompileError(RuntimeError):
    """The target lies outside the reachable hull to within the tolerance."""

    def __init__(self, message: str, fit: "FitResult"):
        super().__init__(message)
        self.fit = fit


# ---------------------------------------------------------------------------
# Libraries
# ---------------------------------------------------------------------------


def pauli_frame_library(n_qubits: int = 1) -> LogicalChannelLibrary:
    if n_qubits not in (1, 2):
        raise ValueError("Pauli-frame libraries are provided for 1 or 2 logical qubits")
    labels = pauli_labels(n_qubits)
    chans = tuple(Channel.unitary(pauli_matrix(lab)) for lab in labels)
    return LogicalChannelLibrary(chans, tuple(f"frame_{lab}" for lab in labels),
                                 {"kind": "pauli_frames", "n_qubits": n_qubits})


def reset_channel() -> Channel:
    return Channel.from_kraus([np.array([[1, 0], [0, 0]]), np.array([[0, 1], [0, 0]])])


def measure_z_channel() -> Channel:
    return Channel.from_kraus([np.array([[1, 0], [0, 0]]), np.array([[0, 0], [0, 1]])])


def reset_feedback_library(n_qubits: int = 1, lam_unit: float | None = None) -> LogicalChannelLibrary:
    """Pauli frames plus per-qubit reset, Z measurement and ``AD(lam_unit)``.

    ``lam_unit`` defaults to the module constant ``LAMBDA_UNIT`` read at call time.
    """
    if lam_unit is None:
        lam_unit = LAMBDA_UNIT
    frames = pauli_frame_library(n_qubits)
    chans, labels = list(frames.channels), list(frames.labels)
    for q in range(n_qubits):
        for name, ch in (("reset", reset_channel()), ("measure_z", measure_z_channel()),
                         ("amp_damp", amplitude_damping(lam_unit))):
            chans.append(embed(ch, q, n_qubits))
            labels.append(f"{name}_{q}")
    return LogicalChannelLibrary(tuple(chans), tuple(labels),
                                 {"kind": "reset_feedback", "n_qubits": n_qubits,
                                  "lambda_unit": lam_unit})


def strategyA_library(code: SurfaceCode, noise: NoiseModel,
                      policies: Sequence[RecoveryPolicy] | None = None,
                      method: str = "exact", samples: int = 1_000_000,
                      seed: int = 0) -> LogicalChannelLibrary:
    """Logical round channels ``B^{(k)}``, one per recovery policy.

    Element 0 is the first policy (the baseline decoder by default).
    """
    policies = list(policies) if policies is not None else frame_policies()
    family = logical_channel_family(code, noise, policies, method, samples, seed)
    return LogicalChannelLibrary(tuple(lr.to_channel() for lr in family),
                                 tuple(lr.policy for lr in family),
                                 {"kind": "strategyA", "distance": code.distance,
                                  "noise": noise.to_dict(), "method": method,
                                  "samples": samples if method == "monte_carlo" else None,
                                  "seed": seed if method == "monte_carlo" else None,
                                  "pauli_probs": [lr.pauli_probs.probs for lr in family]})


def programmed_library(programs: LogicalChannelLibrary, baseline: Channel | None = None,
                       coherent: Channel | None = None) -> LogicalChannelLibrary:
    """Library of ``G_k ∘ baseline ∘ coherent``."""
    first = coherent
    if baseline is not None:
        first = baseline if first is None else compose(baseline, first)
    out = programs.then(first=first)
    return LogicalChannelLibrary(out.channels, out.labels,
                                 {**programs.source, "composed_with_baseline": baseline is not None,
                                  "composed_with_coherent": coherent is not None})


def ft_baseline(p_logical: float, n_qubits: int = 1) -> Channel:
    """Corrected baseline: isotropic logical Pauli noise of total strength ``p_logical`` per qubit."""
    one = PauliChannel(1, {"I": 1 - p_logical, "X": p_logical / 3, "Y": p_logical / 3,
                           "Z": p_logical / 3}).to_channel()
    out = one
    for _ in range(n_qubits - 1):
        out = tensor(out, one)
    return out


# ---------------------------------------------------------------------------
# Frank–Wolfe fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    weights: MixtureWeights
    residual: float
    fw_gap: float
    iterations: int
    converged: bool
    objective_history: tuple = field(default=(), repr=False)
    labels: tuple = ()

    @property
    def objective(self) -> float:
        return 0.5 * self.residual**2

    @property
    def residual_lower_bound(self) -> float:
        """Certified lower bound on the best achievable residual.

        The duality gap bounds ``f − f*``, so ``δ* ≥ √(2 max(f − gap, 0))``.
        """
        return float(np.sqrt(2 * max(self.objective - self.fw_gap, 0.0)))

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.weights.tolist(),
            "labels": list(self.labels),
            "support": list(self.weights.support),
            "residual": self.residual,
            "residual_lower_bound": self.residual_lower_bound,
            "fw_gap": self.fw_gap,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _simplex_ls_active(a: np.ndarray, b: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Minimize ``‖A r − b‖`` over the face of the simplex spanned by ``r``'s support.

    Wolfe-style minor cycles: solve the affine least-squares problem on the
    active set, and when the solution leaves the simplex move toward it until
    a weight vanishes, drop that index and repeat.
    """
    r = r.copy()
    active = list(np.flatnonzero(r > 0))
    while active:
        s = a[:, active]
        k = len(active)
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = s.T @ s
        kkt[:k, k] = kkt[k, :k] = 1.0
        rhs = np.concatenate([s.T @ b, [1.0]])
        y = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]
        cur = r[active]
        if np.all(y >= 0):
            r[:] = 0.0
            r[active] = y / y.sum()
            return r
        neg = y < 0
        theta = np.min(cur[neg] / (cur[neg] - y[neg]))
        new = cur + theta * (y - cur)
        new[new < 1e-15] = 0.0
        r[:] = 0.0
        r[active] = new
        active = [i for i, w in zip(active, new) if w > 0]
        r /= r.sum()
    return r


def fit_mixture(library: LogicalChannelLibrary | np.ndarray, target: Channel | np.ndarray,
                eta: float = 1e-9, max_iter: int = 10_000, corrective: bool = True,
                record_history: bool = False) -> FitResult:
    """Frank–Wolfe on ``½‖Ar − b‖²`` over the simplex.

    The linear minimization oracle picks the vertex with the smallest
    gradient entry, the step length comes from exact line search, and the
    run stops once the duality gap is at most ``eta²`` (or ``GAP_FLOOR``,
    below which round-off dominates). With
    ``corrective=True`` each iteration also re-optimizes the weights over
    the current support (a fully-corrective variant; vanilla FW otherwise).
    ``library`` and ``target`` may also be a coordinate matrix and vector.
    """
    if isinstance(library, LogicalChannelLibrary):
        a, labels = library.coords, library.labels
    else:
        a, labels = np.asarray(library, dtype=float), ()
    if isinstance(target, Channel):
        if isinstance(library, LogicalChannelLibrary) and target.dim_in != library.dim:
            raise ChannelError("target and library dimensions differ")
        b = choi_coordinates(target).vector
    else:
        b = np.asarray(target, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ArithmeticError("non-finite coordinates")
    m = a.shape[1]
    start = int(np.argmin(np.linalg.norm(a - b[:, None], axis=0)))
    r = np.zeros(m)
    r[start] = 1.0
    ar = a[:, start].copy()
    history = []
    gap = np.inf
    it = 0
    converged = False
    for it in range(max_iter + 1):
        res = ar - b
        f = 0.5 * res @ res
        if record_history:
            history.append(f)
        g = a.T @ res
        s = int(np.argmin(g))
        gap = float(g @ r - g[s])
        if gap <= max(eta**2, GAP_FLOOR):
            converged = True
            break
        if it == max_iter:
            break
        ad = a[:, s] - ar
        denom = ad @ ad
        step = 1.0 if denom == 0 else float(np.clip(-(res @ ad) / denom, 0.0, 1.0))
        r *= 1 - step
        r[s] += step
        if corrective:
            cand = _simplex_ls_active(a, b, r)
            if np.linalg.norm(a @ cand - b) <= np.linalg.norm(a @ r - b):
                r = cand
        ar = a @ r
    r = np.clip(r, 0.0, None)
    r /= r.sum()
    residual = float(np.linalg.norm(a @ r - b))
    return FitResult(MixtureWeights(r), residual, max(gap, 0.0), it, converged,
                     tuple(history), tuple(labels))


# ---------------------------------------------------------------------------
# Carathéodory pruning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PruneResult:
    weights: MixtureWeights
    ok: bool
    message: str = ""


def caratheodory_prune(library: LogicalChannelLibrary | np.ndarray, weights,
                       bound: int | None = None, null_tol: float = 1e-8) -> PruneResult:
    """Reduce the support to at most ``bound`` (default ``n_aff + 1``) points.

    Each round takes a null vector ``v`` of the active points' affine system
    (``Σ v_k x_k = 0``, ``Σ v_k = 0``) and moves ``r ← r − θv`` with the largest
    ``θ`` keeping ``r ≥ 0``, which zeroes at least one weight and leaves the
    mixture point unchanged.
    """
    coords = library.coords if isinstance(library, LogicalChannelLibrary) else np.asarray(library)
    w = weights if isinstance(weights, MixtureWeights) else MixtureWeights(weights)
    if len(w) != coords.shape[1]:
        raise ChannelError("weights do not match the library size")
    bound = coords.shape[0] + 1 if bound is None else bound
    r = np.array(w.weights)
    while True:
        active = np.flatnonzero(r > 0)
        if len(active) <= bound:
            break
        system = np.vstack([coords[:, active], np.ones(len(active))])
        _, sv, vh = np.linalg.svd(system)
        v = vh[-1]
        if np.linalg.norm(system @ v) > null_tol:
            return PruneResult(w, False, "active points are affinely independent to tolerance")
        if not np.any(v > 0):
            v = -v
        pos = v > 0
        ratios = np.full(len(v), np.inf)
        ratios[pos] = r[active][pos] / v[pos]
        k = int(np.argmin(ratios))
        r[active] = r[active] - ratios[k] * v
        r[active[k]] = 0.0
        r[r < 0] = 0.0
    r /= r.sum()
    return PruneResult(MixtureWeights(r), True)


# ---------------------------------------------------------------------------
# Step compilation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompileOptions:
    """``baseline`` is ``B_d`` for Strategy A (optional) or ``B_d^FT`` for Strategy B."""

    eta: float = 1e-8
    max_iter: int = 10_000
    corrective: bool = True
    baseline: Channel | None = None
    raise_on_gap: bool = True


@dataclass(frozen=True, eq=False)
class CompiledStep:
    strategy: str
    coherent: Channel
    programmed: MixtureWeights
    library: LogicalChannelLibrary
    baseline: Channel
    assembled: Channel
    fit: FitResult
    fit_library: LogicalChannelLibrary = field(repr=False)

    def to_dict(self) -> dict:
        from .channels import channel_to_dict

        return {
            "strategy": self.strategy,
            "labels": list(self.library.labels),
            "library_source": self.library.source,
            "weights": self.programmed.weights.tolist(),
            "fit": self.fit.to_dict(),
            "assembled": channel_to_dict(Channel.from_choi(self.assembled.choi,
                                                           self.assembled.dim_in,
                                                           self.assembled.dim_out)),
        }


def compile_step(strategy: str, model: LindbladModel, tau: float,
                 library: LogicalChannelLibrary,
                 options: CompileOptions = CompileOptions()) -> CompiledStep:
    """Compile one step of ``model`` over time ``tau``.

    Strategy ``"A"`` fits ``exp(Lτ)`` against ``G_k ∘ B ∘ U`` where ``B`` is
    ``options.baseline`` (identity if absent, in which case the library
    elements are whole logical rounds ``B^{(k)}``). Strategy ``"B"`` fits the
    dissipator ``exp(L_D τ)`` against ``G_k`` and assembles
    ``G_s ∘ B^FT ∘ U``. No channel is ever inverted.
    """
    if library.dim != model.dim:
        raise ChannelError(f"library acts on dimension {library.dim}, model on {model.dim}")
    coherent = coherent_step(model, tau)
    baseline = options.baseline if options.baseline is not None else Channel.identity(model.dim)
    if strategy == "A":
        fit_lib = programmed_library(library, options.baseline, coherent)
        target = exact_step(model, tau)
    elif strategy == "B":
        fit_lib = library
        target = exact_step(model.dissipative_part(), tau)
    else:
        raise ValueError(f"strategy must be 'A' or 'B', got {strategy!r}")
    fit = fit_mixture(fit_lib, target, eta=options.eta, max_iter=options.max_iter,
                      corrective=options.corrective)
    if options.raise_on_gap and fit.residual > options.eta:
        raise CompileError(
            f"strategy {strategy}: residual {fit.residual:.3e} exceeds eta={options.eta:.1e} "
            f"(certified lower bound {fit.residual_lower_bound:.3e})", fit)
    programmed = mix(list(library.channels), fit.weights)
    assembled = compose_all(programmed, baseline, coherent)
    return CompiledStep(strategy, coherent, fit.weights, library, baseline, assembled, fit, fit_lib)
