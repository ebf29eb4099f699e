import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pqec.surface_code import (
    CodeError,
    NoiseModel,
    PauliError,
    RecoveryPolicy,
    ResourceLimitError,
    brute_force_min_weight,
    build_code,
    check_code,
    decode_mwpm,
    extract_logical_channel,
    frame_policies,
    logical_channel_family,
    match_defects,
    syndrome,
)


def d3_layout():
    """Independent d=3 rotated layout: qubit (r, c) -> 3r + c."""
    q = lambda r, c: 3 * r + c
    x_checks = [[q(0, 0), q(0, 1), q(1, 0), q(1, 1)], [q(1, 1), q(1, 2), q(2, 1), q(2, 2)],
                [q(0, 1), q(0, 2)], [q(2, 0), q(2, 1)]]
    z_checks = [[q(0, 1), q(0, 2), q(1, 1), q(1, 2)], [q(1, 0), q(1, 1), q(2, 0), q(2, 1)],
                [q(0, 0), q(1, 0)], [q(1, 2), q(2, 2)]]
    to_h = lambda checks: np.array([[int(i in c) for i in range(9)] for c in checks])
    return to_h(x_checks), to_h(z_checks)


def dephasing_failure_interval(p):
    """Range of logical-Z rates over all minimum-weight decoders (tie choices)."""
    hx, hz = d3_layout()
    pats = np.array(list(itertools.product([0, 1], repeat=9)))
    synd = [tuple(s) for s in pats @ hx.T % 2]
    # A logical X commutes with the Z checks but is not generated by the X checks.
    null = [v for v in pats if not (hz @ v % 2).any()]
    span = {tuple(np.array(c) @ hx % 2) for c in itertools.product([0, 1], repeat=4)}
    lx = next(v for v in null if tuple(v) not in span)
    cls = pats @ lx % 2
    w = pats.sum(axis=1)
    best = {}
    for s, c, wt in zip(synd, cls, w):
        best.setdefault(s, [99, 99])
        best[s][c] = min(best[s][c], wt)
    prob = p**w * (1 - p) ** (9 - w)
    lo = hi = 0.0
    for s, c, pr in zip(synd, cls, prob):
        mine, other = best[s][c], best[s][1 - c]
        if other < mine:
            lo += pr
            hi += pr
        elif other == mine:
            hi += pr
    return lo, hi


@pytest.mark.parametrize("d,expected", [(3, 17), (5, 49), (7, 97)])
def test_code_structure(d, expected):
    code = build_code(d)
    check_code(code)
    assert code.patch_qubits == expected == 2 * d * d - 1
    assert len(code.x_stabilizers) == len(code.z_stabilizers) == (d * d - 1) // 2
    assert len(code.logical_x) == len(code.logical_z) == d
    assert code.hx.sum(axis=1).max() == 4 and code.hx.sum(axis=1).min() == 2


def test_even_distance_rejected():
    with pytest.raises(CodeError):
        build_code(4)


def test_pauli_error_algebra():
    e = PauliError.from_string("XYZ")
    assert (e.x_mask, e.z_mask) == (0b011, 0b110)
    assert e.weight == 3
    assert (e * e).weight == 0


@pytest.mark.parametrize("sector", ["x", "z"])
def test_decoder_is_minimum_weight_d3(sector):
    code = build_code(3)
    nx = len(code.x_stabilizers)
    best = brute_force_min_weight(code, sector)
    assert len(best) == 16
    for s, w in best.items():
        bits = np.zeros(code.n_stabilizers, dtype=int)
        sub = [(s >> i) & 1 for i in range(nx)]
        if sector == "z":
            bits[:nx] = sub
        else:
            bits[nx:] = sub
        corr = decode_mwpm(code, bits)
        assert np.array_equal(syndrome(code, corr), bits)
        assert corr.weight == w


@given(st.integers(0, 2**25 - 1), st.integers(0, 2**25 - 1), st.integers(0, 3))
def test_decoder_d5_reproduces_syndrome_without_exceeding_error_weight(xm, zm, keep):
    code = build_code(5)
    # Sparse errors: keep a handful of bits.
    rng = np.random.default_rng(xm ^ zm)
    qs = rng.choice(25, size=keep + 1, replace=False)
    mask = sum(1 << int(q) for q in qs)
    err = PauliError(xm & mask, zm & mask)
    bits = syndrome(code, err)
    corr = decode_mwpm(code, bits)
    assert np.array_equal(syndrome(code, corr), bits)
    assert PauliError(corr.x_mask, 0).weight <= PauliError(err.x_mask, 0).weight
    assert PauliError(0, corr.z_mask).weight <= PauliError(0, err.z_mask).weight


@pytest.mark.parametrize("d", [3, 5])
def test_correctable_errors_leave_no_logical(d):
    code = build_code(d)
    t = (d - 1) // 2
    rng = np.random.default_rng(d)
    for _ in range(200):
        qs = rng.choice(d * d, size=t, replace=False)
        kinds = rng.integers(1, 4, size=t)
        s = ["I"] * (d * d)
        for q, k in zip(qs, kinds):
            s[q] = "XYZ"[k - 1]
        err = PauliError.from_string("".join(s))
        resid = err * decode_mwpm(code, syndrome(code, err))
        assert not syndrome(code, resid).any()
        assert bin(resid.x_mask & code.logical_z_mask).count("1") % 2 == 0
        assert bin(resid.z_mask & code.logical_x_mask).count("1") % 2 == 0


def test_match_defects_prefers_boundary_when_cheaper():
    g = build_code(3).graph_x
    w, pairs = match_defects([], g)
    assert w == 0 and pairs == ()
    w, pairs = match_defects([0], g)
    assert pairs[0][1] == g.boundary


@pytest.mark.parametrize("p", [0.001, 0.01, 0.05, 0.2])
def test_exact_dephasing_matches_independent_enumeration(p):
    lo, hi = dephasing_failure_interval(p)
    lr = extract_logical_channel(build_code(3), NoiseModel("dephasing_only", p))
    pz = lr.pauli_probs.prob("Z")
    assert lo - 1e-15 <= pz <= hi + 1e-15
    assert lr.pauli_probs.prob("X") == lr.pauli_probs.prob("Y") == 0.0


def test_exact_dephasing_reference_value():
    # At d=3 no syndrome has tied cosets, so every minimum-weight decoder agrees.
    lo, hi = dephasing_failure_interval(0.01)
    assert hi - lo == 0
    lr = extract_logical_channel(build_code(3), NoiseModel("dephasing_only", 0.01))
    assert lr.pauli_probs.prob("Z") == pytest.approx(lo, rel=1e-12)
    assert lr.pauli_probs.prob("Z") == pytest.approx(0.0017309892343856316, rel=1e-12)


def test_independent_xz_sectors_factorize():
    lr = extract_logical_channel(build_code(3), NoiseModel("independent_xz", 0.03))
    p = lr.pauli_probs
    assert p.prob("Y") == pytest.approx((p.prob("X") + p.prob("Y")) * (p.prob("Z") + p.prob("Y")),
                                        rel=1e-10)


@pytest.mark.parametrize("kind", ["depolarizing", "independent_xz", "dephasing_only"])
def test_logical_round_is_cptp(kind):
    lr = extract_logical_channel(build_code(3), NoiseModel(kind, 0.02))
    assert sum(lr.pauli_probs.probs.values()) == pytest.approx(1.0, abs=1e-14)
    assert lr.to_channel().validate().ok


def test_monte_carlo_agrees_with_exact_and_is_deterministic():
    code = build_code(3)
    noise = NoiseModel("depolarizing", 0.03)
    exact = extract_logical_channel(code, noise)
    mc = extract_logical_channel(code, noise, "monte_carlo", 300_000, seed=5)
    for k in "XYZ":
        se = np.sqrt(exact.pauli_probs.prob(k) / 300_000)
        assert abs(mc.pauli_probs.prob(k) - exact.pauli_probs.prob(k)) < 5 * se + 1e-12
    again = extract_logical_channel(code, noise, "monte_carlo", 300_000, seed=5)
    assert again.pauli_probs.probs == mc.pauli_probs.probs
    other = extract_logical_channel(code, noise, "monte_carlo", 300_000, seed=6)
    assert other.pauli_probs.probs != mc.pauli_probs.probs


def test_exact_limited_to_small_distance():
    with pytest.raises(ResourceLimitError):
        extract_logical_channel(build_code(5), NoiseModel("dephasing_only", 0.01))


def test_frame_policies_relabel():
    code = build_code(3)
    fam = logical_channel_family(code, NoiseModel("dephasing_only", 0.02), frame_policies())
    base, fx, fy, fz = (f.pauli_probs for f in fam)
    assert fz.prob("Z") == pytest.approx(base.prob("I"))
    assert fz.prob("I") == pytest.approx(base.prob("Z"))
    assert fx.prob("X") == pytest.approx(base.prob("I"))
    assert fy.prob("Y") == pytest.approx(base.prob("I"))


def test_coset_flip_policy_moves_weight():
    code = build_code(3)
    noise = NoiseModel("dephasing_only", 0.02)
    base = extract_logical_channel(code, noise)
    flipped = extract_logical_channel(code, noise, policy=RecoveryPolicy(
        "flip_all", "I", z_coset_flips=frozenset(range(16))))
    assert flipped.pauli_probs.prob("Z") == pytest.approx(base.pauli_probs.prob("I"))


def test_mismatch_scales_effective_rate():
    n = NoiseModel("dephasing_only", 0.01, 1.15)
    assert n.effective_p == pytest.approx(0.0115)
    assert n.nominal().mismatch_factor == 1.0
    with pytest.raises(CodeError):
        NoiseModel("bitflip", 0.01)
    with pytest.raises(CodeError):
        NoiseModel("dephasing_only", 0.7)


def test_round_channel_json_fields():
    lr = extract_logical_channel(build_code(3), NoiseModel("dephasing_only", 0.01))
    doc = lr.to_dict()
    assert {"distance", "noise", "method", "seed", "pauli_probs", "standard_errors"} <= set(doc)
