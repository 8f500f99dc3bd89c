import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dic.channel import (
    FAILED,
    PROVED,
    SAMPLED,
    BUILTINS,
    ChannelSpec,
    builtin_channel,
    check_invertible_h,
    check_strong_interference,
    dump_spec,
    evaluate,
    load_spec_document,
    spec_from_dict,
    spec_to_dict,
    validate_spec,
)
from dic.errors import SpecError, UsageError
from dic.prob import ProductInput, push_forward

from conftest import random_inputs


def test_additive_evaluation(additive):
    sig = evaluate(additive, 2, 1, 2)
    # x21 = g-(1) = 1, x31 = g+(2) = 1
    assert sig.x[1][0] == 1 and sig.x[2][0] == 1
    assert sig.s[0] == 2
    assert sig.y[0] == 4


def test_evaluate_is_pure(additive):
    for x in np.ndindex(3, 3, 3):
        assert evaluate(additive, *x) == evaluate(additive, *x)


@pytest.mark.parametrize("name", [b for b in BUILTINS if b != "finite-field"])
def test_builtins_validate(name):
    assert validate_spec(builtin_channel(name)).passed


@pytest.mark.parametrize("alpha,beta,n", [(1, 0, 1), (1.5, 0.5, 2), (2, 1, 2), (1.25, 0.25, 4)])
def test_finite_field_validates(alpha, beta, n):
    spec = builtin_channel("finite-field", alpha=alpha, beta=beta, n_bits=n)
    assert validate_spec(spec).passed


def test_finite_field_rejects_bad_params():
    with pytest.raises(UsageError):
        builtin_channel("finite-field", alpha=0.5, beta=0.5, n_bits=2)
    with pytest.raises(UsageError):
        builtin_channel("finite-field", alpha=1.5, beta=0.5, n_bits=1)


def test_unknown_builtin():
    with pytest.raises(UsageError):
        builtin_channel("nope")


def test_blackwell_layout(blackwell):
    assert blackwell.input_sizes == (3, 2, 1)
    assert blackwell.g[0][1].tolist() == [0, 0, 1]
    assert blackwell.is_two_user


def test_additive_strong_interference_fails_with_witness(additive):
    res = check_strong_interference(additive)
    assert res.verdict == FAILED
    dist = push_forward(additive, ProductInput(res.witness))
    assert dist.entropy(["X11"]) > dist.entropy(["X12"]) + 1e-9


def test_additive_uniform_entropies(additive):
    dist = push_forward(additive, ProductInput.uniform((3, 3, 3)))
    assert dist.entropy(["X11"]) == pytest.approx(np.log2(3), abs=1e-12)
    # H(g+(X)) for uniform X = H(1/3, 2/3)
    assert dist.entropy(["X12"]) == pytest.approx(0.9182958340544896, abs=1e-12)


def test_pairing_strong_proved(pairing):
    assert check_strong_interference(pairing).verdict == PROVED
    assert check_invertible_h(pairing).verdict == PROVED


def test_degenerate_interferers_invertible():
    ident3 = (0, 1, 2)
    g = [[ident3, ident3, ident3], [(0,), (0,), (0,)], [(0,), (0,), (0,)]]
    inter = [[3, 3, 3], [1, 1, 1], [1, 1, 1]]
    h = [np.zeros((1, 1), int), np.arange(3).reshape(3, 1), np.arange(3).reshape(3, 1)]
    f = [np.arange(3).reshape(3, 1), np.zeros((1, 3), int) + np.arange(3), np.zeros((1, 3), int) + np.arange(3)]
    spec = ChannelSpec("degenerate", (3, 1, 1), inter, (1, 3, 3), (3, 3, 3), g, h, f)
    assert validate_spec(spec).passed
    assert check_invertible_h(spec).verdict == PROVED


def test_sampled_verdict_is_disclosed():
    # g11 = identity on {0,1,2}, cross links merge symbols differently per receiver
    spec = builtin_channel("additive3dic")
    d = spec_to_dict(spec)
    d["g"][0][1] = [0, 1, 2]
    d["g"][0][2] = [0, 1, 2]
    d["inter_sizes"][0][1] = 3
    d["inter_sizes"][0][2] = 3
    d["h"][1] = np.add.outer(np.arange(3), np.arange(2)).tolist()
    d["h"][2] = np.add.outer(np.arange(3), np.arange(2)).tolist()
    d["s_sizes"] = [3, 4, 4]
    d["f"][1] = np.add.outer(np.arange(3), np.arange(4)).tolist()
    d["f"][2] = np.add.outer(np.arange(3), np.arange(4)).tolist()
    d["y_sizes"] = [5, 6, 6]
    spec2 = spec_from_dict(d)
    assert validate_spec(spec2).passed
    res = check_strong_interference(spec2)
    assert res.verdict in (SAMPLED, FAILED)


def test_out_of_range_table_named():
    d = spec_to_dict(builtin_channel("additive3dic"))
    d["f"][0][2][2] = 9
    with pytest.raises(SpecError, match="f1"):
        validate_spec(spec_from_dict(d))


def test_ragged_table_rejected():
    d = spec_to_dict(builtin_channel("additive3dic"))
    d["h"][0] = [[0, 1], [1]]
    with pytest.raises(SpecError, match="ragged"):
        spec_from_dict(d)


def test_non_injective_f_witness():
    d = spec_to_dict(builtin_channel("additive3dic"))
    d["f"][0] = np.minimum(np.add.outer(np.arange(3), np.arange(3)), 3).tolist()
    spec = spec_from_dict(d)
    rep = validate_spec(spec)
    assert not rep.passed
    assert rep["f1 one-to-one per argument"].witness is not None


def test_spec_roundtrip(tmp_path, additive):
    path = tmp_path / "a.json"
    dump_spec(additive, path)
    back = spec_from_dict(load_spec_document(path))
    for var, table in additive.signal_tables.items():
        assert np.array_equal(back.signal_tables[var], table)


def test_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(SpecError):
        load_spec_document(path)


@pytest.mark.parametrize("name", ["additive3dic", "pairing-strong", "blackwell2dic"])
def test_injectivity_matches_entropic_equivalence(name):
    """Per-argument injectivity <=> H(X_kk) = H(Y_k|S_k) and H(S_k) = H(Y_k|X_kk)."""
    spec = builtin_channel(name)
    assert validate_spec(spec).passed
    for inp in random_inputs(spec, 30, seed=3):
        dist = push_forward(spec, inp)
        for k in (1, 2, 3):
            assert dist.entropy([f"X{k}{k}"]) == pytest.approx(
                dist.conditional_entropy([f"Y{k}"], [f"S{k}"]), abs=1e-12
            )
            assert dist.entropy([f"S{k}"]) == pytest.approx(
                dist.conditional_entropy([f"Y{k}"], [f"X{k}{k}"]), abs=1e-12
            )


def test_non_injective_breaks_entropic_equivalence():
    d = spec_to_dict(builtin_channel("additive3dic"))
    d["f"][0] = np.minimum(np.add.outer(np.arange(3), np.arange(3)), 3).tolist()
    spec = spec_from_dict(d)
    dist = push_forward(spec, ProductInput.uniform((3, 3, 3)))
    gap = dist.entropy(["X11"]) - dist.conditional_entropy(["Y1"], ["S1"])
    assert gap > 1e-6


def _latin(rng, m):
    """Random m x m Latin square: injective in each argument."""
    base = np.add.outer(np.arange(m), np.arange(m)) % m
    return rng.permutation(m)[base[rng.permutation(m)][:, rng.permutation(m)]]


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 3), st.integers(0, 10_000))
def test_random_latin_channels(m, seed):
    rng = np.random.default_rng(seed)
    ident = tuple(range(m))
    g = [[tuple(rng.permutation(m)) for _ in range(3)] for _ in range(3)]
    for k in range(3):
        g[k][k] = ident
    h = [_latin(rng, m) for _ in range(3)]
    f = [_latin(rng, m) for _ in range(3)]
    spec = ChannelSpec("latin", (m,) * 3, [[m] * 3] * 3, (m,) * 3, (m,) * 3, g, h, f)
    assert validate_spec(spec).passed
    inp = random_inputs(spec, 2, seed)[1]
    dist = push_forward(spec, inp)
    for k in (1, 2, 3):
        assert dist.entropy([f"X{k}{k}"]) == pytest.approx(dist.conditional_entropy([f"Y{k}"], [f"S{k}"]), abs=1e-12)
