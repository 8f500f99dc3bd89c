import itertools
import math
from collections import defaultdict
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dic.channel import evaluate
from dic.errors import UsageError
from dic.prob import (
    ProductInput,
    entropy_bits,
    grid_size,
    parse_pmf,
    push_forward,
    refine_around,
    simplex_grid,
    unit_fraction,
)

from conftest import random_inputs


def brute_entropy(spec, inp, names):
    """Independent route: enumerate inputs, evaluate the channel symbol by symbol."""
    mass = defaultdict(float)
    for x in itertools.product(*(range(n) for n in spec.input_sizes)):
        p = inp[0][x[0]] * inp[1][x[1]] * inp[2][x[2]]
        if p == 0:
            continue
        sig = evaluate(spec, *x)
        vals = {f"X{l + 1}": x[l] for l in range(3)}
        vals.update({f"X{l + 1}{k + 1}": sig.x[l][k] for l in range(3) for k in range(3)})
        vals.update({f"S{k + 1}": sig.s[k] for k in range(3)})
        vals.update({f"Y{k + 1}": sig.y[k] for k in range(3)})
        mass[tuple(vals[n] for n in names)] += p
    return -sum(p * math.log2(p) for p in mass.values() if p > 0)


def test_s1_marginal_uniform(additive):
    dist = push_forward(additive, ProductInput.uniform((3, 3, 3)))
    assert np.allclose(dist.marginal("S1"), [2 / 9, 5 / 9, 2 / 9], atol=1e-15)


def test_known_entropies(additive):
    dist = push_forward(additive, ProductInput.uniform((3, 3, 3)))
    h = -2 * (2 / 9) * math.log2(2 / 9) - (5 / 9) * math.log2(5 / 9)
    assert dist.entropy(["S1"]) == pytest.approx(h, abs=1e-12)
    assert dist.entropy(["Y1"]) == pytest.approx(brute_entropy(additive, dist.input, ["Y1"]), abs=1e-12)


@pytest.mark.parametrize(
    "names",
    [["Y1"], ["S2"], ["Y3", "X13"], ["X21", "X31"], ["Y1", "Y2", "Y3"], ["X2", "S3"]],
)
def test_entropies_match_enumeration(additive, names):
    for inp in random_inputs(additive, 10, seed=1):
        dist = push_forward(additive, inp)
        assert dist.entropy(names) == pytest.approx(brute_entropy(additive, inp, names), abs=1e-12)


def test_entropy_bits_convention():
    assert entropy_bits([1.0, 0.0]) == 0.0
    assert entropy_bits([0.5, 0.5]) == pytest.approx(1.0)


pmf3 = st.lists(st.floats(0, 1), min_size=3, max_size=3).filter(lambda v: sum(v) > 1e-3)


def _norm(v):
    v = np.asarray(v)
    return v / v.sum()


@settings(max_examples=60, deadline=None)
@given(pmf3, pmf3, pmf3)
def test_entropy_identities(additive, a, b, c):
    dist = push_forward(additive, ProductInput((_norm(a), _norm(b), _norm(c))))
    # chain rule and nonnegativity of conditional entropy / mutual information
    for k in (1, 2, 3):
        y, s, x = f"Y{k}", f"S{k}", f"X{k}{k}"
        joint = dist.entropy([y, s])
        assert joint == pytest.approx(dist.entropy([s]) + dist.conditional_entropy([y], [s]), abs=1e-12)
        assert dist.conditional_entropy([y], [s]) >= -1e-12
        assert dist.mutual_information([x], [s]) == pytest.approx(0.0, abs=1e-12)  # independent senders
        assert dist.entropy([y]) <= math.log2(additive.y_sizes[k - 1]) + 1e-12
        # Y is a function of (X_kk, S_k)
        assert dist.conditional_entropy([y], [x, s]) == pytest.approx(0.0, abs=1e-12)


def test_parse_pmf():
    inp = parse_pmf("1/3,1/3,1/3;1/2,0,1/2;1,0,0", (3, 3, 3))
    assert inp[0] == pytest.approx([1 / 3] * 3)
    with pytest.raises(UsageError):
        parse_pmf("1/2,1/2;1", (2, 1, 1))
    with pytest.raises(UsageError):
        parse_pmf("1/2,1/4;1;1", (2, 1, 1))
    with pytest.raises(UsageError):
        parse_pmf("a,b;1;1")
    with pytest.raises(UsageError):
        parse_pmf("1/2,1/2;1;1", (3, 1, 1))


def test_negative_pmf_rejected():
    with pytest.raises(UsageError):
        ProductInput(([1.5, -0.5], [1.0], [1.0]))


@pytest.mark.parametrize("step,m", [("1/6", 6), (Fraction(1, 40), 40), (0.25, 4), (1, 1)])
def test_unit_fraction(step, m):
    assert unit_fraction(step) == m


@pytest.mark.parametrize("step", ["2/3", "0", "-1/2", 0.3, "x"])
def test_unit_fraction_rejects(step):
    with pytest.raises(UsageError):
        unit_fraction(step)


def test_simplex_grid_order_and_size():
    pts = list(simplex_grid(3, "1/6"))
    assert len(pts) == grid_size(3, "1/6") == 28
    keys = [tuple(np.round(p * 6).astype(int)) for p in pts]
    assert keys == sorted(keys)
    assert all(abs(p.sum() - 1) < 1e-12 for p in pts)
    assert any(np.allclose(p, [0.5, 0, 0.5]) for p in pts)


def test_grids_nest():
    coarse = {tuple(np.round(p, 12)) for p in simplex_grid(3, "1/6")}
    fine = {tuple(np.round(p, 12)) for p in simplex_grid(3, "1/12")}
    assert coarse <= fine


def test_refine_around():
    inp = ProductInput.uniform((2, 2, 1))
    assert list(refine_around(inp, 0, "1/8"))[0] is inp
    near = list(refine_around(inp, 0.125, "1/8"))
    assert len(near) == 9
    for q in near:
        for p, r in zip(q.pmfs, inp.pmfs):
            assert np.max(np.abs(p - r)) <= 0.125 + 1e-12
