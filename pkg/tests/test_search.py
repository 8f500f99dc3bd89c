from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from dic import search
from dic.errors import ResourceGuardError, UsageError
from dic.geometry import corner_points, downward_hull
from dic.noisy import ObservationChannel
from dic.search import (
    SweepConfig,
    aggregate,
    compare,
    distinct_points,
    pareto_filter,
    read_points,
    region_for,
    sweep,
    thread_count,
    write_corners,
    write_hull,
)


def _on_grid(inp, m):
    return all(np.allclose(np.round(p * m), p * m, atol=1e-9) for p in inp.pmfs)


@pytest.fixture(scope="module")
def additive_id(additive):
    return sweep(SweepConfig(additive, "id", Fraction(1, 3), refine_rounds=1, top_k=2))


def test_provenance_replay(additive, additive_id):
    config = SweepConfig(additive, "id", Fraction(1, 3))
    for corner, inp in zip(additive_id.corners, additive_id.provenance):
        rebuilt = corner_points(region_for(config, inp))
        assert np.any(np.all(rebuilt == corner, axis=1))


def test_provenance_on_grid_or_refinement(additive_id):
    # 1/3 grid plus one refinement round at 1/6
    assert all(_on_grid(inp, 6) for inp in additive_id.provenance)
    assert additive_id.n_pmfs > 10**3


def test_hull_contains_every_per_pmf_corner(blackwell):
    config = SweepConfig(blackwell, "2dic-id", Fraction(1, 4), refine_rounds=0)
    agg = sweep(config)
    for inp in search._grid_inputs(blackwell, Fraction(1, 4)):
        pts = corner_points(region_for(config, inp))
        assert agg.hull.contains(pts, 1e-9).all()


def test_sweep_is_deterministic(additive, tmp_path):
    outs = []
    for run in range(2):
        agg = sweep(SweepConfig(additive, "tin", Fraction(1, 3), refine_rounds=1, top_k=3))
        path = tmp_path / f"c{run}.csv"
        write_corners(agg, path)
        write_hull(agg, tmp_path / f"h{run}.csv")
        outs.append((path.read_bytes(), (tmp_path / f"h{run}.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_parallel_matches_serial(additive, tmp_path, monkeypatch):
    monkeypatch.setattr(search, "BATCH", 100)
    blobs = []
    for threads in (1, 2):
        agg = sweep(SweepConfig(additive, "id", Fraction(1, 3), refine_rounds=0, threads=threads))
        write_corners(agg, tmp_path / f"t{threads}.csv")
        blobs.append((tmp_path / f"t{threads}.csv").read_bytes())
    assert blobs[0] == blobs[1]


def test_pairing_id_equals_strong(pairing):
    a = sweep(SweepConfig(pairing, "id", Fraction(1, 4), refine_rounds=0))
    b = sweep(SweepConfig(pairing, "strong", Fraction(1, 4), refine_rounds=0))
    cmp = compare(a, b, n=1000, tol=1e-9)
    assert cmp.a_in_b and cmp.b_in_a
    assert max(a.max_weighted()[0], b.max_weighted()[0]) - min(a.max_weighted()[0], b.max_weighted()[0]) <= 1e-9


def test_hull_monotone_in_refinement(blackwell):
    coarse = sweep(SweepConfig(blackwell, "2dic-id", Fraction(1, 6), refine_rounds=0))
    fine = sweep(SweepConfig(blackwell, "2dic-id", Fraction(1, 12), refine_rounds=0))
    cmp = compare(coarse, fine, n=1000, tol=1e-9)
    assert cmp.a_in_b


def test_refinement_never_shrinks(blackwell):
    plain = sweep(SweepConfig(blackwell, "tin", Fraction(1, 6), refine_rounds=0))
    refined = sweep(SweepConfig(blackwell, "tin", Fraction(1, 6), refine_rounds=2))
    assert refined.n_pmfs > plain.n_pmfs
    assert refined.max_weighted()[0] >= plain.max_weighted()[0] - 1e-12


def test_additive_tin_vs_id_witness(additive, additive_id):
    # an ID-only corner needs a uniform ternary sender, so a third-grid is the coarsest that shows one
    tin = sweep(SweepConfig(additive, "tin", Fraction(1, 3), refine_rounds=0))
    cmp = compare(tin, additive_id)
    assert cmp.a_in_b and not cmp.b_in_a
    assert len(cmp.witnesses_b_not_a) > 0


def test_identical_regions_compare_equal(additive):
    tin = sweep(SweepConfig(additive, "tin", Fraction(1, 2), refine_rounds=0))
    cmp = compare(tin, tin.corners)
    assert cmp.a_in_b and cmp.b_in_a


def test_grid_cap(additive):
    with pytest.raises(ResourceGuardError):
        sweep(SweepConfig(additive, "id", Fraction(1, 6), cap=1000))


def test_config_validation(additive, blackwell):
    with pytest.raises(UsageError):
        SweepConfig(additive, "fancy")
    with pytest.raises(UsageError):
        SweepConfig(additive, "id", Fraction(2, 7))
    with pytest.raises(UsageError):
        SweepConfig(additive, "id-noisy")
    with pytest.raises(UsageError):
        SweepConfig(additive, "2dic-id")
    with pytest.raises(UsageError):
        SweepConfig(additive, "id", Fraction(1, 4), refine_radius=Fraction(1, 16))
    SweepConfig(blackwell, "2dic-id", Fraction(1, 4), refine_radius=Fraction(1, 8))


def test_noisy_sweep_identity_matches_noiseless(additive):
    obs = ObservationChannel.identity(additive)
    a = sweep(SweepConfig(additive, "id-noisy", Fraction(1, 2), refine_rounds=0, obs=obs))
    b = sweep(SweepConfig(additive, "id", Fraction(1, 2), refine_rounds=0))
    assert np.allclose(a.corners, b.corners, atol=1e-9)


def test_pareto_filter_keeps_union():
    rng = np.random.default_rng(0)
    pts = rng.random((200, 3))
    kept = pareto_filter(pts)
    hull_all, hull_kept = downward_hull(pts), downward_hull(kept)
    assert hull_kept.contains(pts, 1e-9).all()
    assert len(kept) < len(pts)
    for p in kept:
        assert not np.any(np.all(pts >= p, axis=1) & np.any(pts > p, axis=1))
    assert hull_all.contains(kept, 1e-9).all()


def test_aggregate_provenance_is_first_producer(additive):
    from dic.prob import ProductInput

    a, b = ProductInput.uniform((3, 3, 3)), ProductInput(([1, 0, 0], [1, 0, 0], [1, 0, 0]))
    pts = np.array([[1.0, 1.0, 1.0]])
    agg = aggregate("x", [b, a], [pts, pts.copy()])
    assert len(agg.corners) == 1 and agg.provenance[0] is b


def test_distinct_points():
    pts = np.array([[0, 0, 0], [0.01, 0, 0], [0.1, 0, 0], [0.12, 0.2, 0]])
    assert len(distinct_points(pts, 0.05)) == 3


def test_thread_count(monkeypatch):
    monkeypatch.delenv("DIC_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("DIC_THREADS", "3")
    assert thread_count() == 3
    assert thread_count(2) == 2
    monkeypatch.setenv("DIC_THREADS", "many")
    with pytest.raises(UsageError):
        thread_count()


def test_read_points(tmp_path, additive_id):
    path = tmp_path / "c.csv"
    write_corners(additive_id, path)
    assert np.allclose(read_points(path), additive_id.corners, atol=1e-9)
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(UsageError):
        read_points(bad)
    with pytest.raises(UsageError):
        read_points(tmp_path / "missing.csv")


GOLDEN = Path(__file__).resolve().parent / "golden"


def test_golden_csv(blackwell, tmp_path):
    agg = sweep(SweepConfig(blackwell, "2dic-id", Fraction(1, 6)))
    write_corners(agg, tmp_path / "corners.csv")
    write_hull(agg, tmp_path / "hull.csv")
    for name in ("corners", "hull"):
        want = (GOLDEN / f"blackwell_2dic_id_step6_{name}.csv").read_bytes()
        assert (tmp_path / f"{name}.csv").read_bytes() == want
