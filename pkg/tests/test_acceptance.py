"""Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned.

The figure presets (criteria 1, 5 and 8) run end to end through the CLI and
take several minutes in total.
"""

import csv
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from dic.cli import run
from dic.geometry import corner_points, downward_hull, inclusion_check
from dic.noisy import ObservationChannel, id_region_noisy_at
from dic.prob import push_forward
from dic.region import CROSS, id_region_at, strong_capacity_at, tin_region_at, two_user_id_region_at
from dic.search import compare, read_points

from conftest import random_inputs

TESTS = Path(__file__).resolve().parent


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def summary(path):
    return dict(line.split("=", 1) for line in Path(path).read_text().splitlines())


def timed_preset(name, out):
    start = time.perf_counter()
    code = run(["preset", name, "--out", str(out)])
    return code, time.perf_counter() - start


def greedy_separated(points, sep):
    picked = []
    for p in points:
        if all(np.max(np.abs(p - q)) >= sep for q in picked):
            picked.append(p)
    return picked


@pytest.fixture(scope="module")
def fig4(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig4")
    code, secs = timed_preset("fig4", out)
    return out, code, secs


def test_criterion_1_additive_sum_rates(fig4, capsys):
    out, code, secs = fig4
    s = summary(out / "summary.txt")
    tin = read_points(out / "tin_corners.csv")
    idc = read_points(out / "id_corners.csv")
    tin_sum, id_sum = tin.sum(axis=1).max(), idc.sum(axis=1).max()
    tin_arg = tin[np.argmax(tin.sum(axis=1))]
    near = idc[idc.sum(axis=1) >= id_sum - 0.01]
    distinct = greedy_separated(near, 0.05)
    asymmetric = [p for p in distinct if np.ptp(p) > 0.05]
    ok = (
        code == 0
        and abs(tin_sum - 3) <= 0.01
        and abs(id_sum - 3) <= 0.01
        and np.all(np.abs(tin_arg - 1) <= 0.01)
        and len(distinct) >= 3
        and len(asymmetric) >= 2
        and secs <= 600
        and s["tin_sum"] == "3.000"
        and s["id_sum"] == "3.000"
    )
    report(capsys, 1, ok, f"TIN sum {tin_sum:.4f} at {np.round(tin_arg, 3).tolist()}, ID sum {id_sum:.4f} at "
                          f"{len(distinct)} separated corners ({len(asymmetric)} asymmetric), {secs:.0f}s")


def test_criterion_2_strict_inclusion(additive, fig4, capsys):
    violations = 0
    for i, inp in enumerate(random_inputs(additive, 200, seed=202)):
        res = inclusion_check(tin_region_at(additive, inp), id_region_at(additive, inp), n=1000, seed=i, tol=1e-9)
        violations += len(res.witnesses)
    out = fig4[0]
    tin_hull = downward_hull(read_points(out / "tin_corners.csv"))
    idc = read_points(out / "id_corners.csv")
    outside = idc[~tin_hull.contains(idc, 1e-9)]
    cmp = compare(tin_hull, read_points(out / "id_corners.csv"))
    ok = violations == 0 and len(outside) >= 1 and cmp.a_in_b and not cmp.b_in_a
    report(capsys, 2, ok, f"{violations} per-pmf violations over 200x1000 samples; {len(outside)} ID corners "
                          f"outside conv(TIN), e.g. {np.round(outside[0], 3).tolist() if len(outside) else None}")


def test_criterion_3_proof_identities(additive, capsys):
    worst = np.inf
    for inp in random_inputs(additive, 500, seed=303):
        d = push_forward(additive, inp)
        H = d.entropy
        for k in range(3):
            a, b = CROSS[k]
            K, A, B = k + 1, a + 1, b + 1
            gap = H([f"Y{K}"]) - H([f"S{K}"])
            y_given_a = H([f"Y{K}", f"X{A}{K}"]) - H([f"X{A}{K}"])
            y_given_b = H([f"Y{K}", f"X{B}{K}"]) - H([f"X{B}{K}"])
            worst = min(
                worst,
                H([f"X{K}{K}"]) - gap,
                (y_given_a - H([f"X{B}{K}"])) - gap,
                (y_given_b - H([f"X{A}{K}"])) - gap,
            )
    report(capsys, 3, worst >= -1e-9, f"smallest slack {worst:.3e} over 500 pmfs x 3 receivers x 3 identities")


def test_criterion_4_strong_equivalence(pairing, capsys):
    witnesses = 0
    for i, inp in enumerate(random_inputs(pairing, 100, seed=404)):
        a, b = id_region_at(pairing, inp), strong_capacity_at(pairing, inp)
        witnesses += len(inclusion_check(a, b, n=1000, seed=2 * i, tol=1e-6).witnesses)
        witnesses += len(inclusion_check(b, a, n=1000, seed=2 * i + 1, tol=1e-6).witnesses)
    report(capsys, 4, witnesses == 0, f"{witnesses} witnesses over 100 pmfs, both directions, tol 1e-6")


def test_criterion_5_gaussian_bpsk(tmp_path, capsys):
    code, secs = timed_preset("fig6", tmp_path)
    s = summary(tmp_path / "summary.txt")
    tin, idr = float(s["tin_sum_bits"]), float(s["id_sum_bits"])
    target = abs(tin - 2.51) <= 0.05 and abs(idr - 2.37) <= 0.05
    ok = (
        code == 0
        and 2.41 <= tin <= 2.61
        and 2.27 <= idr <= 2.47
        and s["tin_in_id"] == "false"
        and s["id_in_tin"] == "false"
        and int(s["tin_not_id_witnesses"]) > 0
        and int(s["id_not_tin_witnesses"]) > 0
        and secs <= 900
    )
    report(capsys, 5, ok, f"TIN {tin:.4f}, ID {idr:.4f} (target band {'met' if target else 'missed'}), witnesses "
                          f"{s['tin_not_id_witnesses']}/{s['id_not_tin_witnesses']}, {secs:.0f}s")


def test_criterion_6_noiseless_reduction(additive, capsys):
    ident = ObservationChannel.identity(additive)
    worst = 0.0
    for inp in random_inputs(additive, 50, seed=606):
        a = np.unique(np.round(corner_points(id_region_noisy_at(additive, ident, inp)), 9), axis=0)
        b = np.unique(np.round(corner_points(id_region_at(additive, inp)), 9), axis=0)
        worst = max(worst, np.inf if a.shape != b.shape else float(np.abs(a - b).max()))
    report(capsys, 6, worst <= 1e-6, f"max vertex difference {worst:.2e} over 50 pmfs")


def test_criterion_7_two_user(blackwell, capsys):
    worst, tin_fail = 0.0, 0
    for inp in random_inputs(blackwell, 50, seed=707):
        a = np.unique(np.round(corner_points(two_user_id_region_at(blackwell, inp)), 10), axis=0)
        b = np.unique(np.round(corner_points(id_region_at(blackwell, inp)), 10), axis=0)
        worst = max(worst, np.inf if a.shape != b.shape else float(np.abs(a - b).max()))
        tin_fail += not two_user_id_region_at(blackwell, inp).contains(
            corner_points(tin_region_at(blackwell, inp)), 1e-9
        ).all()
    ok = worst <= 1e-9 and tin_fail == 0
    report(capsys, 7, ok, f"max vertex difference {worst:.2e} over 50 pmfs; TIN outside ID at {tin_fail} pmfs")


def test_criterion_8_saturation_lab(tmp_path, capsys):
    code, secs = timed_preset("fig5", tmp_path)

    def rows(name):
        with open(tmp_path / name) as fh:
            return [{k: float(v) for k, v in r.items()} for r in csv.DictReader(fh)]

    def predicted(r1, r2):
        # binary adder with uniform inputs: H(B1) = H(B2) = 1, H(B) = 1.5
        return min(r1 + r2, r1 + 1, 1 + r2, 1.5)

    grid, spots = rows("exponents.csv"), rows("spots.csv")
    dev = max(abs(r["empirical"] - predicted(r["R1"], r["R2"])) for r in grid)
    spot_dev = max(abs(r["empirical"] - predicted(r["R1"], r["R2"])) for r in spots)
    pairs = sorted((r["R1"], r["R2"]) for r in spots)
    ok = (
        code == 0
        and len(grid) == 81
        and pairs == sorted([(0.5, 0.5), (2.0, 2.0), (0.2, 2.0), (2.0, 0.2)])
        and dev <= 0.2
        and spot_dev <= 0.15
        and secs <= 300
    )
    report(capsys, 8, ok, f"max |emp - pred| {dev:.4f} on the grid, {spot_dev:.4f} at the spots, {secs:.0f}s")


PROPERTY_SUITES = [
    "tests/test_prob.py::test_entropy_identities",
    "tests/test_prob.py::test_entropies_match_enumeration",
    "tests/test_region.py::test_downward_closure",
    "tests/test_region.py::test_cyclic_symmetry",
    "tests/test_noisy.py::test_terms_bounded_by_noiseless",
    "tests/test_satlab.py::test_hard_counting_bound",
    "tests/test_satlab.py::test_reproducible",
    "tests/test_search.py::test_sweep_is_deterministic",
    "tests/test_search.py::test_golden_csv",
    "tests/test_cli.py::test_sweep_outputs_and_determinism",
    "tests/test_cli.py::test_satlab_csv_reproducible",
]


def test_criterion_9_property_suites(capsys):
    res = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *PROPERTY_SUITES],
        cwd=TESTS.parent, capture_output=True, text=True,
    )
    last = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr.strip()[-200:]
    report(capsys, 9, res.returncode == 0, f"{len(PROPERTY_SUITES)} property/determinism suites: {last}")
