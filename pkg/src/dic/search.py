"""Grid sweeps over product input pmfs, corner aggregation and the figure presets."""

from __future__ import annotations

import csv
import itertools
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .channel import ChannelSpec, builtin_channel
from .errors import ResourceGuardError, UsageError
from .geometry import (
    DEDUP_TOL,
    R2_45_PLANE,
    RateRegion,
    corner_points,
    dedupe_points,
    downward_hull,
    inclusion_check,
    slice_region,
)
from .noisy import (
    ObservationChannel,
    bpsk_example,
    id_region_from_noisy,
    mutual_info_terms_batch,
    tin_region_from_noisy,
)
from .prob import ProductInput, grid_size, refine_around, simplex_grid, unit_fraction
from .region import id_region_at, strong_capacity_at, tin_region_at, two_user_id_region_at

SCHEMES = ("id", "tin", "strong", "id-noisy", "tin-noisy", "2dic-id")
NOISY = ("id-noisy", "tin-noisy")
DEFAULT_CAP = 10**6
BATCH = 2000


def thread_count(requested=None):
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("DIC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"DIC_THREADS must be an integer, got {env!r}") from exc
    return 1


@dataclass
class SweepConfig:
    spec: ChannelSpec
    scheme: str = "id"
    step: Fraction = Fraction(1, 6)
    refine_rounds: int = 2
    refine_radius: Fraction | None = None  # defaults to the parent step
    top_k: int = 5
    weights: tuple = (1.0, 1.0, 1.0)
    obs: ObservationChannel | None = None
    threads: int | None = None
    cap: int = DEFAULT_CAP
    label: str = ""

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise UsageError(f"unknown scheme {self.scheme!r}; choose from {', '.join(SCHEMES)}")
        self.step = Fraction(1, unit_fraction(self.step))
        if self.refine_rounds < 0 or self.top_k < 1:
            raise UsageError("refine_rounds must be >= 0 and top_k >= 1")
        if self.refine_radius is not None:
            self.refine_radius = Fraction(self.refine_radius)
            if self.refine_rounds and self.refine_radius < self.step / 2:
                raise UsageError("refinement radius must be at least the finer step")
        if self.scheme in NOISY and self.obs is None:
            raise UsageError(f"scheme {self.scheme} needs an observation channel")
        if self.scheme == "2dic-id" and not self.spec.is_two_user:
            raise UsageError(f"{self.spec.name} is not a two-user channel")
        if not self.label:
            self.label = self.scheme


def region_for(config, inp):
    """The scheme's per-pmf region."""
    spec, scheme = config.spec, config.scheme
    if scheme == "id":
        return id_region_at(spec, inp)
    if scheme == "tin":
        return tin_region_at(spec, inp)
    if scheme == "strong":
        return strong_capacity_at(spec, inp)
    if scheme == "2dic-id":
        return two_user_id_region_at(spec, inp)
    terms = mutual_info_terms_batch(spec, config.obs, [inp])[0]
    return id_region_from_noisy(terms) if scheme == "id-noisy" else tin_region_from_noisy(terms)


def regions_for(config, inputs):
    if config.scheme in NOISY:
        build = id_region_from_noisy if config.scheme == "id-noisy" else tin_region_from_noisy
        return [build(t) for t in mutual_info_terms_batch(config.spec, config.obs, inputs)]
    return [region_for(config, inp) for inp in inputs]


def pareto_filter(points, tol=DEDUP_TOL):
    """Drop points weakly dominated by another point (irrelevant for downward-closed unions)."""
    pts = dedupe_points(np.asarray(points, dtype=float).reshape(-1, 3))
    if len(pts) <= 1:
        return pts
    order = np.argsort(-pts.sum(axis=1), kind="stable")
    kept = []
    for i in order:
        p = pts[i]
        if kept:
            k = np.asarray(kept)
            if np.any(np.all(k >= p - tol, axis=1)):
                continue
        kept.append(p)
    return dedupe_points(np.asarray(kept))


def _corners_chunk(args):
    config, inputs = args
    return [pareto_filter(corner_points(r)) for r in regions_for(config, inputs)]


@dataclass
class AggregateRegion:
    """Union of per-pmf corner points, their provenance and the time-sharing hull."""

    label: str
    corners: np.ndarray
    provenance: list  # ProductInput per corner
    hull: RateRegion
    n_pmfs: int = 0
    stats: dict = field(default_factory=dict)

    def max_weighted(self, w=(1.0, 1.0, 1.0)):
        vals = self.corners @ np.asarray(w, dtype=float)
        i = int(np.argmax(vals))
        return float(vals[i]), self.corners[i], self.provenance[i]

    def maximizers(self, w=(1.0, 1.0, 1.0), tol=1e-9):
        vals = self.corners @ np.asarray(w, dtype=float)
        idx = np.flatnonzero(vals >= vals.max() - tol)
        return self.corners[idx], [self.provenance[i] for i in idx]


def distinct_points(points, sep):
    """Greedy subset with pairwise L-infinity distance >= ``sep``."""
    picked = []
    for p in points:
        if all(np.max(np.abs(p - q)) >= sep for q in picked):
            picked.append(p)
    return np.asarray(picked)


def _grid_inputs(spec, step):
    per_sender = [list(simplex_grid(n, step)) for n in spec.input_sizes]
    return (ProductInput(combo) for combo in itertools.product(*per_sender))


def _evaluate(config, inputs, threads):
    chunks = [inputs[i : i + BATCH] for i in range(0, len(inputs), BATCH)]
    if threads > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(threads) as pool:
            parts = list(pool.map(_corners_chunk, [(config, c) for c in chunks]))
    else:
        parts = [_corners_chunk((config, c)) for c in chunks]
    return [c for part in parts for c in part]


def sweep(config):
    """Grid sweep plus local refinement; deterministic for a given config."""
    spec = config.spec
    total = int(np.prod([grid_size(n, config.step) for n in spec.input_sizes]))
    if total > config.cap:
        raise ResourceGuardError(
            f"grid at step {config.step} has {total} product pmfs, above the cap {config.cap}"
        )
    threads = thread_count(config.threads)
    start = time.perf_counter()
    inputs = list(_grid_inputs(spec, config.step))
    corner_sets = _evaluate(config, inputs, threads)
    seen = {inp.key() for inp in inputs}
    step = config.step
    radius = config.refine_radius
    w = np.asarray(config.weights, dtype=float)
    for _ in range(config.refine_rounds):
        rad = step if radius is None else radius
        step = step / 2
        best = sorted(
            range(len(inputs)),
            key=lambda i: (-(corner_sets[i] @ w).max() if len(corner_sets[i]) else np.inf, i),
        )[: config.top_k]
        new = []
        for i in best:
            for cand in refine_around(inputs[i], float(rad), step):
                key = cand.key()
                if key not in seen:
                    seen.add(key)
                    new.append(cand)
        if len(inputs) + len(new) > config.cap:
            raise ResourceGuardError(f"refinement would exceed the cap of {config.cap} pmfs")
        corner_sets += _evaluate(config, new, threads)
        inputs += new
        radius = None if radius is None else radius / 2
    agg = aggregate(config.label, inputs, corner_sets)
    agg.stats = {"seconds": time.perf_counter() - start, "threads": threads}
    return agg


def aggregate(label, inputs, corner_sets):
    """Merge per-pmf corners; the first pmf (in evaluation order) producing a corner is its provenance."""
    pts, owner = [], []
    for i, c in enumerate(corner_sets):
        pts.append(c)
        owner.extend([i] * len(c))
    pts = np.vstack(pts) if pts else np.zeros((0, 3))
    owner = np.asarray(owner, dtype=np.int64)
    pts = np.where(np.abs(pts) < 1e-12, 0.0, pts)
    snapped = np.round(pts / DEDUP_TOL).astype(np.int64)
    _, first = np.unique(snapped, axis=0, return_index=True)
    pts, owner = pts[first], owner[first]
    keep = _global_pareto(pts)
    pts, owner = pts[keep], owner[keep]
    return AggregateRegion(label, pts, [inputs[i] for i in owner], downward_hull(pts, label), len(inputs))


def _global_pareto(pts, tol=DEDUP_TOL):
    """Indices (sorted) of points not weakly dominated by another point."""
    if len(pts) == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((-pts[:, 2], -pts[:, 1], -pts[:, 0]))
    keep = []
    front = np.zeros((0, 3))
    for i in order:
        p = pts[i]
        if len(front) and np.any(np.all(front >= p - tol, axis=1)):
            continue
        keep.append(i)
        front = np.vstack([front, p])
    return np.sort(np.asarray(keep, dtype=np.int64))


# -- comparisons -------------------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    a_in_b: bool
    b_in_a: bool
    witnesses_a_not_b: np.ndarray
    witnesses_b_not_a: np.ndarray


def _as_region(x):
    if isinstance(x, AggregateRegion):
        return x.hull
    if isinstance(x, RateRegion):
        return x
    return downward_hull(np.asarray(x, dtype=float))


def compare(a, b, n=1000, seed=0, tol=1e-9):
    """Bidirectional sampled inclusion between two regions (aggregates use their hulls)."""
    ra, rb = _as_region(a), _as_region(b)
    ab = inclusion_check(ra, rb, n, seed, tol)
    ba = inclusion_check(rb, ra, n, seed + 1, tol)
    return Comparison(ab.passed, ba.passed, ab.witnesses, ba.witnesses)


# -- file output -------------------------------------------------------------------------


def _fmt(x):
    return f"{x:.9f}"


def write_corners(agg, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["R1", "R2", "R3", "pmf"])
        for p, inp in zip(agg.corners, agg.provenance):
            w.writerow([_fmt(p[0]), _fmt(p[1]), _fmt(p[2]), inp.format()])


def write_points(points, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["R1", "R2", "R3"])
        for p in points:
            w.writerow([_fmt(v) for v in p])


def write_hull(agg, path):
    write_points(agg.hull.vertices, path)


def read_points(path):
    """Rate triples from a corners/hull CSV (columns R1,R2,R3 first)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0][:3] != ["R1", "R2", "R3"]:
        raise UsageError(f"{path}: expected a CSV with header R1,R2,R3")
    try:
        return np.array([[float(v) for v in r[:3]] for r in rows[1:]]).reshape(-1, 3)
    except ValueError as exc:
        raise UsageError(f"{path}: malformed rate value ({exc})") from exc


def write_slice_csv(slices, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "t", "s"])
        for name, sl in slices:
            for t, s in sl.polygon:
                w.writerow([name, _fmt(t), _fmt(s)])


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "dic"
    return plt


def _save_svg(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def plot_slices(slices, path, title=""):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    styles = [dict(fc="0.8", ec="0.3", lw=1.0), dict(fc="none", ec="k", ls="--", lw=1.5)]
    for (name, sl), style in zip(slices, itertools.cycle(styles)):
        if len(sl.polygon) >= 3:
            ax.add_patch(plt.Polygon(sl.polygon, closed=True, label=name, **style))
    ax.autoscale_view()
    ax.set_xlabel("(R1 + R3)/sqrt(2)")
    ax.set_ylabel("R2")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right")
    _save_svg(fig, path)
    plt.close(fig)


def write_summary(fields, path):
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in fields))


# -- presets ----------------------------------------------------------------------------


def _coords(p):
    return ",".join(f"{v:.3f}" for v in p)


def _sweep_outputs(agg, out, prefix):
    write_corners(agg, out / f"{prefix}_corners.csv")
    write_hull(agg, out / f"{prefix}_hull.csv")


def _slice_pair(aggs, out, title):
    slices = [(a.label, slice_region(a.hull, *R2_45_PLANE, resolution=150)) for a in aggs]
    write_slice_csv(slices, out / "slice.csv")
    plot_slices(slices, out / "slice.svg", title)


SUM_TOL = 0.01


def preset_fig4(out, threads=None, seed=0):
    spec = builtin_channel("additive3dic")
    tin = sweep(SweepConfig(spec, "tin", Fraction(1, 6), threads=threads, label="TIN"))
    idr = sweep(SweepConfig(spec, "id", Fraction(1, 6), threads=threads, label="ID"))
    for agg, prefix in ((tin, "tin"), (idr, "id")):
        _sweep_outputs(agg, out, prefix)
    _slice_pair([tin, idr], out, "additive 3-DIC, R2/45-degree plane")
    cmp = compare(tin, idr, seed=seed)
    tin_sum, tin_arg, tin_pmf = tin.max_weighted()
    id_sum, _, _ = idr.max_weighted()
    # near-maximal corners: refinement approaches the sum-3 face from below
    id_max, _ = idr.maximizers(tol=SUM_TOL)
    distinct = distinct_points(id_max, 0.05)
    witness = cmp.witnesses_b_not_a[0] if len(cmp.witnesses_b_not_a) else None
    fields = [
        ("preset", "fig4"),
        ("tin_sum", f"{tin_sum:.3f}"),
        ("tin_argmax", _coords(tin_arg)),
        ("tin_argmax_pmf", tin_pmf.format()),
        ("id_sum", f"{id_sum:.3f}"),
        ("id_sum_bits", f"{id_sum:.6f}"),
        ("id_near_max_tol", SUM_TOL),
        ("id_near_max_corners", len(id_max)),
        ("id_near_max_distinct", len(distinct)),
        ("id_max_examples", ";".join(_coords(p) for p in distinct[:5])),
        ("tin_in_id", str(cmp.a_in_b).lower()),
        ("id_in_tin", str(cmp.b_in_a).lower()),
        ("id_not_tin_witness", _coords(witness) if witness is not None else "none"),
        ("pmfs", idr.n_pmfs),
    ]
    write_summary(fields, out / "summary.txt")
    return dict(tin=tin, id=idr, compare=cmp, fields=fields)


def bpsk_setup(sigma2=0.1):
    return bpsk_example().to_channel_spec(), ObservationChannel.gaussian(sigma2)


def preset_fig6(out, threads=None, seed=0):
    spec, obs = bpsk_setup()
    kw = dict(refine_rounds=2, obs=obs, threads=threads)
    tin = sweep(SweepConfig(spec, "tin-noisy", Fraction(1, 40), label="TIN", **kw))
    idr = sweep(SweepConfig(spec, "id-noisy", Fraction(1, 40), label="ID", **kw))
    for agg, prefix in ((tin, "tin"), (idr, "id")):
        _sweep_outputs(agg, out, prefix)
    _slice_pair([tin, idr], out, "Gaussian BPSK, sigma^2 = 0.1")
    cmp = compare(tin, idr, seed=seed)
    tin_sum, tin_arg, tin_pmf = tin.max_weighted()
    id_sum, id_arg, id_pmf = idr.max_weighted()
    fields = [
        ("preset", "fig6"),
        ("tin_sum", f"{tin_sum:.2f}"),
        ("id_sum", f"{id_sum:.2f}"),
        ("tin_sum_bits", f"{tin_sum:.6f}"),
        ("id_sum_bits", f"{id_sum:.6f}"),
        ("tin_argmax", _coords(tin_arg)),
        ("id_argmax", _coords(id_arg)),
        ("tin_argmax_pmf", tin_pmf.format()),
        ("id_argmax_pmf", id_pmf.format()),
        ("tin_in_id", str(cmp.a_in_b).lower()),
        ("id_in_tin", str(cmp.b_in_a).lower()),
        ("tin_not_id_witnesses", len(cmp.witnesses_a_not_b)),
        ("id_not_tin_witnesses", len(cmp.witnesses_b_not_a)),
        ("pmfs", idr.n_pmfs),
    ]
    write_summary(fields, out / "summary.txt")
    return dict(tin=tin, id=idr, compare=cmp, fields=fields)


def preset_fig7b(out, threads=None, seed=0):
    spec = builtin_channel("blackwell2dic")
    tin = sweep(SweepConfig(spec, "tin", Fraction(1, 12), threads=threads, label="TIN"))
    idr = sweep(SweepConfig(spec, "2dic-id", Fraction(1, 12), threads=threads, label="ID"))
    for agg, prefix in ((tin, "tin"), (idr, "id")):
        _sweep_outputs(agg, out, prefix)
    per_pmf = all(
        two_user_id_region_at(spec, inp).contains(corner_points(tin_region_at(spec, inp))).all()
        for inp in _grid_inputs(spec, Fraction(1, 12))
    )
    cmp = compare(tin, idr, seed=seed)
    plot_region_2d([tin, idr], out / "region.svg", "Blackwell 2-DIC")
    fields = [
        ("preset", "fig7b"),
        ("tin_sum", f"{tin.max_weighted()[0]:.4f}"),
        ("id_sum", f"{idr.max_weighted()[0]:.4f}"),
        ("tin_subset_id_per_pmf", str(per_pmf).lower()),
        ("tin_in_id", str(cmp.a_in_b).lower()),
        ("id_in_tin", str(cmp.b_in_a).lower()),
        ("pmfs", idr.n_pmfs),
    ]
    write_summary(fields, out / "summary.txt")
    return dict(tin=tin, id=idr, compare=cmp, fields=fields)


def plot_region_2d(aggs, path, title=""):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.5, 4))
    for agg, style in zip(aggs, [dict(fc="0.8", ec="0.3"), dict(fc="none", ec="k", ls="--", lw=1.5)]):
        pts = agg.hull.vertices[:, :2]
        # close the downward-closed set with the axis projections; 2-D hull vertices come counterclockwise
        pts = np.vstack([pts, pts * [1, 0], pts * [0, 1]])
        poly = pts[ConvexHull(pts).vertices]
        ax.add_patch(plt.Polygon(poly, closed=True, label=agg.label, **style))
    ax.autoscale_view()
    ax.set_xlabel("R1")
    ax.set_ylabel("R2")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right")
    _save_svg(fig, path)
    plt.close(fig)


FIG5_SPOTS = ((0.5, 0.5), (2.0, 2.0), (0.2, 2.0), (2.0, 0.2))


def preset_fig5(out, threads=None, seed=0, n=14, trials=20):
    from .satlab import adder_mac, rate_grid, sweep_exponent_map, write_exponent_csv

    mac = adder_mac()
    rates = rate_grid(2.0, 0.25)
    rows = sweep_exponent_map(mac, rates, rates, n, trials, seed)
    write_exponent_csv(rows, out / "exponents.csv")
    plot_exponents(rows, out / "exponents.svg")
    # (0.2, 2) and (2, 0.2) sit off the quarter grid
    spots = [r for pair in FIG5_SPOTS for r in sweep_exponent_map(mac, [pair[0]], [pair[1]], n, trials, seed)]
    write_exponent_csv(spots, out / "spots.csv")
    fields = [
        ("preset", "fig5"),
        ("n", n),
        ("trials", trials),
        ("seed", seed),
        ("max_deviation", f"{max(r.deviation for r in rows):.4f}"),
        ("max_spot_deviation", f"{max(r.deviation for r in spots):.4f}"),
    ]
    fields += [(f"spot_{r.R1:g}_{r.R2:g}", f"{r.predicted:.4f},{r.empirical:.4f}") for r in spots]
    write_summary(fields, out / "summary.txt")
    return dict(rows=rows, fields=fields)


def plot_exponents(rows, path):
    plt = _pyplot()
    r1 = sorted({r.R1 for r in rows})
    r2 = sorted({r.R2 for r in rows})
    grid = np.full((len(r2), len(r1)), np.nan)
    for r in rows:
        grid[r2.index(r.R2), r1.index(r.R1)] = r.empirical
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(grid, origin="lower", extent=(r1[0], r1[-1], r2[0], r2[-1]), cmap="Greys")
    fig.colorbar(im, ax=ax, label="(1/n) log2 #outputs")
    ax.set_xlabel("R1")
    ax.set_ylabel("R2")
    _save_svg(fig, path)
    plt.close(fig)


PRESETS = {"fig4": preset_fig4, "fig6": preset_fig6, "fig7b": preset_fig7b, "fig5": preset_fig5}


def run_preset(name, out, threads=None, seed=0):
    if name not in PRESETS:
        raise UsageError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return PRESETS[name](out, threads=threads, seed=seed)
