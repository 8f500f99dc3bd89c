"""Command-line entry point ``dic``.

Exit codes: 0 ok, 1 validation or assertion failure, 2 usage error,
3 resource guard.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .channel import BUILTINS, builtin_channel, full_report, load_spec_document, spec_from_dict, validate_spec
from .errors import AccuracyError, PreconditionError, ResourceGuardError, SpecError, UsageError
from .geometry import R2_45_PLANE, corner_points, downward_hull, max_weighted_sum, slice_region
from .noisy import GaussianNetSpec, ObservationChannel
from .prob import ProductInput, parse_pmf, push_forward

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_GUARD = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# -- spec files ---------------------------------------------------------------------------


def _observation(doc, spec):
    obs = doc.get("observation")
    if obs is None:
        return None
    kind = obs.get("kind")
    if kind == "gaussian":
        return ObservationChannel.gaussian(obs["sigma2"])
    if kind == "identity":
        return ObservationChannel.identity(spec)
    if kind == "discrete":
        return ObservationChannel("discrete", tuple(obs["matrices"]))
    raise SpecError(f"unknown observation kind {kind!r}")


def load_channel(ref):
    """Resolve ``ref`` as a file, the same with ``.json`` appended, or a built-in name.

    Returns ``(spec, observation or None)``.
    """
    path = Path(ref)
    for cand in (path, path.with_name(path.name + ".json")):
        if cand.is_file():
            doc = load_spec_document(cand)
            if "gaussian" in doc:
                g = doc["gaussian"]
                spec = GaussianNetSpec(g["gains"], tuple(g["alphabets"]), doc.get("name", "gaussian")).to_channel_spec()
            else:
                spec = spec_from_dict(doc)
            validate_spec(spec)
            return spec, _observation(doc, spec)
    name = path.name
    if name.endswith(".json"):
        name = name[:-5]
    if name in BUILTINS and name != "finite-field":
        return builtin_channel(name), None
    raise UsageError(f"no spec file or built-in channel named {ref!r}")


def _obs_for(args, spec, obs):
    if getattr(args, "sigma2", None) is not None:
        return ObservationChannel.gaussian(args.sigma2)
    if obs is None and args.scheme in ("id-noisy", "tin-noisy"):
        if spec.y_values is None:
            return ObservationChannel.identity(spec)
        raise UsageError("noisy scheme needs --sigma2 or an observation section in the spec file")
    return obs


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- subcommands --------------------------------------------------------------------------


def cmd_validate(args):
    spec, _ = load_channel(args.spec)
    report = full_report(spec, n_samples=args.samples, seed=args.seed)
    print(report.format_table())
    return EXIT_OK if report.passed else EXIT_FAIL


SIGNALS = ["X1", "X2", "X3"] + [f"X{l}{k}" for l in (1, 2, 3) for k in (1, 2, 3)] + ["S1", "S2", "S3", "Y1", "Y2", "Y3"]


def cmd_dist(args):
    spec, _ = load_channel(args.spec)
    inp = parse_pmf(args.pmf, spec.input_sizes)
    dist = push_forward(spec, inp)
    variables = args.vars.split(",") if args.vars else SIGNALS
    rows = []
    for var in variables:
        if var not in spec.signal_tables:
            raise UsageError(f"unknown signal {var!r}")
        p = dist.marginal(var)
        print(f"H({var}) = {dist.entropy([var]):.6f}  P = [{', '.join(f'{v:.4f}' for v in p)}]")
        rows.extend([var, i, f"{v:.12f}"] for i, v in enumerate(p))
    if args.out:
        _write_rows(args.out, ["signal", "symbol", "prob"], rows)
    return EXIT_OK


def _region(args, spec, obs, inp):
    from .search import SweepConfig, region_for

    cfg = SweepConfig(spec, args.scheme, obs=_obs_for(args, spec, obs))
    return region_for(cfg, inp)


def cmd_region(args):
    spec, obs = load_channel(args.spec)
    inp = parse_pmf(args.pmf, spec.input_sizes) if args.pmf else ProductInput.uniform(spec.input_sizes)
    region = _region(args, spec, obs, inp)
    v = corner_points(region)
    best = max_weighted_sum(region, [1, 1, 1])
    print(f"{region.label} at {inp.format()}: {len(v)} vertices, max sum rate {best.value:.6f} at "
          f"({', '.join(f'{x:.4f}' for x in best.argmax)})")
    if args.out:
        from .search import write_points

        write_points(v, args.out)
    return EXIT_OK


def cmd_sweep(args):
    from .search import SweepConfig, sweep, write_corners, write_hull, write_summary

    spec, obs = load_channel(args.spec)
    cfg = SweepConfig(
        spec, args.scheme, args.step, refine_rounds=args.refine, top_k=args.top_k,
        obs=_obs_for(args, spec, obs), threads=args.threads, cap=args.cap,
    )
    agg = sweep(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_corners(agg, out / "corners.csv")
    write_hull(agg, out / "hull.csv")
    total, arg, pmf = agg.max_weighted()
    write_summary(
        [("spec", spec.name), ("scheme", args.scheme), ("step", args.step), ("pmfs", agg.n_pmfs),
         ("corners", len(agg.corners)), ("max_sum", f"{total:.6f}"),
         ("argmax", ",".join(f"{x:.6f}" for x in arg)), ("argmax_pmf", pmf.format())],
        out / "summary.txt",
    )
    print(f"{spec.name} {args.scheme}: {agg.n_pmfs} pmfs, {len(agg.corners)} corners, max sum rate {total:.6f}")
    return EXIT_OK


def cmd_compare(args):
    from .search import compare, read_points

    a, b = read_points(args.a), read_points(args.b)
    res = compare(a, b, n=args.samples, seed=args.seed, tol=args.tol)
    print(f"A in B: {res.a_in_b} ({len(res.witnesses_a_not_b)} witnesses)")
    print(f"B in A: {res.b_in_a} ({len(res.witnesses_b_not_a)} witnesses)")
    for name, wit in (("A not B", res.witnesses_a_not_b), ("B not A", res.witnesses_b_not_a)):
        if len(wit):
            print(f"  {name} e.g. ({', '.join(f'{x:.4f}' for x in wit[0])})")
    expected = {
        "a-in-b": res.a_in_b, "b-in-a": res.b_in_a, "equal": res.a_in_b and res.b_in_a,
        "neither": not res.a_in_b and not res.b_in_a, None: True,
    }[args.expect]
    return EXIT_OK if expected else EXIT_FAIL


def cmd_slice(args):
    from .search import plot_slices, read_points, write_slice_csv

    slices = []
    for path in args.csv:
        region = downward_hull(read_points(path), Path(path).stem)
        slices.append((Path(path).stem, slice_region(region, *R2_45_PLANE, resolution=args.resolution)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_slice_csv(slices, out / "slice.csv")
    plot_slices(slices, out / "slice.svg")
    for name, sl in slices:
        print(f"{name}: {len(sl.polygon)} polygon vertices")
    return EXIT_OK


def cmd_satlab(args):
    from .satlab import (
        MacExperiment,
        builtin_mac,
        empirical_exponent,
        predicted_exponent,
        rate_grid,
        sweep_exponent_map,
        write_exponent_csv,
    )

    mac = builtin_mac(args.mac)
    if args.grid:
        rates = rate_grid(2.0, 0.25)
        rows = sweep_exponent_map(mac, rates, rates, args.n, args.trials, args.seed)
        if args.out:
            write_exponent_csv(rows, args.out)
        print(f"{len(rows)} rate pairs, max |empirical - predicted| = {max(r.deviation for r in rows):.4f}")
        return EXIT_OK
    exp = MacExperiment(mac, args.R1, args.R2, args.n, args.trials, args.seed)
    pred = predicted_exponent(exp)
    est = empirical_exponent(exp)
    print(f"predicted {pred:.4f}")
    print(f"empirical {est}")
    if args.out:
        from .satlab import ExponentRow

        write_exponent_csv([ExponentRow(args.R1, args.R2, pred, est.value, est.stddev)], args.out)
    return EXIT_OK


def cmd_preset(args):
    from .search import run_preset

    out = Path(args.out) if args.out else Path("out") / args.name
    run_preset(args.name, out, threads=args.threads, seed=args.seed)
    print((out / "summary.txt").read_text(), end="")
    return EXIT_OK


def build_parser():
    from .search import DEFAULT_CAP, PRESETS, SCHEMES

    p = _Parser(prog="dic", description="Rate regions of three-user-pair deterministic interference channels.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", help="structural checks of a channel spec")
    s.add_argument("spec")
    s.add_argument("--samples", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("dist", help="signal marginals and entropies at a product pmf")
    s.add_argument("spec")
    s.add_argument("pmf", help='e.g. "1/2,0,1/2;1/3,1/3,1/3;1,0,0"')
    s.add_argument("--vars", help="comma-separated signals (default all)")
    s.add_argument("--out", help="CSV table of the marginals")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_dist)

    s = sub.add_parser("region", help="per-pmf region vertices")
    s.add_argument("--spec", required=True)
    s.add_argument("--scheme", choices=SCHEMES, default="id")
    s.add_argument("--pmf", help="product pmf (default uniform)")
    s.add_argument("--sigma2", type=float)
    s.add_argument("--out", help="vertex CSV")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_region)

    s = sub.add_parser("sweep", help="grid sweep with corner aggregation")
    s.add_argument("--spec", required=True)
    s.add_argument("--scheme", choices=SCHEMES, default="id")
    s.add_argument("--step", default="1/6")
    s.add_argument("--refine", type=int, default=2, help="refinement rounds")
    s.add_argument("--top-k", type=int, default=5)
    s.add_argument("--sigma2", type=float)
    s.add_argument("--threads", type=int)
    s.add_argument("--cap", type=int, default=DEFAULT_CAP)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("compare", help="bidirectional inclusion of two corner/hull CSVs")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--expect", choices=["a-in-b", "b-in-a", "equal", "neither"])
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("slice", help="R2/45-degree plane slices of corner/hull CSVs")
    s.add_argument("csv", nargs="+")
    s.add_argument("--resolution", type=int, default=150)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_slice)

    s = sub.add_parser("satlab", help="distinct-output counting through a deterministic MAC")
    s.add_argument("--mac", default="adder")
    s.add_argument("--R1", type=float, default=0.5)
    s.add_argument("--R2", type=float, default=0.5)
    s.add_argument("--n", type=int, default=14)
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--grid", action="store_true", help="sweep the rate grid {0, 0.25, ..., 2}^2")
    s.add_argument("--out", help="CSV output")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_satlab)

    s = sub.add_parser("preset", help="pinned experiments behind the figures")
    s.add_argument("name", choices=sorted(PRESETS))
    s.add_argument("--out")
    s.add_argument("--threads", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_preset)
    return p


def run(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"dic: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceGuardError as exc:
        print(f"dic: resource guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (SpecError, PreconditionError, AccuracyError) as exc:
        print(f"dic: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main(argv=None):
    sys.exit(run(argv))
