"""``sfc`` command line: measures, Table 1 reproduction, packing and rendering.

Exit codes: 0 success, 1 domain error (unsupported combination, bad curve
file, failed tiling), 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from multiprocessing import Pool
from pathlib import Path

from . import curves
from .curves import FractalTile, ScanningOrder, TilingError, UnsupportedError, builtin, serpentine
from .exact import ParseError, to_float
from .measures import WORST_CASE, MeasureId
from .packer import layout_json, normalize_points, pack_blocks, read_points_csv, simulate_queries, sort_points
from .probe import MeasureInterval, compute_worst
from .sampling import estimate_averages

TABLE_ROWS = (
    "sierpinski-knopp", "balanced-gp", "gp", "serpentine-011010110", "luxburg2", "meurthe",
    "coil", "hilbert", "beta-omega", "z-order", "gosper",
)
TABLE_COLUMNS = (
    MeasureId.WL_INF, MeasureId.WL2, MeasureId.WL1, MeasureId.WBA, MeasureId.ABA, MeasureId.WBP,
    MeasureId.ABP, MeasureId.WOA, MeasureId.AOA, MeasureId.WOP, MeasureId.AD_INF,
)


class DomainError(Exception):
    pass


# -- helpers ------------------------------------------------------------------------

def _load(args) -> ScanningOrder:
    if getattr(args, "file", None):
        try:
            return curves.parse_curve_file(Path(args.file).read_text())
        except OSError as e:
            raise DomainError(f"cannot read {args.file}: {e.strerror}") from None
    if not args.curve:
        raise DomainError("give --curve NAME or --file PATH")
    return _named(args.curve)


def _named(name: str) -> ScanningOrder:
    if name.startswith("serpentine-") and name not in curves.BUILTIN_NAMES:
        return serpentine(name[len("serpentine-"):])
    return builtin(name)


def _measure(text: str) -> MeasureId:
    try:
        return MeasureId.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _emit(args, text: str):
    if getattr(args, "output", None):
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _add_curve(p):
    p.add_argument("--curve", help="builtin curve name, or serpentine-XXXXXXXXX")
    p.add_argument("--file", help="curve file in .sfc format")


# -- subcommands ----------------------------------------------------------------------

def cmd_list_curves(args):
    rows = []
    for name in curves.BUILTIN_NAMES:
        o = builtin(name)
        rows.append({"name": name, "description": o.description, "rules": len(o.rules)})
    if args.format == "json":
        _emit(args, _dumps(rows))
    else:
        _emit(args, "".join(f"{r['name']:<22} {r['description']}\n" for r in rows))


def cmd_validate(args):
    order = _load(args)
    failed = False
    out = []
    for depth in range(1, args.depth + 1):
        report = curves.validate(order, depth)
        out.append(f"depth {depth}: {report}")
        failed |= not report.ok
    _emit(args, "\n".join(out) + "\n")
    return 1 if failed else 0


def _worst(order, measure, args) -> MeasureInterval:
    return compute_worst(order, measure, gap=args.gap, max_probes=args.max_probes,
                         time_limit=args.time_limit)


def cmd_measure_worst(args):
    if not args.measure.is_worst_case:
        raise DomainError(f"{args.measure.value} is an average measure; use measure-avg")
    res = _worst(_load(args), args.measure, args)
    if args.format == "json":
        _emit(args, _dumps(res.to_json()))
    else:
        _emit(args, f"{res.curve} {res.measure}: [{res.to_json()['lower']}, {res.to_json()['upper']}]\n")


def cmd_measure_avg(args):
    if args.measure.is_worst_case:
        raise DomainError(f"{args.measure.value} is a worst-case measure; use measure-worst")
    est = estimate_averages(_load(args), [args.measure], args.samples, args.m_min, args.m_max,
                            args.seed, args.tol)[args.measure]
    if args.format == "json":
        _emit(args, _dumps(est.to_json()))
    else:
        _emit(args, f"{est.curve} {est.measure.value}: {est.mean:.4f} (sd {est.stddev:.4f})\n")


def _cell_worst(res: MeasureInterval) -> str:
    if res.unbounded_suspected:
        return "inf"
    return f"{res.to_json()['lower']:.4f}..{res.to_json()['upper']:.4f}"


def table1_rows(rows, gap: float, samples: int, seed: int, averages: bool = True,
                time_limit: float | None = None, m_min: int = 500, m_max: int = 18000):
    """Yield ``(curve, {column: cell text})`` for the Table 1 layout."""
    for name in rows:
        order = builtin(name)
        cells = {}
        for m in TABLE_COLUMNS:
            if not m.is_worst_case:
                continue
            try:
                res = compute_worst(order, m, gap=gap, time_limit=time_limit)
                cells[m] = _cell_worst(res)
                for k, (lo, hi) in res.derived.items():
                    cells[MeasureId(k)] = f"{math.floor(to_float(lo) * 1e4) / 1e4:.4f}.." \
                                          f"{math.ceil(to_float(hi) * 1e4) / 1e4:.4f}"
            except UnsupportedError:
                cells.setdefault(m, "n/a")
            except Exception as e:  # a failing cell must not abort the table
                cells.setdefault(m, f"error: {e}")
        if averages:
            avg = [m for m in TABLE_COLUMNS if not m.is_worst_case]
            try:
                est = estimate_averages(order, avg, samples, m_min, m_max, seed)
                for m, e in est.items():
                    cells[m] = f"{e.mean:.3f}±{e.stddev:.3f}"
            except UnsupportedError:
                for m in avg:
                    cells[m] = "n/a"
        yield name, cells


def cmd_table1(args):
    rows = args.curves.split(",") if args.curves else TABLE_ROWS
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["curve"] + [m.value for m in TABLE_COLUMNS])
    for name, cells in table1_rows(rows, args.gap, args.samples, args.seed, not args.no_averages,
                                   args.time_limit):
        w.writerow([name] + [cells.get(m, "") for m in TABLE_COLUMNS])
        if not args.output:
            sys.stdout.write(buf.getvalue())
            sys.stdout.flush()
            buf.seek(0)
            buf.truncate()
    if args.output:
        Path(args.output).write_text(buf.getvalue())


def serpentine_codes() -> list:
    """The 272 serpentine codes, one per pair of codes related by reversal."""
    codes = (format(i, "09b") for i in range(512))
    return [c for c in codes if c <= c[::-1]]


def _sweep_one(job):
    name, measures, gap = job
    order = _named(name)
    return name, [(r.lower_f, r.upper_f) for r in (compute_worst(order, m, gap=gap) for m in measures)]


def dominant(results: dict, tol: float) -> list:
    """Names not dominated by any other entry; values are ``[(lower, upper), ...]``.

    Values within ``tol`` of each other count as equal.
    """
    mids = {k: [(lo + hi) / 2 for lo, hi in v] for k, v in results.items()}
    out = []
    for b, vb in mids.items():
        beaten = False
        for a, va in mids.items():
            if a == b:
                continue
            if all(x <= y + tol for x, y in zip(va, vb)) and any(x < y - tol for x, y in zip(va, vb)):
                beaten = True
                break
        if not beaten:
            out.append(b)
    return out


def cmd_sweep_serpentine(args):
    measures = [MeasureId.parse(m) for m in args.measures.split(",")] if args.measures else list(WORST_CASE)
    names = [f"serpentine-{c}" for c in serpentine_codes()]
    extra = [] if args.no_reference else ["hilbert", "r-order"]
    jobs = [(n, measures, args.gap) for n in names + extra]
    if args.jobs > 1:
        with Pool(args.jobs) as pool:
            results = dict(pool.map(_sweep_one, jobs, chunksize=4))
    else:
        results = dict(map(_sweep_one, jobs))
    dom = dominant(results, 2 * args.gap)
    dom_codes = sorted(n[len("serpentine-"):] for n in dom if n.startswith("serpentine-"))
    if args.format == "json":
        _emit(args, _dumps({
            "measures": [m.value for m in measures],
            "gap": args.gap,
            "results": {k: [[round(lo, 4), round(hi, 4)] for lo, hi in v] for k, v in results.items()},
            "dominant": sorted(dom),
            "dominant_serpentine_codes": dom_codes,
        }))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["curve"] + [m.value for m in measures])
        for k, v in results.items():
            w.writerow([k] + [f"{(lo + hi) / 2:.4f}" for lo, hi in v])
        buf.write(f"# dominant: {' '.join(sorted(dom))}\n")
        _emit(args, buf.getvalue())


def _points(args, order):
    try:
        text = Path(args.input).read_text() if args.input != "-" else sys.stdin.read()
    except OSError as e:
        raise DomainError(f"cannot read {args.input}: {e.strerror}") from None
    pts = read_points_csv(text)
    return pts if args.no_normalize else normalize_points(order, pts)


def cmd_sort(args):
    order = _load(args)
    perm = sort_points(order, _points(args, order), args.max_depth)
    if args.format == "json":
        _emit(args, _dumps(perm))
    else:
        _emit(args, "".join(f"{i}\n" for i in perm))


def cmd_pack(args):
    order = _load(args)
    layout = pack_blocks(order, _points(args, order), args.block_size, args.max_depth)
    _emit(args, _dumps(layout_json(layout)))


def cmd_simulate(args):
    order = _load(args)
    layout = pack_blocks(order, _points(args, order), args.block_size, args.max_depth)
    stats = simulate_queries(layout, args.kind, args.count, args.seed)
    out = stats.to_json()
    out["total_area"] = float(layout.total_area)
    out["total_perimeter"] = float(layout.total_perimeter)
    _emit(args, _dumps(out))


def render_svg(order: ScanningOrder, depth: int, size: int = 512, budget: int = 1 << 20) -> str:
    """SVG document with the depth-``depth`` polyline and the unit region's outline."""
    pts = [(to_float(x), to_float(y)) for x, y in curves.polyline(order, depth, budget)]
    outline = [(to_float(x), to_float(y)) for x, y in order.unit.vertices]
    xs = [p[0] for p in outline + pts]
    ys = [p[1] for p in outline + pts]
    x0, y0 = min(xs), min(ys)
    scale = (size - 20) / max(max(xs) - x0, max(ys) - y0)

    def fmt(p):
        return f"{10 + (p[0] - x0) * scale:.3f},{size - 10 - (p[1] - y0) * scale:.3f}"

    kind = "box" if isinstance(order.unit, FractalTile) else "unit"
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">\n'
        f'<polygon class="{kind}" fill="none" stroke="#999" points="{" ".join(map(fmt, outline))}"/>\n'
        f'<polyline fill="none" stroke="#000" points="{" ".join(map(fmt, pts))}"/>\n'
        "</svg>\n"
    )


def cmd_render(args):
    _emit(args, render_svg(_load(args), args.depth, args.size))


# -- parser ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sfc", description="Locality and bounding-box measures of scanning orders.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("list-curves", help="list builtin curves")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.add_argument("--output")
    s.set_defaults(func=cmd_list_curves)

    s = sub.add_parser("validate", help="check that a curve's rules tile the unit region")
    _add_curve(s)
    s.add_argument("--depth", type=int, default=1, choices=(1, 2, 3))
    s.add_argument("--output")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("measure-worst", help="certified interval for a worst-case measure")
    _add_curve(s)
    s.add_argument("--measure", type=_measure, required=True)
    s.add_argument("--gap", type=float, default=1e-3)
    s.add_argument("--max-probes", type=int, default=2_000_000)
    s.add_argument("--time-limit", type=float, help="seconds")
    s.add_argument("--format", choices=("json", "text"), default="json")
    s.add_argument("--output")
    s.set_defaults(func=cmd_measure_worst)

    s = sub.add_parser("measure-avg", help="estimate an average measure by random subdivisions")
    _add_curve(s)
    s.add_argument("--measure", type=_measure, required=True)
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--m-min", type=int, default=500)
    s.add_argument("--m-max", type=int, default=18000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--format", choices=("json", "text"), default="json")
    s.add_argument("--output")
    s.set_defaults(func=cmd_measure_avg)

    s = sub.add_parser("table1", help="all measures for the builtin curves, as CSV")
    s.add_argument("--gap", type=float, default=1e-3)
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--curves", help="comma-separated subset of rows")
    s.add_argument("--no-averages", action="store_true")
    s.add_argument("--time-limit", type=float, help="seconds per worst-case cell")
    s.add_argument("--output")
    s.set_defaults(func=cmd_table1)

    s = sub.add_parser("sweep-serpentine", help="all 272 serpentine codes and their non-dominated set")
    s.add_argument("--gap", type=float, default=1e-2)
    s.add_argument("--measures", help="comma-separated; default all worst-case measures")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--no-reference", action="store_true", help="leave out Hilbert and R-order")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--output")
    s.set_defaults(func=cmd_sweep_serpentine)

    for name, func, helptext in (
        ("sort", cmd_sort, "print the scanning-order permutation of CSV points"),
        ("pack", cmd_pack, "pack CSV points into blocks of B consecutive points"),
        ("simulate", cmd_simulate, "average number of blocks hit by random queries"),
    ):
        s = sub.add_parser(name, help=helptext,
                           description="Points are mapped onto the unit region by one uniform scale and "
                                       "a shift unless --no-normalize is given.")
        _add_curve(s)
        s.add_argument("--input", required=True, help="CSV file with x,y columns, or - for stdin")
        s.add_argument("--no-normalize", action="store_true")
        s.add_argument("--max-depth", type=int, default=64)
        s.add_argument("--output")
        if name == "sort":
            s.add_argument("--format", choices=("text", "json"), default="text")
        else:
            s.add_argument("--block-size", "-B", type=int, required=True)
        if name == "simulate":
            s.add_argument("--kind", choices=("point", "line"), default="point")
            s.add_argument("--count", type=int, default=10000)
            s.add_argument("--seed", type=int, default=0)
        s.set_defaults(func=func)

    s = sub.add_parser("render", help="SVG of the curve's polyline at a given depth")
    _add_curve(s)
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--size", type=int, default=512)
    s.add_argument("--output")
    s.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except TilingError as e:
        print(f"sfc: tiling check failed\n{e.report}", file=sys.stderr)
        return 1
    except (DomainError, UnsupportedError, ParseError, KeyError, ValueError, curves.BudgetError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"sfc: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
