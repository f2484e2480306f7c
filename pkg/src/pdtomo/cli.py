"""``pdtomo`` command line: generate, enumerate, analyze, demo.

Exit codes: 0 success, 2 bad flags or input, 3 conditioning trouble
(device resampling gave up, or some scheme's corners could not be inverted).
"""
import argparse
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import io as pdio
from .errors import ConditioningFailure, IllConditioned, InsufficientSettings, PDTomoError
from .linalg import KAPPA_MAX
from .model import CorrelationConfig, add_shot_noise, random_devices, synthesize
from .pd import default_threshold, partial_determinant, reduced_pd, reduced_pd_score
from .schemes import build_square, enumerate_schemes, parse, sensitivity, sweep_shape

EXIT_OK, EXIT_USAGE, EXIT_CONDITIONING = 0, 2, 3
REPORT_FORMAT = "pdtomo-report-v1"


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        values = [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("setting counts must be positive")
    return values


def _resolve_seed(seed):
    env = os.environ.get("PDTOMO_SEED")
    if env is None:
        return seed
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"PDTOMO_SEED must be an integer, got {env!r}") from None


# ---------------------------------------------------------------------------
# generate


def generate_tensor(m, d, settings, correlation, epsilon, seed, shots=None):
    if settings is None:
        settings = list(sweep_shape(m, d, range(1, m + 1)))
    if len(settings) != m + 1:
        raise UsageError(f"--settings needs N plus one count per qudit ({m + 1} values), got {len(settings)}")
    try:
        config = CorrelationConfig.parse(correlation, strength=epsilon, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if config.kind != "none" and max(config.qudits) > m:
        raise UsageError(f"correlation {config.label} refers to a qudit outside 1..{m}")
    state, meas = random_devices(m, d, settings[0], settings[1:], seed)
    tensor = synthesize(state, meas, config)
    tensor.provenance["seed"] = seed
    if shots is not None:
        tensor = add_shot_noise(tensor, shots, seed)
    return tensor


def cmd_generate(args):
    seed = _resolve_seed(args.seed)
    if args.d < 2:
        raise UsageError("--d must be at least 2")
    if args.shots is not None and args.shots < 1:
        raise UsageError("--shots must be at least 1")
    tensor = generate_tensor(args.m, args.d, args.settings, args.correlation, args.epsilon, seed, args.shots)
    pdio.save_tensor(tensor, args.output)
    if args.output not in (None, "-"):
        print(f"wrote tensor of shape {list(tensor.shape)} to {args.output}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# enumerate


def cmd_enumerate(args):
    report = enumerate_schemes(args.m, args.d, args.k)
    if args.json:
        doc = {
            "m": report.m, "d": report.d, "k": report.k, "total": report.total,
            "schemes": [s.text for s in report.variants],
            "corners": [c.bracket for c in report.corners],
            "table": [[sq.bracket if sq else None for sq in row] for row in report.table],
            "counts": report.counts,
            "symmetries": report.symmetries,
        }
        sys.stdout.write(pdio.dumps(doc))
    elif args.table:
        width = max(len(sq.bracket) for sq in report.squares) + 6
        for corner, row in zip(report.corners, report.table):
            cells = []
            for sq in row:
                if sq is None:
                    cells.append("")
                else:
                    mark = "*" * len(report.symmetries.get(sq.bracket, []))
                    cells.append(f"{sq.bracket}{mark} ({report.counts[sq.bracket]})")
            print(f"{corner.bracket:<{width - 6}} | " + "".join(f"{c:<{width + 2}}" for c in cells).rstrip())
        print(f"total: {report.total}")
    else:
        for scheme in report.variants:
            print(scheme.text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


def analyze_scheme(tensor, scheme, threshold, reduced, kappa_max):
    """One report record; errors are captured rather than raised."""
    record = {"scheme": scheme.text, "k": scheme.k, "r": scheme.rank,
              "sensitivity": sensitivity(scheme).to_dict()}
    try:
        square = build_square(tensor, scheme)
        if reduced:
            block = square.matrix()[: square.r + 1, : square.r + 1]
            red = reduced_pd(block, kappa_max)
            frob, max_abs = reduced_pd_score(red)
            record.update(mode="reduced", x=red.x, schur=list(red.schur),
                          closed_form_residual=red.closed_form_residual)
        else:
            result = partial_determinant(square, kappa_max)
            frob, max_abs = result.frobenius_score, result.max_abs_score
            record.update(mode="square", corner_conditions=result.corner_conditions)
        limit = threshold if threshold is not None else default_threshold(scheme.rank, tensor.provenance.get("shots"))
        record.update(score=frob, max_abs_score=max_abs, threshold=limit,
                      trivial=bool(frob <= limit), error=None)
    except (IllConditioned, InsufficientSettings, np.linalg.LinAlgError) as exc:
        record.update(score=None, max_abs_score=None, trivial=None, error=f"{type(exc).__name__}: {exc}")
    return record


def run_analysis(tensor, schemes, threshold=None, reduced=False, kappa_max=KAPPA_MAX, jobs=1):
    work = lambda s: analyze_scheme(tensor, s, threshold, reduced, kappa_max)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(work, schemes))
    return [work(s) for s in schemes]


def build_report(tensor, records, config, deterministic):
    report = {
        "format": REPORT_FORMAT,
        "tool_version": __version__,
        "config": config,
        "input_provenance": tensor.provenance,
        "records": records,
        "summary": {
            "schemes": len(records),
            "trivial": sum(1 for r in records if r["trivial"] is True),
            "nontrivial": sum(1 for r in records if r["trivial"] is False),
            "failed": sum(1 for r in records if r["error"] is not None),
        },
    }
    if not deterministic:
        report["timestamp"] = datetime.now(timezone.utc).isoformat()
    return report


def format_table(records):
    ranked = sorted(records, key=lambda r: (r["score"] is None, -(r["score"] or 0.0)))
    width = max([len(r["scheme"]) for r in records] + [6])
    lines = [f"{'scheme':<{width}}  {'score':>10}  verdict"]
    for r in ranked:
        if r["error"]:
            lines.append(f"{r['scheme']:<{width}}  {'-':>10}  FAILED ({r['error']})")
        else:
            verdict = "trivial" if r["trivial"] else "NONTRIVIAL"
            lines.append(f"{r['scheme']:<{width}}  {r['score']:>10.3e}  {verdict}")
    return "\n".join(lines)


def _select_schemes(tensor, ks, texts):
    if texts:
        try:
            return [parse(t, tensor.m, tensor.d) for t in texts]
        except PDTomoError as exc:
            raise UsageError(str(exc)) from None
    schemes = []
    for k in ks:
        try:
            schemes.extend(enumerate_schemes(tensor.m, tensor.d, k).variants)
        except PDTomoError as exc:
            raise UsageError(str(exc)) from None
    return schemes


def cmd_analyze(args):
    try:
        tensor = pdio.load_tensor(args.input, d=args.d)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from None
    if args.threshold is not None and not args.threshold > 0:
        raise UsageError("--threshold must be positive")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    ks = args.k or [1]
    schemes = _select_schemes(tensor, ks, args.schemes)
    records = run_analysis(tensor, schemes, args.threshold, args.reduced, args.kappa_max, args.jobs)
    config = {"input": Path(args.input).name, "k": ks, "threshold": args.threshold,
              "reduced": args.reduced, "kappa_max": args.kappa_max,
              "schemes": args.schemes}
    report = build_report(tensor, records, config, args.deterministic)
    if args.output:
        pdio.write_text(pdio.dumps(report), args.output)
    if not args.quiet:
        print(format_table(records))
    return EXIT_CONDITIONING if report["summary"]["failed"] else EXIT_OK


# ---------------------------------------------------------------------------
# demo


def cmd_demo(args):
    """Two-qubit walk-through: uncorrelated data, then SPAM on qudit 2."""
    seed = _resolve_seed(args.seed)
    schemes = enumerate_schemes(2, 2, 1).variants
    for label in ("none", "spam:2", "nonlocal:1,2"):
        tensor = generate_tensor(2, 2, None, label, 0.0 if label == "none" else args.epsilon, seed)
        records = run_analysis(tensor, schemes)
        print(f"== correlation {label} (epsilon={0.0 if label == 'none' else args.epsilon}) ==")
        print(format_table(records))
        print()
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "demo.json"
        pdio.save_tensor(generate_tensor(2, 2, None, "none", 0.0, seed), path)
        print(f"tensor JSON round-trip ok: {pdio.load_tensor(path).values.shape}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="pdtomo", description="Partial-determinant tests for correlated SPAM errors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="synthesize a data tensor")
    gen.add_argument("--m", type=int, required=True, help="number of qudits")
    gen.add_argument("--d", type=int, default=2, help="qudit dimension (default 2)")
    gen.add_argument("--settings", type=_int_list, default=None,
                     help="N,M1,...,Mm setting counts (default: enough for every scheme)")
    gen.add_argument("--correlation", default="none", help="none, spam:q or nonlocal:p,q")
    gen.add_argument("--epsilon", type=float, default=0.1, help="correlation strength in [0, 1]")
    gen.add_argument("--seed", type=int, default=0, help="master seed (PDTOMO_SEED overrides)")
    gen.add_argument("--shots", type=float, default=None, help="add Gaussian noise of width 1/sqrt(shots)")
    gen.add_argument("--output", "-o", default="-", help="output file (default stdout)")
    gen.set_defaults(func=cmd_generate)

    enum = sub.add_parser("enumerate", help="list the distinct PD schemes of a class")
    enum.add_argument("--m", type=int, required=True)
    enum.add_argument("--d", type=int, default=2)
    enum.add_argument("--k", type=int, default=1, help="class: number of qudits right of the colon")
    fmt = enum.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="machine-readable listing")
    fmt.add_argument("--table", action="store_true", help="corner/square template table with counts")
    enum.set_defaults(func=cmd_enumerate)

    ana = sub.add_parser("analyze", help="run PD schemes over a data tensor")
    ana.add_argument("--input", "-i", required=True, help="tensor .json or .csv")
    ana.add_argument("--d", type=int, default=2, help="qudit dimension for CSV input")
    ana.add_argument("--k", type=int, nargs="+", default=None, help="classes to sweep (default 1)")
    ana.add_argument("--schemes", nargs="+", default=None, help="explicit scheme texts instead of a sweep")
    ana.add_argument("--threshold", type=float, default=None, help="Frobenius triviality threshold")
    ana.add_argument("--reduced", action="store_true", help="use the (r+1)x(r+1) leading block of each square")
    ana.add_argument("--kappa-max", type=float, default=KAPPA_MAX, help="corner condition-number limit")
    ana.add_argument("--jobs", type=int, default=1, help="worker threads")
    ana.add_argument("--deterministic", action="store_true", help="omit the timestamp from the report")
    ana.add_argument("--output", "-o", default=None, help="write the JSON report here")
    ana.add_argument("--quiet", "-q", action="store_true", help="suppress the table")
    ana.set_defaults(func=cmd_analyze)

    demo = sub.add_parser("demo", help="two-qubit walk-through")
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--epsilon", type=float, default=0.1)
    demo.set_defaults(func=cmd_demo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except ConditioningFailure as exc:
        print(f"pdtomo: {exc}", file=sys.stderr)
        return EXIT_CONDITIONING
    except PDTomoError as exc:
        print(f"pdtomo: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
