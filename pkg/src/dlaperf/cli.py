"""Command-line front end.

    dlaperf predict  --profile P --algo cannon --variant 2d --n 4096 --p 64
    dlaperf rank     --profile P --algo cannon --n 32768 --p 256,1024,4096
    dlaperf trace    --profile P --algo trsm --variant 25d --n 4096 --p 32 --c 2 --r 2
    dlaperf extrapolate --profile P --p-target 16384 --out bigger.json
    dlaperf gen-profile --out synthetic.json
    dlaperf validate-profile --profile P

Validation failures exit with status 1 and one ``error: ...`` line on stderr;
I/O failures exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from dlaperf import profile as prof
from dlaperf.algomodel import (VARIANTS, ModelOptions, Scenario, ScenarioError,
                               predict, rank_cell)
from dlaperf.oracle import trace
from dlaperf.synthetic import SyntheticParams, gen_synthetic_profile


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def fmt_s(x: float) -> str:
    return f"{x:.6g}"


def fmt_pct(x: float) -> str:
    return f"{x:.2f}"


def int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _load(path: str) -> prof.MachineProfile:
    try:
        return prof.load_profile_path(path)
    except OSError as exc:
        raise CliError(f"io: {path}: {exc.strerror or exc}", 2)
    except prof.ProfileError as exc:
        raise CliError(f"profile: {exc}", 1)


def _write(text: str, out: str | None) -> None:
    if not out:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"io: {out}: {exc.strerror or exc}", 2)


def _options(args) -> ModelOptions:
    return ModelOptions(literal_thread_term=args.literal_thread_term,
                        full_grid_ubcast=args.full_grid_ubcast)


def _scenario(args, profile) -> Scenario:
    t = args.t if args.t is not None else profile.cores_per_process
    return Scenario(args.algo, args.variant, args.n, args.p, args.c, args.r, t)


def render_prediction(pred, fmt: str) -> str:
    sc = pred.scenario
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["algorithm", "variant", "n", "p", "c", "r", "t",
                         "total_s", "percent_peak", "flops", "phases"])
        phases = ";".join(f"{label}={fmt_s(v)}" for label, v in pred.phases)
        writer.writerow([sc.algorithm, sc.variant, sc.n, sc.p, sc.c, sc.r, sc.t,
                         fmt_s(pred.total_s), fmt_pct(pred.percent_peak), f"{pred.flops:.0f}", phases])
        return buf.getvalue()
    lines = [
        f"scenario      {sc.algorithm} {sc.variant} n={sc.n} p={sc.p} c={sc.c} r={sc.r} t={sc.t}",
        f"total_s       {fmt_s(pred.total_s)}",
        f"percent_peak  {fmt_pct(pred.percent_peak)}",
        f"flops         {pred.flops:.0f}",
        "phases",
    ]
    width = max(len(label) for label, _ in pred.phases)
    lines += [f"  {label:<{width}}  {fmt_s(v)}" for label, v in pred.phases]
    return "\n".join(lines) + "\n"


def cmd_predict(args) -> None:
    profile = _load(args.profile)
    try:
        pred = predict(profile, _scenario(args, profile), _options(args))
    except ScenarioError as exc:
        raise CliError(f"scenario: {exc}", 1)
    _write(render_prediction(pred, args.format), args.out)


def cmd_trace(args) -> None:
    profile = _load(args.profile)
    try:
        steps = trace(profile, _scenario(args, profile), _options(args))
    except ScenarioError as exc:
        raise CliError(f"scenario: {exc}", 1)
    _write(steps.to_csv(), args.out)


def cmd_rank(args) -> None:
    profile = _load(args.profile)
    options = _options(args)
    t = args.t if args.t is not None else profile.cores_per_process
    layers = None if args.c == "auto" else int_list(args.c)
    rows = []
    for n in args.n:
        for p in args.p:
            cell = rank_cell(profile, args.algo, n, p, args.r, t, layers, options)
            for variant, reason in cell.invalid.items():
                print(f"skipped: n={n} p={p} {variant}: {reason}", file=sys.stderr)
            if cell.winner is None:
                continue
            rows.append(cell)
    if not rows:
        raise CliError("scenario: no valid (n, p) combination in sweep", 1)

    header = ["n", "p", "cores", *VARIANTS, "c_25d", "c_25d_ovlp", "winner"]

    def cells(cell):
        preds = cell.predictions
        out = [str(cell.n), str(cell.p), str(cell.p * profile.cores_per_process)]
        out += [fmt_pct(preds[v].percent_peak) if preds.get(v) else "NA" for v in VARIANTS]
        out += [str(preds[v].scenario.c) if preds.get(v) else "NA" for v in ("25d", "25d_ovlp")]
        return out + [cell.winner]

    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(cells(cell) for cell in rows)
        _write(buf.getvalue(), args.out)
        return
    table = [header] + [cells(cell) for cell in rows]
    for row, cell in zip(table[1:], rows):
        col = header.index(cell.winner)
        row[col] = "*" + row[col]
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    text = "\n".join("  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in table)
    _write(f"percent of peak, {args.algo}; * marks the fastest variant\n{text}\n", args.out)


def cmd_extrapolate(args) -> None:
    if Path(args.out).resolve() == Path(args.profile).resolve():
        raise CliError("io: --out must differ from --profile; the input is left untouched", 2)
    profile = _load(args.profile)
    try:
        for target in sorted(args.p_target):
            profile = prof.with_calib_max(profile, prof.extrapolate_cmax(profile, target, args.degree))
        prof.check(profile)
    except prof.ProfileError as exc:
        raise CliError(f"extrapolate: {exc}", 1)
    _write(prof.dumps(profile), args.out)


def cmd_gen_profile(args) -> None:
    params = SyntheticParams(name=args.name, max_slope=args.max_slope, avg_slope=args.avg_slope)
    try:
        profile = gen_synthetic_profile(params)
    except ValueError as exc:
        raise CliError(f"params: {exc}", 1)
    _write(prof.dumps(profile), args.out)


def cmd_validate_profile(args) -> None:
    profile = _load(args.profile)
    print(f"ok: {profile.name}: {sum(len(c) for c in profile.kernels.values())} kernel curves, "
          f"{len(profile.calib_avg.samples)} avg samples, {len(profile.calib_max.samples)} max samples")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dlaperf", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p, single=True):
        p.add_argument("--profile", required=True, help="machine profile JSON")
        p.add_argument("--algo", required=True, choices=["cannon", "trsm"])
        if single:
            p.add_argument("--variant", required=True, choices=VARIANTS)
            p.add_argument("--n", type=int, required=True, help="matrix dimension")
            p.add_argument("--p", type=int, required=True, help="process count")
            p.add_argument("--c", type=int, default=1, help="replication layers (2.5D)")
        p.add_argument("--r", type=int, default=1, help="block-cyclic blocks per process (TRSM)")
        p.add_argument("--t", type=int, default=None, help="threads per process (default: profile)")
        p.add_argument("--literal-thread-term", action="store_true",
                       help="use the thread count in the last reduce-scatter step")
        p.add_argument("--full-grid-ubcast", action="store_true",
                       help="2.5D TRSM loop broadcasts U over sqrt(p) ranks")
        p.add_argument("--out", default=None, help="output path (default: stdout)")

    p = sub.add_parser("predict", help="predict one scenario")
    model_flags(p)
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("trace", help="dump the step-by-step schedule as CSV")
    model_flags(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("rank", help="rank the four variants over an (n, p) sweep")
    model_flags(p, single=False)
    p.add_argument("--n", type=int_list, required=True, help="comma-separated matrix dimensions")
    p.add_argument("--p", type=int_list, required=True, help="comma-separated process counts")
    p.add_argument("--c", default="auto", help="comma-separated layer counts, or 'auto'")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("extrapolate", help="extend C_max to larger process counts")
    p.add_argument("--profile", required=True)
    p.add_argument("--p-target", type=int_list, required=True, help="comma-separated process counts")
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extrapolate)

    p = sub.add_parser("gen-profile", help="write a synthetic XE6-like profile")
    p.add_argument("--name", default=SyntheticParams.name)
    p.add_argument("--max-slope", type=float, default=SyntheticParams.max_slope)
    p.add_argument("--avg-slope", type=float, default=SyntheticParams.avg_slope)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen_profile)

    p = sub.add_parser("validate-profile", help="check a profile file")
    p.add_argument("--profile", required=True)
    p.set_defaults(func=cmd_validate_profile)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
