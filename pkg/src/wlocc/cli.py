"""Command line entry point.

Subcommands: build (write a protocol family instance to a file), run
(execute a protocol file and print its outcome distribution), verify
(replay and check a protocol file), classify (round-complexity verdict
for a target), lift (strictly improve a finite protocol's Bell yield),
sweep (tabulate verdicts and distributions to CSV plus a figure), and
fl (yield of the nibbling Bell protocol after a number of passes).

Exit codes: 0 on success, 1 when a protocol fails verification or halt
assertions, 2 for usage, parse, and domain errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .protocol import UNBOUNDED, ProtocolError, parse, round_count, serialize
from .engine import (
    FAMILY_BUILDERS,
    ExecutionError,
    HaltAssertionError,
    build_fortescue_lo,
    fl_success,
    lift,
    run_finite,
    run_resummed,
    run_truncated,
)
from .analysis import classify, sweep, verify


def _sig(x: float) -> float:
    return float(f"{x:.12g}")


def _rounds_value(graph):
    r = round_count(graph)
    return "unbounded" if r == UNBOUNDED else int(r)


def _read_graph(path: str):
    return parse(Path(path).read_text(encoding="utf-8"))


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _cmd_build(args) -> int:
    builder = FAMILY_BUILDERS[args.family]
    if args.family == "fort-lo":
        if args.epsilon is None:
            print("build: fort-lo needs --epsilon", file=sys.stderr)
            return 2
        graph = builder(args.epsilon)
    else:
        if args.t is None:
            print(f"build: {args.family} needs --t", file=sys.stderr)
            return 2
        graph = builder(args.t)
    _write_text(args.out, serialize(graph))
    return 0


def _cmd_run(args) -> int:
    graph = _read_graph(args.protocol)
    if args.mode == "finite":
        dist = run_finite(graph, args.t)
    elif args.mode == "truncated":
        if args.cycles is None:
            print("run: truncated mode needs --cycles", file=sys.stderr)
            return 2
        dist = run_truncated(graph, args.t, args.cycles)
    else:
        dist = run_resummed(graph, args.t)

    if args.format == "json":
        payload = {
            "p_AB": _sig(dist.p_AB),
            "p_AC": _sig(dist.p_AC),
            "p_BC": _sig(dist.p_BC),
            "residual": _sig(dist.residual),
            "rounds": _rounds_value(graph),
            "halts": [
                {
                    "label": h.label.token,
                    "prob": _sig(h.prob),
                    "concurrence": None if h.concurrence is None else _sig(h.concurrence),
                }
                for h in dist.halts
            ],
        }
        print(json.dumps(payload))
    else:
        print("p_AB,p_AC,p_BC,residual,rounds")
        print(
            f"{dist.p_AB:.12g},{dist.p_AC:.12g},{dist.p_BC:.12g},"
            f"{dist.residual:.12g},{_rounds_value(graph)}"
        )
    return 0


def _cmd_verify(args) -> int:
    graph = _read_graph(args.protocol)
    report = verify(graph, args.t)
    print(report.render())
    return 0 if report.passed else 1


def _cmd_classify(args) -> int:
    verdict = classify(args.t, require_all_pairs_positive=args.require_all_pairs)
    print(str(verdict))
    if verdict.degenerate:
        print("note: target 0 is degenerate; no measurement is needed")
    return 0


def _cmd_lift(args) -> int:
    graph = _read_graph(args.protocol)
    lifted = lift(graph, args.t)
    _write_text(args.out, serialize(lifted))
    return 0


def _cmd_sweep(args) -> int:
    rows = sweep(args.t_min, args.t_max, args.steps)
    lines = ["t,verdict,alpha,p_AB,p_AC,p_BC,protocol"]
    for r in rows:
        cells = [f"{r.t:.12g}", r.verdict, f"{r.alpha:.12g}"]
        for v in (r.p_AB, r.p_AC, r.p_BC):
            cells.append("" if v is None else f"{v:.12g}")
        cells.append(r.protocol)
        lines.append(",".join(cells))
    _write_text(args.out, "\n".join(lines) + "\n")
    if not args.no_plot and args.out != "-":
        from .figures import render_sweep

        fig_path = args.plot_file or str(Path(args.out).with_suffix(".png"))
        render_sweep(rows, fig_path)
        print(f"wrote {args.out} and {fig_path}")
    elif args.out != "-":
        print(f"wrote {args.out}")
    return 0


def _cmd_fl(args) -> int:
    graph = build_fortescue_lo(args.epsilon)
    dist = run_truncated(graph, 1.0, args.cycles)
    success = dist.p_AB + dist.p_AC + dist.p_BC
    payload = {
        "epsilon": _sig(args.epsilon),
        "cycles": args.cycles,
        "success": _sig(success),
        "closed_form": _sig(fl_success(args.epsilon, args.cycles)),
        "residual": _sig(dist.residual),
    }
    print(json.dumps(payload))
    if args.plot:
        from .figures import render_fl

        render_fl(args.epsilon, args.cycles, args.plot)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wlocc",
        description="Build, run, verify, and analyze multi-round pair "
        "distillation protocols on three-qubit W-class states.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="write a protocol family instance")
    b.add_argument("--family", required=True, choices=sorted(FAMILY_BUILDERS))
    b.add_argument("--t", type=float, help="target B-C concurrence")
    b.add_argument("--epsilon", type=float, help="nibble weight (fort-lo only)")
    b.add_argument("-o", "--out", required=True, help="output path, - for stdout")
    b.set_defaults(func=_cmd_build)

    r = sub.add_parser("run", help="execute a protocol file")
    r.add_argument("--protocol", required=True)
    r.add_argument("--t", type=float, required=True)
    r.add_argument("--mode", required=True, choices=["finite", "truncated", "resummed"])
    r.add_argument("--cycles", type=int, help="pass budget (truncated mode)")
    r.add_argument("--format", default="json", choices=["json", "csv"])
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("verify", help="replay and check a protocol file")
    v.add_argument("--protocol", required=True)
    v.add_argument("--t", type=float, required=True)
    v.set_defaults(func=_cmd_verify)

    c = sub.add_parser("classify", help="round-complexity verdict for a target")
    c.add_argument("--t", type=float, required=True)
    c.add_argument("--require-all-pairs", action="store_true")
    c.set_defaults(func=_cmd_classify)

    l = sub.add_parser("lift", help="strictly improve a finite protocol")
    l.add_argument("--protocol", required=True)
    l.add_argument("--t", type=float, required=True)
    l.add_argument("-o", "--out", required=True)
    l.set_defaults(func=_cmd_lift)

    s = sub.add_parser("sweep", help="verdicts and distributions over a target grid")
    s.add_argument("--t-min", type=float, required=True)
    s.add_argument("--t-max", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--out", required=True, help="CSV path, - for stdout")
    s.add_argument("--no-plot", action="store_true")
    s.add_argument("--plot-file", help="figure path (default: CSV path with .png)")
    s.set_defaults(func=_cmd_sweep)

    f = sub.add_parser("fl", help="yield of the nibbling Bell protocol")
    f.add_argument("--epsilon", type=float, required=True)
    f.add_argument("--cycles", type=int, required=True)
    f.add_argument("--plot", help="optional figure path")
    f.set_defaults(func=_cmd_fl)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ProtocolError as e:
        for d in e.diagnostics:
            print(str(d), file=sys.stderr)
        return 2
    except HaltAssertionError as e:
        print(f"halt assertion failed: {e}", file=sys.stderr)
        return 1
    except ExecutionError as e:
        print(f"execution failed: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
