"""``cfx`` command line.

Exit codes: 0 ok, 1 usage, 2 pole, 3 underflow, 4 non-termination,
5 closure or periodicity failure, 6 oracle mismatch.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from itertools import islice

from . import cfd1
from .cf_core import CFString, Mat2, gauss_measure
from .errors import CFXError
from .lab import EXPLICIT, FILE, RATIONAL, SourceSpec, run_experiment, sample_source, stats_to_dict

SCHEMA = "cfx/1"
MISMATCH = 6


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _digits_arg(text: str) -> CFString:
    try:
        ds = tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated digits, got {text!r}") from None
    if not ds or any(d < 1 for d in ds):
        raise argparse.ArgumentTypeError(f"digits must be positive, got {text!r}")
    return CFString(0, ds)


def _matrix_arg(text: str) -> Mat2:
    try:
        return Mat2.parse(text)
    except CFXError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _workers(args) -> int:
    if os.environ.get("CFX_WORKERS"):
        return max(1, int(os.environ["CFX_WORKERS"]))
    return args.workers


def _add_source(p):
    p.add_argument("--source", choices=["rational", "file", "explicit"], default="rational")
    p.add_argument("--bits", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--file", help="cfd1 input for --source file")
    p.add_argument("--value", help="p/q or cfd1 text for --source explicit")


def _spec(args) -> SourceSpec:
    kind = {"rational": RATIONAL, "file": FILE, "explicit": EXPLICIT}[args.source]
    if kind == FILE and not args.file:
        raise SystemExit(_usage("--source file needs --file"))
    if kind == EXPLICIT and args.value is None:
        raise SystemExit(_usage("--source explicit needs --value"))
    return SourceSpec(kind, args.bits, args.seed, args.file, args.value)


def _usage(msg: str) -> int:
    print(f"cfx: error: {msg}", file=sys.stderr)
    return 1


def _emit_json(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report(kind: str, args, body: dict) -> dict:
    out = {"schema": SCHEMA, "kind": kind}
    if hasattr(args, "seed"):
        out["seed"] = args.seed
    out.update(body)
    return out


def cmd_transform(args) -> int:
    from .transducer import Transducer

    src = open(args.input) if args.input else sys.stdin
    head, digits = cfd1.iter_stream(src)
    if args.digits is not None:
        digits = islice(digits, args.digits)
    write = sys.stdout.write
    t = Transducer.start(args.matrix, digits, head, args.holdback)
    if args.tail_exact:
        for j in digits:
            t.push(j)
        write(cfd1.format(t.finish(exact_tail=0)))
        return 0
    printed = 0
    line = []

    def flush(upto):
        nonlocal printed
        for v in t.out[printed:upto]:
            line.append(f"h={v}" if printed == 0 else str(v))
            printed += 1
            if len(line) == 20:
                write(" ".join(line) + "\n")
                line.clear()

    for j in digits:
        t.push(j)
        if t.final > printed:
            flush(t.final)
    flush(t.final)
    if line:
        write(" ".join(line) + "\n")
    pending = t.out[printed:]
    if printed == 0 and pending:
        write(f"# pending h={pending[0]} {' '.join(map(str, pending[1:]))}".rstrip() + "\n")
    elif pending:
        write("# pending " + " ".join(map(str, pending)) + "\n")
    return 0


def cmd_states(args) -> int:
    from .md_states import enumerate_states

    ss = enumerate_states(args.det)
    if args.count or not args.list:
        print(len(ss))
    if args.list:
        for m, tag in ss.members.items():
            print(f"{m} type={tag.name}")
    return 0


def cmd_graph(args) -> int:
    from .component_graph import markov_model, transitive_components

    g = transitive_components(args.det, args.j_max, args.window, workers=_workers(args))
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(g.to_dot())
    body = {"det": args.det}
    if args.components or not args.markov:
        body["graph"] = g.to_dict()
    if args.markov:
        body["markov"] = [markov_model(g, c, args.cutoff).to_dict() for c in g.sink_components()]
    _emit_json(_report("graph", args, body), args.out)
    return 0


def cmd_triggers(args) -> int:
    from .transducer import head_normalize
    from .triggers import trigger_census

    a0, it = sample_source(_spec(args))
    head = head_normalize(args.matrix, it, a0)
    inp = CFString(0, tuple(islice(it, args.digits)))
    census = trigger_census(head.state, inp, args.target, args.reading)
    body = {"matrix": str(args.matrix), "state": str(head.state), "target": list(args.target.tail), "digits": len(inp.tail)}
    body.update(census.to_dict())
    _emit_json(_report("triggers", args, body), args.out)
    return 0


def cmd_simulate(args) -> int:
    model = None
    sink = None
    if args.markov:
        from .component_graph import markov_model, transitive_components
        from .transducer import head_normalize

        a0, it = sample_source(_spec(args))
        state = head_normalize(args.matrix, it, a0).state
        g = transitive_components(abs(state.det), workers=_workers(args))
        landing = g.entry[state][1]
        sink = g.sink_of(landing)
        model = markov_model(g, sink, args.cutoff)
    stats = run_experiment(args.matrix, _spec(args), args.digits, args.holdback, until_output=args.until_output, sink=sink)
    body = stats_to_dict(stats, model)
    body["source"] = _spec(args).to_dict()
    _emit_json(_report("simulate", args, body), args.out)
    return 4 if stats.partial else 0


def cmd_verify(args) -> int:
    from .oracle import verify_transduction

    rep = verify_transduction(args.matrix, _spec(args), args.digits, args.holdback)
    if args.json:
        _emit_json(_report("verify", args, rep.to_dict()), args.out)
    else:
        status = "ok" if rep.ok else f"MISMATCH at {rep.first_mismatch}"
        print(f"{status}: matched {rep.match_len} of {rep.emitted} emitted, {rep.certified} certified")
    return 0 if rep.ok else MISMATCH


def cmd_measure(args) -> int:
    print(repr(gauss_measure(args.cylinder)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cfx", description="Exact continued-fraction transduction under integer Mobius maps.")
    ap.add_argument("--workers", type=int, default=1)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("transform", help="stream a cfd1 expansion of x into one of Mx")
    p.add_argument("--matrix", type=_matrix_arg, required=True)
    p.add_argument("--digits", type=int, help="read at most this many tail digits")
    p.add_argument("--holdback", type=int, default=8)
    p.add_argument("--tail-exact", action="store_true", help="input is the whole expansion of a rational")
    p.add_argument("--input", help="read from a file instead of stdin")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("states", help="enumerate M_D")
    p.add_argument("--det", type=int, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--list", action="store_true")
    g.add_argument("--count", action="store_true")
    p.set_defaults(func=cmd_states)

    p = sub.add_parser("graph", help="transition graph, components, Markov surrogate")
    p.add_argument("--det", type=int, required=True)
    p.add_argument("--dot")
    p.add_argument("--components", action="store_true")
    p.add_argument("--markov", action="store_true")
    p.add_argument("--cutoff", type=int, default=10**6)
    p.add_argument("--j-max", type=int, default=10_000)
    p.add_argument("--window", type=int, default=64)
    p.add_argument("--out")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("triggers", help="trigger-string census for a target")
    p.add_argument("--matrix", type=_matrix_arg, required=True)
    p.add_argument("--target", type=_digits_arg, required=True)
    p.add_argument("--digits", type=int, default=10_000)
    p.add_argument("--reading", choices=["conservative", "loose"], default="conservative")
    p.add_argument("--report", choices=["json"], default="json")
    p.add_argument("--out")
    _add_source(p)
    p.set_defaults(func=cmd_triggers)

    p = sub.add_parser("simulate", help="orbit statistics over a long source")
    p.add_argument("--matrix", type=_matrix_arg, required=True)
    p.add_argument("--digits", type=int, default=100_000)
    p.add_argument("--holdback", type=int, default=8)
    p.add_argument("--until-output", action="store_true", help="count output digits instead of input")
    p.add_argument("--markov", action="store_true", help="compare occupancy with the sink's stationary vector")
    p.add_argument("--cutoff", type=int, default=10**6)
    p.add_argument("--report", choices=["json"], default="json")
    p.add_argument("--out")
    _add_source(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check the transducer against the interval oracle")
    p.add_argument("--matrix", type=_matrix_arg, required=True)
    p.add_argument("--digits", type=int, default=5_000)
    p.add_argument("--holdback", type=int, default=8)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    _add_source(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("measure", help="Gauss measure of a cylinder")
    p.add_argument("--cylinder", type=_digits_arg, required=True)
    p.set_defaults(func=cmd_measure)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CFXError as exc:
        print(f"cfx: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:
        return 0


if __name__ == "__main__":
    sys.exit(main())
