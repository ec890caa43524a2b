"""Command-line interface.

Exit codes: 0 when a check passes, 2 for a principled negative (a failed
classification, a diverging flag sequence, an empty ray intersection), 1 for
any error. Outputs contain no timestamps or timings, so identical inputs and
seed give byte-identical files regardless of ``--threads``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from regulus import __version__
from regulus.cartan import LinearFunctional, Theta, fundamental_weights, simple_roots
from regulus.errors import (Divergent, EmptyIntersection, NoGap, ParseError, RegulusError,
                            TooShort)
from regulus.serialize import (csv_text, json_text, read_path_samples, read_records,
                               read_sequence)

PASS, NEGATIVE, ERROR = 0, 2, 1


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with status 1, not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ERROR, f"{self.prog}: error: {message}\n")


def _ints(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _radii(text: str) -> list:
    """``"0..8"`` or ``"0,2,4"``."""
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return _ints(text)


def _theta(text: str | None, d: int) -> Theta:
    return Theta.full(d) if not text else Theta(_ints(text), d)


def _emit(args, name: str, text: str) -> None:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


# ---------------------------------------------------------------------------
# subcommands

def cmd_kappa(args) -> int:
    els = read_sequence(args.input)
    from regulus.matrixcore import sing_log_batch

    kap = sing_log_batch(els, backend=args.backend)
    d = kap.shape[1]
    header = (["index"] + [f"kappa_{k}" for k in range(1, d + 1)]
              + [f"alpha_{k}" for k in range(1, d)] + [f"omega_{k}" for k in range(1, d)])
    rows = []
    for i, v in enumerate(kap):
        rows.append([i] + [float(x) for x in v] + [float(x) for x in simple_roots(v)]
                    + [float(x) for x in fundamental_weights(v)])
    text = csv_text(header, rows)
    sys.stdout.write(text)
    if args.out_dir:
        _emit(args, "kappa.csv", text)
    return PASS


def cmd_classify(args) -> int:
    from regulus.morse import (MorseConfig, classify_morse, classify_morse_path,
                               classify_uniform_regular)

    if args.mode == "path":
        samples = read_path_samples(args.input)
        d = samples[0][1].dim if samples else 2
        theta = _theta(args.theta, d)
        verdict = classify_morse_path(samples, theta, MorseConfig(seed=args.seed, threads=args.threads))
        passed, csv_out = verdict.passed, None
    else:
        seq = read_sequence(args.input)
        d = seq[0].dim if seq else 2
        theta = _theta(args.theta, d)
        if args.mode == "ur":
            verdict = classify_uniform_regular(seq, theta, args.c, args.D, seed=args.seed,
                                               threads=args.threads)
            passed, csv_out = verdict.passed, None
        else:
            verdict = classify_morse(seq, theta, MorseConfig(seed=args.seed, threads=args.threads))
            passed, csv_out = verdict.overall, verdict.csv_text()
    report = {"mode": args.mode, "theta": theta.to_list(), "passed": passed,
              "verdict": verdict.to_dict()}
    _emit(args, "verdict.json", json_text(report))
    if csv_out is not None:
        _emit(args, "diagnostics.csv", csv_out)
    print(f"{args.mode}: {'pass' if passed else 'fail'}")
    return PASS if passed else NEGATIVE


def cmd_weyl_verify(args) -> int:
    from regulus.weyl import WeylConfig, verify_morse_lemma

    seq = read_sequence(args.input)
    d = seq[0].dim if seq else 2
    theta = _theta(args.theta, d)
    cfg = WeylConfig(tail=args.tail, starts=args.starts, seed=args.seed, threads=args.threads)
    try:
        report = verify_morse_lemma(seq, theta, cfg)
    except (Divergent, NoGap) as exc:
        _emit(args, "report.json", json_text({"verdict": False, "reason": str(exc)}))
        print(f"weyl-verify: fail ({exc})")
        return NEGATIVE
    out = report.to_dict()
    out["limit_flag"] = [f.tolist() for f in report.limit.flag.frames()]
    _emit(args, "report.json", json_text(out))
    _emit(args, "cone_distance.csv", report.csv_text())
    print(f"weyl-verify: {'pass' if report.verdict else 'fail'} (tail ratio {report.tail_ratio:.4g})")
    return PASS if report.verdict else NEGATIVE


def cmd_hilbert_pipeline(args) -> int:
    from regulus.groups import gallery_group
    from regulus.hilbert import ConvexDomain, run_pipeline
    from regulus.morse import MorseConfig

    if args.T <= 0:
        raise ValueError("T must be positive")
    gens = gallery_group(args.group)
    if args.domain:
        dom = ConvexDomain.from_dict(json.loads(Path(args.domain).read_text()))
    else:
        dom = ConvexDomain.unit_ball(gens.dim - 1)
    try:
        rep = run_pipeline(gens, dom, args.ray, args.r, args.C, args.T, radius=args.radius,
                           cfg=MorseConfig(seed=args.seed, threads=args.threads))
    except EmptyIntersection as exc:
        _emit(args, "pipeline.json", json_text({"status": "empty", "reason": str(exc)}))
        print("hilbert-pipeline: no orbit ball meets the ray")
        return NEGATIVE
    out = {"group": args.group, "ray": args.ray, "r": args.r, "C": args.C, "T": args.T}
    out.update(rep.to_dict())
    _emit(args, "pipeline.json", json_text(out))
    _emit(args, "intervals.csv", csv_text(["start", "end"], [list(iv) for iv in rep.intervals]))
    print(f"hilbert-pipeline: {rep.status} (compact fraction {rep.fraction:.4g})")
    return PASS if rep.status == "pass" else NEGATIVE


def cmd_poincare(args) -> int:
    from regulus.groups import critical_exponent_estimate, gallery_group, poincare_partial, word_ball

    gens = gallery_group(args.group)
    d = gens.dim
    phi = LinearFunctional(_floats(args.phi) if args.phi else [1.0] * (d - 1))
    radii = _radii(args.radii)
    s_grid = _floats(args.s)
    ball = word_ball(gens, max(radii))
    rows = []
    for R in radii:
        sub = [n for n in ball if n.length <= R]
        for s in s_grid:
            rows.append([R, float(s), poincare_partial(sub, phi, s)])
    _emit(args, "partial_sums.csv", csv_text(["radius", "s", "partial_sum"], rows))
    try:
        br = critical_exponent_estimate(gens, phi, radii, ball=ball)
        bracket = br.to_dict()
    except (ValueError, RegulusError) as exc:
        bracket = {"low": None, "high": None, "reason": str(exc)}
    _emit(args, "bracket.json", json_text({"group": args.group, "phi": phi.to_list(),
                                           "radii": radii, "bracket": bracket}))
    print(f"poincare: {len(ball)} elements up to radius {max(radii)}")
    return PASS


def cmd_gallery(args) -> int:
    from regulus.groups import GALLERY, gallery_group, word_ball

    if args.name is None:
        for name in sorted(GALLERY):
            g = gallery_group(name)
            kind = "semigroup" if g.semigroup else "group"
            print(f"{name}\tSL({g.dim})\t{kind}\tgenerators={','.join(g.labels) or '-'}\thint={g.hint}")
        return PASS
    g = gallery_group(args.name)
    _emit(args, f"{args.name}.json", json_text(g.to_dict()))
    if args.ball is not None:
        lines = []
        for node in word_ball(g, args.ball):
            lines.append(json.dumps({"word": node.word, "length": node.length,
                                     "matrix": node.element.matrix.tolist(),
                                     "kappa": [float(x) for x in node.kappa]}))
        _emit(args, f"{args.name}_ball.jsonl", "\n".join(lines) + "\n")
    print(f"gallery: wrote {args.name}")
    return PASS


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for sampled pairs and starts")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--out-dir", default="out", help="directory for output files")
    common.add_argument("--config", help="JSON file of option defaults")

    p = _Parser(prog="regulus", description=__doc__.split("\n\n")[0], parents=[common])
    p.add_argument("--version", action="version", version=f"regulus {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    k = sub.add_parser("kappa", parents=[common], help="Cartan projections of a matrix file")
    k.add_argument("input")
    k.add_argument("--backend", choices=["cython", "python"], default=None)
    k.set_defaults(func=cmd_kappa, out_dir=None)

    c = sub.add_parser("classify", parents=[common], help="classify a sequence")
    c.add_argument("input")
    c.add_argument("--theta", help="comma-separated root indices (default: all)")
    c.add_argument("--mode", choices=["morse", "ur", "path"], default="morse")
    c.add_argument("--c", type=float, default=0.1, help="gap ratio for --mode ur")
    c.add_argument("--D", type=int, default=1, help="minimal segment length for --mode ur")
    c.set_defaults(func=cmd_classify)

    w = sub.add_parser("weyl-verify", parents=[common], help="distance to the Weyl cone along a sequence")
    w.add_argument("input")
    w.add_argument("--theta")
    w.add_argument("--tail", type=int, default=None)
    w.add_argument("--starts", type=int, default=9)
    w.set_defaults(func=cmd_weyl_verify)

    h = sub.add_parser("hilbert-pipeline", parents=[common], help="compact part and extraction along a ray")
    h.add_argument("--domain", help="domain JSON (default: unit ball)")
    h.add_argument("--group", default="klein-schottky")
    h.add_argument("--ray", default="axis:a", help="'axis:<letter>' or 'toward:x,y,...'")
    h.add_argument("--r", type=float, default=2.0)
    h.add_argument("--C", type=float, default=3.0)
    h.add_argument("--T", type=float, default=200.0)
    h.add_argument("--radius", type=int, default=6, help="word ball radius for 'toward' rays")
    h.set_defaults(func=cmd_hilbert_pipeline)

    q = sub.add_parser("poincare", parents=[common], help="Poincare partial sums and growth bracket")
    q.add_argument("--group", default="diagonal-schottky")
    q.add_argument("--phi", help="weights of the fundamental weights (default: all 1)")
    q.add_argument("--radii", default="0..6")
    q.add_argument("--s", default="0,0.1,0.2,0.5,1,2")
    q.set_defaults(func=cmd_poincare)

    g = sub.add_parser("gallery", parents=[common], help="list or dump built-in groups")
    g.add_argument("name", nargs="?")
    g.add_argument("--ball", type=int, default=None, help="also dump the word ball of this radius")
    g.set_defaults(func=cmd_gallery)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: list) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    data = json.loads(Path(args.config).read_text())
    if not isinstance(data, dict):
        raise ParseError(1, "config must be a JSON object")
    known = vars(args)
    unknown = sorted(set(k.replace("-", "_") for k in data) - set(known))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    # explicit flags win over the config file
    given = {a.dest for a in parser._actions if any(opt in argv for opt in a.option_strings)}
    for action in parser._subparsers._group_actions[0].choices[args.command]._actions:
        if any(opt in argv for opt in action.option_strings):
            given.add(action.dest)
    for key, value in data.items():
        key = key.replace("-", "_")
        if key not in given:
            setattr(args, key, value)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if args.threads < 1:
            raise ValueError("--threads must be at least 1")
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (RegulusError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"regulus: error: {exc}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
