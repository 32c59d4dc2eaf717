"""Command-line entry point.

Every subcommand that writes files also writes a run manifest (``*.manifest.json``)
recording the command, arguments, seed, package version, SHA-256 digests of
the inputs and the list of outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .blockcheck import (
    certificate_to_dict,
    check_block_condition,
    red_base_matrix,
    red_reduce,
    red_reduce_dgldpc,
)
from .de import _engine as _de_engine
from .de import bec_threshold
from .lifting import girth, lift, read_alist, simulate_bec, write_alist
from .optimizer import OptimizerConfig, optimize
from .pexit import awgn_threshold
from .protograph import Protograph, design_rate, load_protograph, save_protograph, validate


@dataclass
class RunManifest:
    command: str
    arguments: dict
    seed: int | None
    tool_version: str
    input_digests: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load(path: str) -> Protograph:
    """Load a protograph file; ``pkg:NAME`` selects a file shipped with the package."""
    if path.startswith("pkg:"):
        from . import data

        return data.load(path[4:])
    return load_protograph(path)


def _manifest(args, inputs: list[str], outputs: list[str]) -> None:
    if not outputs:
        return
    argd = {k: v for k, v in vars(args).items() if k != "func"}
    man = RunManifest(
        args.command,
        argd,
        getattr(args, "seed", None),
        __version__,
        {p: _digest(p) for p in inputs if not p.startswith("pkg:")},
        outputs,
    )
    man.write(outputs[0] + ".manifest.json")


def _write_json(path: str, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    p = _load(args.file)
    report = validate(p)
    for issue in report.issues:
        loc = f" [{issue.location}]" if issue.location else ""
        print(f"{issue.severity}: {issue.message}{loc}")
    print("valid" if report.ok else "invalid")
    return 0 if report.ok else 1


def cmd_rate(args) -> int:
    r = design_rate(_load(args.file))
    out = {
        "design_rate": str(r.design),
        "transmitted_rate": str(r.transmitted),
        "info_bits": r.info_bits,
        "transmitted_bits": r.transmitted_bits,
    }
    print(json.dumps(out) if args.json else f"design rate {r.design}  transmitted rate {r.transmitted}")
    return 0


def cmd_threshold_bec(args) -> int:
    p = _load(args.file)
    res = bec_threshold(p, args.precision, args.max_iter, args.delta)
    outputs = []
    if args.trace:
        eps = res.lower if args.trace_eps is None else args.trace_eps
        run = _de_engine(p).run(eps, args.max_iter, args.delta, keep_trajectory=True)
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "max_x", "max_app"])
            for t, (mx, ma) in enumerate(run.trajectory, start=1):
                w.writerow([t, repr(mx), repr(ma)])
        outputs.append(args.trace)
    if args.json:
        print(json.dumps({"threshold": res.threshold, "lower": res.lower, "upper": res.upper}))
    else:
        print(f"BEC threshold {res.threshold:.6f}  bracket [{res.lower!r}, {res.upper!r}]")
    _manifest(args, [args.file], outputs)
    return 0


def cmd_threshold_awgn(args) -> int:
    p = _load(args.file)
    res = awgn_threshold(p, args.precision_db)
    if args.json:
        print(json.dumps({"threshold_db": res.threshold_db, "lower_db": res.lower_db, "upper_db": res.upper_db}))
    else:
        print(f"AWGN threshold {res.threshold_db:.4f} dB  bracket [{res.lower_db!r}, {res.upper_db!r}]")
    return 0


def cmd_certify(args) -> int:
    p = _load(args.file)
    cert = check_block_condition(p, args.info, True if args.dgldpc else None)
    print(f"verdict {'PASS' if cert.verdict else 'FAIL'}: {cert.available_info} information bits can sit on "
          f"double-exponential nodes, {cert.required_info} required")
    print(f"RED edges {len(cert.red_edges)}  Dx {len(cert.Dx)}  Dy {len(cert.Dy)}  "
          f"DEX nodes {sorted(j + 1 for j in cert.dex_vars)}")
    outputs = []
    if args.dump_cert:
        _write_json(args.dump_cert, certificate_to_dict(p, cert))
        outputs.append(args.dump_cert)
    _manifest(args, [args.file], outputs)
    return 0


def cmd_red(args) -> int:
    p = _load(args.file)
    red, _ = red_reduce_dgldpc(p) if (args.dgldpc or not p.is_standard) else red_reduce(p)
    mat = red_base_matrix(red)
    print(f"variables {[j + 1 for j in red.variables]}")
    print(f"checks {[i + 1 for i in red.checks]}")
    for row in mat:
        print(" ".join(str(int(v)) for v in row))
    return 0


def cmd_optimize(args) -> int:
    if args.template:
        template = _load(args.template)
    else:
        template = Protograph.from_matrix(np.zeros((args.rows, args.cols), dtype=np.int64))
    cfg = OptimizerConfig(
        template,
        population_size=args.population,
        generations=args.generations,
        rng_seed=args.seed,
        channel=args.channel,
        jobs=args.jobs,
    )

    def progress(g, best):
        if args.verbose:
            print(f"generation {g}: best {best.threshold:.4f}", file=sys.stderr)

    res = optimize(cfg, progress)
    save_protograph(res.best.protograph, args.output)
    history = [
        {"generation": g, "threshold": c.threshold, "certified": c.certificate_ok}
        for g, c in enumerate(res.history)
    ]
    hist_path = args.history or args.output + ".history.json"
    _write_json(hist_path, {"final_threshold": res.final_threshold, "history": history})
    label = "erasure threshold" if args.channel == "bec" else "Eb/N0 threshold (dB)"
    print(f"best {label} {res.final_threshold:.6f}; written to {args.output}")
    _manifest(args, [args.template] if args.template else [], [args.output, hist_path])
    return 0


def cmd_lift(args) -> int:
    p = _load(args.file)
    rng = np.random.default_rng(args.seed) if args.seed is not None else None
    code = lift(p, args.Z, rng)
    write_alist(code, args.output)
    g = girth(code)
    print(f"n={code.n} m={code.m} girth={g if g else 'none (forest)'}; written to {args.output}")
    _manifest(args, [args.file], [args.output, args.output + ".json"])
    return 0


def cmd_simulate_bec(args) -> int:
    code = read_alist(args.code)
    rows = []
    for eps in args.eps:
        r = simulate_bec(code, eps, args.trials, args.seed, args.jobs, args.max_block_errors or None)
        half = 0.5 * (r.fer_ci[1] - r.fer_ci[0])
        rows.append([repr(r.epsilon), r.trials, repr(r.ber), repr(r.fer), repr(half),
                     r.bit_errors, r.block_errors, repr(r.fer_ci[0]), repr(r.fer_ci[1])])
    header = ["epsilon", "trials", "ber", "fer", "ci", "bit_errors", "block_errors", "fer_ci_low", "fer_ci_high"]
    if args.output:
        with open(args.output, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    w = csv.writer(sys.stdout)
    w.writerow(header)
    w.writerows(rows)
    _manifest(args, [args.code], [args.output] if args.output else [])
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="protoldpc", description="Protograph LDPC analysis and design tools.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    default_jobs = os.cpu_count() or 1

    s = sub.add_parser("validate", help="check a protograph file")
    s.add_argument("file")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("rate", help="design and transmitted rate")
    s.add_argument("file")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_rate)

    s = sub.add_parser("threshold-bec", help="erasure-channel threshold by density evolution")
    s.add_argument("file")
    s.add_argument("--precision", type=float, default=1e-4)
    s.add_argument("--max-iter", type=int, default=4000)
    s.add_argument("--delta", type=float, default=1e-10)
    s.add_argument("--trace", help="CSV of the per-iteration maxima at --trace-eps")
    s.add_argument("--trace-eps", type=float, help="erasure probability for the trace (default: lower bracket)")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_threshold_bec)

    s = sub.add_parser("threshold-awgn", help="AWGN threshold by protograph EXIT analysis")
    s.add_argument("file")
    s.add_argument("--precision-db", type=float, default=0.01)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_threshold_awgn)

    s = sub.add_parser("certify", help="block-error threshold certificate")
    s.add_argument("file")
    s.add_argument("--info", type=int, help="information bits to place (default: all)")
    s.add_argument("--dgldpc", action="store_true", help="use the generalized reducer")
    s.add_argument("--dump-cert", help="write the certificate as JSON")
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("red", help="print the base matrix of the reduced graph")
    s.add_argument("file")
    s.add_argument("--dgldpc", action="store_true")
    s.set_defaults(func=cmd_red)

    s = sub.add_parser("optimize", help="differential-evolution protograph search")
    s.add_argument("--rows", type=int)
    s.add_argument("--cols", type=int)
    s.add_argument("--template", help="protograph fixing size, component codes and puncturing")
    s.add_argument("--channel", choices=("bec", "awgn"), default="bec")
    s.add_argument("--generations", type=int, default=200)
    s.add_argument("--population", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=default_jobs)
    s.add_argument("-o", "--output", default="best.proto")
    s.add_argument("--history", help="JSON history path (default: OUTPUT.history.json)")
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("lift", help="circulant lift to an alist parity-check matrix")
    s.add_argument("file")
    s.add_argument("--Z", type=int, required=True)
    s.add_argument("--seed", type=int, help="randomize PEG tie-breaks with this seed")
    s.add_argument("-o", "--output", default="code.alist")
    s.set_defaults(func=cmd_lift)

    s = sub.add_parser("simulate-bec", help="Monte-Carlo erasure decoding")
    s.add_argument("code", help="alist file")
    s.add_argument("--eps", type=float, nargs="+", required=True)
    s.add_argument("--trials", type=int, default=10000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-block-errors", type=int, default=200, help="stop early after this many (0 = never)")
    s.add_argument("--jobs", type=int, default=default_jobs)
    s.add_argument("-o", "--output", help="CSV output path")
    s.set_defaults(func=cmd_simulate_bec)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "optimize" and not args.template and not (args.rows and args.cols):
        parser.error("optimize needs --rows and --cols, or --template")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
