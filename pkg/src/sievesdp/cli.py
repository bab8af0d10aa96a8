"""``sieve-sdp`` command line.

Exit codes: 0 success (reduced, possibly unchanged), 10 infeasibility
certified, 11 dual recovery failed, 2 bad input or usage.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as sio
from .gen import gen_example1, gen_messy, gen_planted, gen_posgap, gen_posgap_eps
from .metrics import dimacs_errors, help_code, reduction_stats
from .model import Solution, validate
from .recovery import RecoveryOptions, basic_recovery
from .sieve import MACHINE_EPS, SieveIterationLimit, SieveOptions, check_certificate, sieve

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 10
EXIT_RECOVERY_FAILED = 11

HELP_ORDER = ("1", "-1", "2", "-2", "3", "MM")


class InputError(Exception):
    pass


@dataclass(frozen=True)
class CliConfig:
    subcommand: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...] = ()
    safe_mode: bool = True
    eps: float = MACHINE_EPS
    max_iterations: int | None = None
    report_format: str = "human"

    def __post_init__(self):
        if any(not p for p in self.inputs + self.outputs):
            raise InputError("paths must be nonempty")


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str | None, text: str) -> None:
    if path is None:
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None


def _problem(path: str):
    problem = sio.read_sdpa(_read(path))
    issues = validate(problem)
    if issues:
        raise InputError(f"{path}: " + "; ".join(issues))
    return problem


def _emit(pairs: list[tuple[str, object]], fmt: str, out) -> None:
    for k, v in pairs:
        if fmt == "kv":
            print(f"{k}={v}", file=out)
        else:
            print(f"{k.replace('_', ' ')}: {v}", file=out)


def _g(v: float) -> str:
    return f"{v:.6g}"


def cmd_reduce(args, out) -> int:
    cfg = CliConfig("reduce", (args.input,), tuple(p for p in (args.out, args.cert) if p is not None),
                    args.safe_mode, args.eps, args.max_iter, args.format)
    problem = _problem(args.input)
    opts = SieveOptions(safe_mode=cfg.safe_mode, eps=cfg.eps, max_iterations=cfg.max_iterations)
    try:
        outcome = sieve(problem, opts)
    except SieveIterationLimit as exc:
        raise InputError(f"iteration limit reached after {len(exc.steps)} steps") from None
    cert = outcome.certificate
    _write(args.cert, sio.write_certificate(cert))
    if outcome.infeasible:
        bad = cert.steps[-1]
        if args.stats:
            _emit([("status", "infeasible"), ("iterations", outcome.iteration_count),
                   ("constraint", bad.constraint), ("b", sio.fmt(bad.b))], cfg.report_format, out)
        return EXIT_INFEASIBLE
    reduced = outcome.reduced
    _write(args.out, sio.write_sdpa(reduced))
    if args.stats:
        st = reduction_stats(problem, reduced)
        _emit([
            ("status", "reduced"), ("iterations", outcome.iteration_count),
            ("n_before", st.n_before), ("n_after", st.n_after),
            ("m_before", st.m_before), ("m_after", st.m_after),
            ("nnz_before", st.nnz_before), ("nnz_after", st.nnz_after),
            ("reduction_n", _pct(st.reduction_n)), ("reduction_m", _pct(st.reduction_m)),
        ], cfg.report_format, out)
    return EXIT_OK


def _pct(r: float) -> str:
    return "nan" if r != r else f"{100.0 * r:.2f}%"


def cmd_dimacs(args, out) -> int:
    problem = _problem(args.problem)
    sol = sio.read_solution(_read(args.solution), problem)
    try:
        errs = dimacs_errors(problem, sol)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    pairs = [(f"err{i}", _g(e)) for i, e in enumerate(errs.as_tuple(), start=1)]
    pairs.append(("max_abs", _g(errs.max_abs)))
    _emit(pairs, args.format, out)
    return EXIT_OK


def cmd_recover(args, out) -> int:
    problem = _problem(args.problem)
    cert = sio.read_certificate(_read(args.cert))
    if cert.structure != problem.structure or cert.m != problem.m:
        raise InputError("certificate does not belong to this problem")
    if cert.infeasible:
        raise InputError("certificate proves infeasibility; nothing to recover")
    issues = check_certificate(problem, cert)
    if issues:
        raise InputError("certificate does not replay on this problem: " + issues[0])
    toks = _read(args.y).split()
    if toks and toks[0] == "y":
        toks = toks[1:]
    try:
        y_red = np.array([float(t) for t in toks])
    except ValueError:
        raise InputError(f"{args.y}: malformed multiplier list") from None
    if y_red.size != len(cert.constraint_map):
        raise InputError(f"{args.y}: {y_red.size} multipliers, reduced problem has {len(cert.constraint_map)}")
    try:
        opts = RecoveryOptions(shift=args.shift)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    res = basic_recovery(problem, cert, y_red, opts)
    if not res.ok:
        step = cert.steps[res.failed_step]
        _emit([("status", "failed"), ("step", res.failed_step), ("constraint", step.constraint)], args.format,
              sys.stderr)
        return EXIT_RECOVERY_FAILED
    text = sio.write_solution(Solution(None, res.y))
    if args.out:
        _write(args.out, text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_helpcode(args, out) -> int:
    before = sio.read_report(_read(args.before))
    if before is sio.SIEVE_INFEASIBLE:
        raise InputError(f"{args.before}: the before-report must come from a solver run")
    after = sio.read_report(_read(args.after))
    codes = help_code(before, after)
    text = " ".join(c for c in HELP_ORDER if c in codes)
    if args.format == "kv":
        print(f"help={text.replace(' ', ',')}", file=out)
    else:
        print(text if text else "-", file=out)
    return EXIT_OK


def _record_text(record) -> str:
    lines = [f"infeasible={int(record.infeasible)}", f"chain={int(record.chain)}"]
    for c, sup, sg in zip(record.constraints, record.supports, record.signs):
        lines.append(f"plant constraint={c} sign={sg:+d} support="
                     + ",".join(f"{x.block}:{x.row}" for x in sup))
    return "\n".join(lines) + "\n"


def cmd_gen(args, out) -> int:
    fam = args.family
    text = record = None
    try:
        if fam == "example1":
            text = sio.write_sdpa(gen_example1())
        elif fam == "posgap":
            text = sio.write_sdpa(gen_posgap())
        elif fam == "messy":
            base = gen_posgap() if args.base == "posgap" else gen_example1()
            text = sio.write_sdpa(gen_messy(base, args.seed).problem)
        elif fam == "planted":
            blocks = tuple(int(t) for t in args.blocks.split(",")) if args.blocks else None
            problem, rec = gen_planted(args.seed, n=args.n, m=args.m, k=args.k, blocks=blocks,
                                       nonneg=args.nonneg, chain=args.chain, infeasible=args.infeasible)
            text = sio.write_sdpa(problem)
            record = _record_text(rec)
        elif fam == "posgap-eps":
            text = sio.write_solution(Solution(gen_posgap_eps(args.eps), np.zeros(2)))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.out:
        _write(args.out, text)
    else:
        out.write(text)
    if args.record:
        if record is None:
            raise InputError(f"family {fam} has no plant record")
        _write(args.record, record)
    return EXIT_OK


def _nonneg_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sieve-sdp", description="Facial-reduction presolver for SDPs.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("reduce", help="sieve an SDPA problem")
    r.add_argument("input")
    r.add_argument("--out", help="reduced problem (SDPA)")
    r.add_argument("--cert", help="certificate file")
    r.add_argument("--safe-mode", action=argparse.BooleanOptionalAction, default=True)
    r.add_argument("--eps", type=float, default=MACHINE_EPS)
    r.add_argument("--max-iter", type=_nonneg_int, default=None)
    r.add_argument("--stats", action="store_true")
    r.add_argument("--format", choices=("human", "kv"), default="human")
    r.set_defaults(func=cmd_reduce)

    d = sub.add_parser("dimacs", help="six DIMACS errors of a solution")
    d.add_argument("problem")
    d.add_argument("solution")
    d.add_argument("--format", choices=("human", "kv"), default="human")
    d.set_defaults(func=cmd_dimacs)

    rc = sub.add_parser("recover", help="extend a reduced dual solution")
    rc.add_argument("problem")
    rc.add_argument("cert")
    rc.add_argument("y", help="reduced multipliers, whitespace separated (optional leading 'y')")
    rc.add_argument("--shift", type=float, default=1e-6)
    rc.add_argument("--out")
    rc.add_argument("--format", choices=("human", "kv"), default="human")
    rc.set_defaults(func=cmd_recover)

    h = sub.add_parser("helpcode", help="classify a before/after pair of solve reports")
    h.add_argument("before")
    h.add_argument("after")
    h.add_argument("--format", choices=("human", "kv"), default="human")
    h.set_defaults(func=cmd_helpcode)

    g = sub.add_parser("gen", help="write a generated instance")
    g.add_argument("family", choices=("example1", "posgap", "planted", "messy", "posgap-eps"))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.add_argument("--record", help="plant record file (planted only)")
    g.add_argument("--n", type=int)
    g.add_argument("--m", type=int, default=10)
    g.add_argument("--k", type=int, default=3)
    g.add_argument("--blocks", help="comma-separated PSD block orders")
    g.add_argument("--nonneg", type=int, default=0)
    g.add_argument("--chain", action="store_true")
    g.add_argument("--infeasible", action="store_true")
    g.add_argument("--base", choices=("example1", "posgap"), default="example1", help="instance obfuscated by messy")
    g.add_argument("--eps", type=float, default=1e-3, help="posgap-eps parameter")
    g.set_defaults(func=cmd_gen)
    return p


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    if args.command == "gen" and args.family == "planted" and args.n is None and not args.blocks:
        args.n = 20
    try:
        return args.func(args, out)
    except (InputError, sio.ParseError, sio.UnsupportedFormatError) as exc:
        print(f"sieve-sdp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
