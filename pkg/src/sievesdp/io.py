"""Text formats: SDPA sparse problems, solutions, certificates, solve reports.

Block numbering in files follows the SDPA layout written by
:func:`write_sdpa`: PSD blocks ``1..P`` in order, then (when present) one
diagonal block ``P+1`` holding every nonnegative scalar.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .metrics import SIEVE_INFEASIBLE, SolveReport
from .model import (
    BlockStructure,
    Certificate,
    Coordinate,
    ReductionStep,
    SdpProblem,
    Solution,
    StepKind,
    SymBlockMatrix,
)

CERTIFICATE_VERSION = 1
_SEPARATORS = re.compile(r"[{}(),]")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnsupportedFormatError(ValueError):
    pass


class CertificateVersionError(ParseError):
    pass


def fmt(v: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return f"{v:.17g}"


def _float(tok: str, line: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"not a number: {tok!r}", line) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {tok!r}", line)
    return v


def _int(tok: str, line: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"not an integer: {tok!r}", line) from None


class _FileLayout:
    """Mapping between internal ``(block, row)`` and file ``(blkno, i)`` (both 0-based here)."""

    def __init__(self, structure: BlockStructure):
        self.structure = structure
        self.npsd = len(structure.psd_blocks)

    def to_file(self, block: int, row: int) -> tuple[int, int]:
        if block < self.npsd:
            return block, row
        return self.npsd, block - self.npsd

    def sdpa_sizes(self) -> list[int]:
        sizes = list(self.structure.psd_blocks)
        if self.structure.nonneg_count:
            sizes.append(-self.structure.nonneg_count)
        return sizes


def _entry_lines(M: SymBlockMatrix, layout: _FileLayout, prefix: str = "") -> list[tuple]:
    rows = []
    for (b, i, j), v in M.items():
        fb, fi = layout.to_file(b, i)
        _, fj = layout.to_file(b, j)
        rows.append((fb, fi, fj, v))
    rows.sort()
    return [f"{prefix}{fb + 1} {fi + 1} {fj + 1} {fmt(v)}" for fb, fi, fj, v in rows]


def write_sdpa(problem: SdpProblem) -> str:
    """Canonical sparse SDPA text: entries sorted by (matno, blkno, i, j)."""
    s = problem.structure
    if s.free_count:
        raise UnsupportedFormatError("SDPA sparse format cannot carry free variables")
    layout = _FileLayout(s)
    sizes = layout.sdpa_sizes()
    out = [str(problem.m), str(len(sizes)), " ".join(str(k) for k in sizes),
           " ".join(fmt(c.b) for c in problem.constraints)]
    for matno, M in enumerate([problem.C] + problem.A):
        out.extend(_entry_lines(M, layout, f"{matno} "))
    return "\n".join(out) + "\n"


def _content_lines(text: str):
    for no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped[0] in "\"*":
            continue
        yield no, stripped


def read_sdpa(text: str) -> SdpProblem:
    """Parse sparse SDPA; the objective vector becomes ``b`` and matrix 0 becomes ``C``.

    Header lines may carry trailing annotations after the leading number(s).
    A negative block size ``-k`` declares ``k`` nonnegative scalars.  Explicit
    zero values are legal and dropped.
    """
    lines = list(_content_lines(text))
    pos = 0

    def next_line(what: str):
        nonlocal pos
        if pos >= len(lines):
            raise ParseError(f"unexpected end of input, expected {what}", len(text.splitlines()) or 1)
        pos += 1
        return lines[pos - 1]

    no, line = next_line("number of constraints")
    m = _int(_SEPARATORS.sub(" ", line).split()[0], no)
    if m < 0:
        raise ParseError("negative number of constraints", no)
    no, line = next_line("number of blocks")
    nblocks = _int(_SEPARATORS.sub(" ", line).split()[0], no)
    if nblocks < 0:
        raise ParseError("negative number of blocks", no)
    no, line = next_line("block sizes")
    toks = _SEPARATORS.sub(" ", line).split()
    if len(toks) < nblocks:
        raise ParseError(f"expected {nblocks} block sizes, got {len(toks)}", no)
    sizes = [_int(t, no) for t in toks[:nblocks]]
    if any(k == 0 for k in sizes):
        raise ParseError("block size 0", no)
    if m:
        no, line = next_line("objective vector")
        toks = _SEPARATORS.sub(" ", line).split()
        if len(toks) != m:
            raise ParseError(f"expected {m} objective values, got {len(toks)}", no)
        b = [_float(t, no) for t in toks]
    else:
        b = []

    psd = [k for k in sizes if k > 0]
    nonneg = sum(-k for k in sizes if k < 0)
    s = BlockStructure(tuple(psd), nonneg)
    # file block -> (internal psd block id) or (nonneg base id)
    targets = []
    next_psd, next_nn = 0, len(psd)
    for k in sizes:
        if k > 0:
            targets.append(("psd", next_psd, k))
            next_psd += 1
        else:
            targets.append(("nn", next_nn, -k))
            next_nn += -k

    entries: list[dict] = [dict() for _ in range(m + 1)]
    seen: set = set()
    while pos < len(lines):
        no, line = lines[pos]
        pos += 1
        toks = _SEPARATORS.sub(" ", line).split()
        if len(toks) != 5:
            raise ParseError(f"expected 'matno blkno i j value', got {line!r}", no)
        matno, blk, i, j = (_int(t, no) for t in toks[:4])
        v = _float(toks[4], no)
        if not 0 <= matno <= m:
            raise ParseError(f"matrix number {matno} out of range 0..{m}", no)
        if not 1 <= blk <= nblocks:
            raise ParseError(f"block number {blk} out of range 1..{nblocks}", no)
        kind, base, k = targets[blk - 1]
        if not (1 <= i <= k and 1 <= j <= k):
            raise ParseError(f"index ({i}, {j}) out of range for block of size {k}", no)
        if i > j:
            raise ParseError(f"lower-triangle entry ({i}, {j}); entries must have i <= j", no)
        if kind == "nn":
            if i != j:
                raise ParseError(f"off-diagonal entry ({i}, {j}) in a diagonal block", no)
            key = (base + i - 1, 0, 0)
        else:
            key = (base, i - 1, j - 1)
        if (matno, key) in seen:
            raise ParseError(f"duplicate entry for matrix {matno} block {blk} ({i}, {j})", no)
        seen.add((matno, key))
        if v != 0.0:
            entries[matno][key] = v
    C = SymBlockMatrix(s, entries[0])
    return SdpProblem.create(s, C, [SymBlockMatrix(s, e) for e in entries[1:]], b)


def _entries_for(structure: BlockStructure):
    layout = _FileLayout(structure)
    sizes = layout.sdpa_sizes()

    def parse(toks, no) -> tuple[tuple[int, int, int], float]:
        if len(toks) != 4:
            raise ParseError("expected 'blkno i j value'", no)
        blk, i, j = (_int(t, no) for t in toks[:3])
        v = _float(toks[3], no)
        if not 1 <= blk <= len(sizes):
            raise ParseError(f"block number {blk} out of range 1..{len(sizes)}", no)
        k = abs(sizes[blk - 1])
        if not (1 <= i <= k and 1 <= j <= k):
            raise ParseError(f"index ({i}, {j}) out of range for block of size {k}", no)
        if i > j:
            raise ParseError(f"lower-triangle entry ({i}, {j}); entries must have i <= j", no)
        if sizes[blk - 1] < 0:
            if i != j:
                raise ParseError(f"off-diagonal entry ({i}, {j}) in a diagonal block", no)
            return (layout.npsd + i - 1, 0, 0), v
        return (blk - 1, i - 1, j - 1), v

    return layout, parse


def write_solution(solution: Solution) -> str:
    """``y`` line, optional ``f`` line (free variables), then ``X`` and ``Z`` sections."""
    out = [" ".join(["y"] + [fmt(v) for v in solution.y])]
    if solution.x_free.size:
        out.append(" ".join(["f"] + [fmt(v) for v in solution.x_free]))
    for name, M in (("X", solution.X), ("Z", solution.Z)):
        if M is None:
            continue
        out.append(name)
        out.extend(_entry_lines(M, _FileLayout(M.structure)))
    return "\n".join(out) + "\n"


def read_solution(text: str, problem: SdpProblem) -> Solution:
    """Parse a solution file against ``problem``; a file without ``X`` gives a dual-only solution."""
    s = problem.structure
    _, parse = _entries_for(s)
    lines = list(_content_lines(text))
    if not lines or lines[0][1].split()[0] != "y":
        raise ParseError("solution must start with a 'y' line", lines[0][0] if lines else 1)
    no, line = lines[0]
    y = [_float(t, no) for t in line.split()[1:]]
    if len(y) != problem.m:
        raise ParseError(f"y has {len(y)} values, problem has m = {problem.m}", no)
    x_free: list[float] = []
    sections: dict[str, dict] = {}
    current = None
    for no, line in lines[1:]:
        toks = line.split()
        if toks[0] == "f":
            if current is not None or x_free:
                raise ParseError("'f' line must directly follow the 'y' line", no)
            x_free = [_float(t, no) for t in toks[1:]]
            if len(x_free) != s.free_count:
                raise ParseError(f"{len(x_free)} free values, problem has {s.free_count}", no)
            continue
        if toks[0] in ("X", "Z") and len(toks) == 1:
            if toks[0] in sections:
                raise ParseError(f"repeated {toks[0]} section", no)
            current = toks[0]
            sections[current] = {}
            continue
        if current is None:
            raise ParseError(f"entry outside an X or Z section: {line!r}", no)
        key, v = parse(toks, no)
        if key in sections[current]:
            raise ParseError(f"duplicate {current} entry", no)
        sections[current][key] = v
    mats = {k: SymBlockMatrix(s, {kk: v for kk, v in e.items() if v != 0.0}) for k, e in sections.items()}
    return Solution(mats.get("X"), np.array(y), np.array(x_free), mats.get("Z"))


def _coord(c: Coordinate) -> str:
    return f"{c.block}:{c.row}"


def _parse_coord(tok: str, no: int) -> Coordinate:
    parts = tok.split(":")
    if len(parts) != 2:
        raise ParseError(f"bad coordinate {tok!r}", no)
    return Coordinate(_int(parts[0], no), _int(parts[1], no))


def write_certificate(cert: Certificate) -> str:
    """Versioned key=value text; one ``step`` line per reduction step."""
    s = cert.structure
    out = [
        f"sieve-certificate version={CERTIFICATE_VERSION}",
        f"structure psd={','.join(str(k) for k in s.psd_blocks)} nonneg={s.nonneg_count} free={s.free_count}",
        f"constraints m={cert.m}",
        f"steps count={len(cert.steps)}",
    ]
    for st in cert.steps:
        sup = ",".join(_coord(c) for c in st.support)
        out.append(f"step kind={st.kind.value} constraint={st.constraint} sign={st.sign:+d} "
                   f"b={fmt(st.b)} support={sup}")
    cmap = sorted(cert.coordinate_map.items())
    out.append("coordinate_map " + " ".join(f"{_coord(a)}>{_coord(b)}" for a, b in cmap))
    out.append("constraint_map " + " ".join(f"{a}>{b}" for a, b in sorted(cert.constraint_map.items())))
    return "\n".join(line.rstrip() for line in out) + "\n"


def _kv(toks, no, keys) -> dict:
    out = {}
    for t in toks:
        if "=" not in t:
            raise ParseError(f"expected key=value, got {t!r}", no)
        k, v = t.split("=", 1)
        if k in out:
            raise ParseError(f"repeated key {k!r}", no)
        out[k] = v
    if set(out) != set(keys):
        raise ParseError(f"expected keys {sorted(keys)}, got {sorted(out)}", no)
    return out


def read_certificate(text: str) -> Certificate:
    """Parse :func:`write_certificate` output; the stored index maps must match a replay."""
    lines = list(_content_lines(text))
    if not lines:
        raise ParseError("empty certificate", 1)
    it = iter(lines)

    def expect(tag: str, keys):
        try:
            no, line = next(it)
        except StopIteration:
            raise ParseError(f"missing '{tag}' line", len(lines)) from None
        toks = line.split()
        if toks[0] != tag:
            raise ParseError(f"expected '{tag}' line, got {toks[0]!r}", no)
        return no, _kv(toks[1:], no, keys)

    no, head = expect("sieve-certificate", ["version"])
    version = _int(head["version"], no)
    if version != CERTIFICATE_VERSION:
        raise CertificateVersionError(f"unsupported certificate version {version}", no)
    no, st = expect("structure", ["psd", "nonneg", "free"])
    psd = tuple(_int(t, no) for t in st["psd"].split(",") if t)
    try:
        structure = BlockStructure(psd, _int(st["nonneg"], no), _int(st["free"], no))
    except ValueError as exc:
        raise ParseError(str(exc), no) from None
    no, cm = expect("constraints", ["m"])
    m = _int(cm["m"], no)
    no, sc = expect("steps", ["count"])
    count = _int(sc["count"], no)
    steps = []
    kinds = {k.value: k for k in StepKind}
    for _ in range(count):
        no, kv = expect("step", ["kind", "constraint", "sign", "b", "support"])
        if kv["kind"] not in kinds:
            raise ParseError(f"unknown step kind {kv['kind']!r}", no)
        sign = _int(kv["sign"], no)
        support = tuple(_parse_coord(t, no) for t in kv["support"].split(",") if t)
        try:
            steps.append(ReductionStep(kinds[kv["kind"]], _int(kv["constraint"], no), sign, support,
                                       _float(kv["b"], no)))
        except ValueError as exc:
            raise ParseError(str(exc), no) from None
    maps = {}
    for tag in ("coordinate_map", "constraint_map"):
        try:
            no, line = next(it)
        except StopIteration:
            raise ParseError(f"missing '{tag}' line", len(lines)) from None
        toks = line.split()
        if toks[0] != tag:
            raise ParseError(f"expected '{tag}' line, got {toks[0]!r}", no)
        pairs = {}
        for t in toks[1:]:
            a, sep, b = t.partition(">")
            if not sep:
                raise ParseError(f"bad map entry {t!r}", no)
            if tag == "coordinate_map":
                pairs[_parse_coord(a, no)] = _parse_coord(b, no)
            else:
                pairs[_int(a, no)] = _int(b, no)
        maps[tag] = (no, pairs)
    extra = next(it, None)
    if extra is not None:
        raise ParseError("trailing content after constraint_map", extra[0])
    try:
        cert = Certificate.build(structure, m, steps)
    except ValueError as exc:
        raise ParseError(f"inconsistent certificate: {exc}") from None
    for tag, got in (("coordinate_map", cert.coordinate_map), ("constraint_map", cert.constraint_map)):
        no, pairs = maps[tag]
        if pairs != dict(got):
            raise ParseError(f"{tag} does not match the replayed steps", no)
    return cert


_REPORT_KEYS = ("infeasible", "primal_obj", "dual_obj", "dimacs", "out_of_memory")


def write_report(report) -> str:
    if report is SIEVE_INFEASIBLE:
        return "sieve_infeasible=1\n"
    return "".join([
        f"infeasible={int(report.infeasible)}\n",
        f"primal_obj={fmt(report.primal_obj)}\n",
        f"dual_obj={fmt(report.dual_obj)}\n",
        f"dimacs={fmt(report.dimacs)}\n",
        f"out_of_memory={int(report.out_of_memory)}\n",
    ])


def read_report(text: str):
    """Parse a key=value solve report; ``sieve_infeasible=1`` yields :data:`SIEVE_INFEASIBLE`.

    Missing numeric keys default to NaN; ``nan`` is accepted as a value.
    """
    kv = {}
    for no, line in _content_lines(text):
        k, sep, v = line.partition("=")
        k, v = k.strip(), v.strip()
        if not sep:
            raise ParseError(f"expected key=value, got {line!r}", no)
        if k in kv:
            raise ParseError(f"repeated key {k!r}", no)
        if k not in _REPORT_KEYS + ("sieve_infeasible",):
            raise ParseError(f"unknown key {k!r}", no)
        kv[k] = (v, no)
    if "sieve_infeasible" in kv:
        v, no = kv.pop("sieve_infeasible")
        if v != "1" or kv:
            raise ParseError("sieve_infeasible=1 must stand alone", no)
        return SIEVE_INFEASIBLE

    def flag(key):
        if key not in kv:
            return False
        v, no = kv[key]
        if v not in ("0", "1"):
            raise ParseError(f"{key} must be 0 or 1", no)
        return v == "1"

    def num(key):
        if key not in kv:
            return math.nan
        v, no = kv[key]
        try:
            return float(v)
        except ValueError:
            raise ParseError(f"{key}: not a number: {v!r}", no) from None

    return SolveReport(flag("infeasible"), num("primal_obj"), num("dual_obj"), num("dimacs"),
                       flag("out_of_memory"))
