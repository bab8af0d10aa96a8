"""Solution-quality measures, help codes, and reduction/timing statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import min_eigenvalue
from .model import SdpProblem, Solution, linear_combination, validate_solution

DIMACS_THRESHOLD = 1e-6
OBJ_SHIFT_THRESHOLD = 1e-6


@dataclass(frozen=True)
class DimacsErrors:
    err1: float
    err2: float
    err3: float
    err4: float
    err5: float
    err6: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.err1, self.err2, self.err3, self.err4, self.err5, self.err6)

    @property
    def max_abs(self) -> float:
        return max(abs(e) for e in self.as_tuple())


def _blockwise_min_eig(structure, blocks: list[np.ndarray]) -> float:
    vals = []
    for b, blk in enumerate(blocks):
        vals.append(float(blk[0, 0]) if structure.is_nonneg(b) else min_eigenvalue(blk))
    return min(vals) if vals else 0.0


def dimacs_errors(problem: SdpProblem, solution: Solution) -> DimacsErrors:
    """The six DIMACS error measures of a primal-dual pair.

    With no explicit ``Z`` the dual slack is taken as ``C - A*(y)``, so the
    dual-identity residual (err3) is zero apart from any free-variable part.
    Smallest eigenvalues are taken over PSD blocks and nonnegative entries.
    """
    issues = validate_solution(problem, solution)
    if solution.X is None:
        issues.append("solution has no primal part")
    if issues:
        raise ValueError("; ".join(issues))
    s = problem.structure
    y = np.asarray(solution.y, dtype=float)
    X = solution.X
    x_free = solution.x_free if solution.x_free.size else np.zeros(s.free_count)

    b = problem.b
    b_inf = float(np.max(np.abs(b))) if b.size else 0.0
    C_inf = max((abs(v) for v in problem.C.entries.values()), default=0.0)

    residual = problem.apply(X, x_free) - b
    err1 = float(np.linalg.norm(residual)) / (1.0 + b_inf)
    err2 = max(0.0, -_blockwise_min_eig(s, X.dense_blocks()) / (1.0 + b_inf))

    derived = linear_combination(s, -y, problem.A, base=problem.C)
    if solution.Z is None:
        z_blocks = derived
        dual_res_sq = 0.0
    else:
        z_blocks = solution.Z.dense_blocks()
        # A*(y) + Z - C
        dual_res_sq = sum(float(np.sum((zb - db) ** 2)) for zb, db in zip(z_blocks, derived))
    if s.free_count:
        F = np.array([c.free for c in problem.constraints], dtype=float).reshape(problem.m, s.free_count)
        dual_res_sq += float(np.sum((F.T @ y - np.asarray(problem.free_objective)) ** 2))
    err3 = math.sqrt(dual_res_sq) / (1.0 + C_inf)
    err4 = max(0.0, -_blockwise_min_eig(s, z_blocks) / (1.0 + C_inf))

    cx = problem.objective(X, x_free)
    by = float(np.dot(b, y))
    denom = 1.0 + abs(cx) + abs(by)
    err5 = (by - cx) / denom
    zx = sum(float(np.sum(zb * xb)) for zb, xb in zip(z_blocks, X.dense_blocks()))
    err6 = zx / denom
    return DimacsErrors(err1, err2, err3, err4, err5, err6)


@dataclass(frozen=True)
class SolveReport:
    """What a solver run reported; ``dimacs`` is the largest absolute DIMACS error."""

    infeasible: bool = False
    primal_obj: float = math.nan
    dual_obj: float = math.nan
    dimacs: float = math.nan
    out_of_memory: bool = False


class _SieveInfeasible:
    def __repr__(self):
        return "SIEVE_INFEASIBLE"


SIEVE_INFEASIBLE = _SieveInfeasible()
"""Stands in for the after-report when the sieve itself proved infeasibility."""


def help_code(before: SolveReport, after: SolveReport | _SieveInfeasible) -> frozenset[str]:
    """Classify whether preprocessing helped: a subset of {"1", "-1", "2", "-2", "3", "MM"}."""
    if after is SIEVE_INFEASIBLE:
        return frozenset({"1"})
    if before.out_of_memory or after.out_of_memory:
        return frozenset({"MM"})
    codes = set()
    if not before.infeasible and after.infeasible:
        codes.add("1")
    elif before.infeasible and not after.infeasible:
        codes.add("-1")
    if not codes:
        d0, d1 = before.dimacs, after.dimacs
        ratio = d1 / d0 if d0 > 0 else (math.inf if d1 > 0 else math.nan)
        if d0 > DIMACS_THRESHOLD and ratio < 0.1:
            codes.add("2")
        elif d1 > DIMACS_THRESHOLD and ratio > 10:
            codes.add("-2")
    if not codes & {"1", "-1", "-2"}:
        shift = abs(before.primal_obj - after.primal_obj) / (1.0 + abs(before.primal_obj))
        if shift > OBJ_SHIFT_THRESHOLD:
            codes.add("3")
    return frozenset(codes)


@dataclass(frozen=True)
class ReductionStats:
    n_before: int
    n_after: int
    m_before: int
    m_after: int
    nnz_before: int
    nnz_after: int
    reduction_n: float
    reduction_m: float
    pre_vs_solve: float
    time_reduction: float


def rate(total_before: float, total_after: float) -> float:
    """``(before - after) / before``; NaN when ``before`` is zero."""
    if total_before == 0:
        return math.nan
    return (total_before - total_after) / total_before


def pre_vs_solve(t_pre: float, t_solve_before: float) -> float:
    """Preprocessing time as a percentage of the unpreprocessed solve time."""
    if t_solve_before == 0:
        return math.nan
    return t_pre / t_solve_before * 100.0


def time_reduction(t_pre: float, t_solve_before: float, t_solve_after: float) -> float:
    """Percentage of solve time saved once preprocessing time is charged."""
    if t_solve_before == 0:
        return math.nan
    return (t_solve_before - (t_pre + t_solve_after)) / t_solve_before * 100.0


def reduction_stats(before: SdpProblem | Sequence[SdpProblem], after: SdpProblem | Sequence[SdpProblem],
                    t_pre: float = math.nan, t_solve_before: float = math.nan,
                    t_solve_after: float = math.nan) -> ReductionStats:
    """Size and time reductions, summed over one problem or a collection.

    ``n`` counts PSD block orders plus nonnegative scalars; ``nnz`` counts the
    constraint-matrix nonzeros of the full symmetric matrices.
    """
    for t in (t_pre, t_solve_before, t_solve_after):
        if t < 0:
            raise ValueError("times must be nonnegative")
    bs = [before] if isinstance(before, SdpProblem) else list(before)
    as_ = [after] if isinstance(after, SdpProblem) else list(after)
    nb = sum(p.structure.n for p in bs)
    na = sum(p.structure.n for p in as_)
    mb = sum(p.m for p in bs)
    ma = sum(p.m for p in as_)
    return ReductionStats(
        n_before=nb, n_after=na, m_before=mb, m_after=ma,
        nnz_before=sum(p.nnz() for p in bs), nnz_after=sum(p.nnz() for p in as_),
        reduction_n=rate(nb, na), reduction_m=rate(mb, ma),
        pre_vs_solve=pre_vs_solve(t_pre, t_solve_before),
        time_reduction=time_reduction(t_pre, t_solve_before, t_solve_after),
    )
