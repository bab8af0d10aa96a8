"""Sieve-SDP: repeated detection and removal of reducing constraints.

A constraint is *reducing* when, restricted to the rows/columns it touches
and after an optional sign flip, its matrix is positive definite and its
right-hand side is nonpositive.  A zero right-hand side forces the touched
block of every feasible ``X`` to vanish, so the constraint and those
rows/columns are dropped everywhere; a negative one proves infeasibility.

Deletions are lazy: constraints and coordinates are only *marked* deleted
while scanning, and the problem is compacted once at the end.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .linalg import pd_check
from .model import (
    Certificate,
    Coordinate,
    ReductionStep,
    SdpProblem,
    SieveOutcome,
    StepKind,
    SymBlockMatrix,
    Constraint,
)

MACHINE_EPS = 2.0 ** -52


@dataclass(frozen=True)
class SieveOptions:
    safe_mode: bool = True
    eps: float = MACHINE_EPS
    max_iterations: int | None = None
    pivot_tol: float = 0.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")
        if self.pivot_tol < 0:
            raise ValueError("pivot_tol must be nonnegative")


class Verdict(enum.Enum):
    NOT_REDUCING = "not_reducing"
    DELETE_ZERO = "delete_zero"
    REDUCE = "reduce"
    INFEASIBLE = "infeasible"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    sign: int = 1
    support: tuple[Coordinate, ...] = ()

    @property
    def actionable(self) -> bool:
        return self.verdict in (Verdict.REDUCE, Verdict.DELETE_ZERO, Verdict.INFEASIBLE)


_NOT_REDUCING = Classification(Verdict.NOT_REDUCING)


class SieveIterationLimit(RuntimeError):
    """Raised when ``max_iterations`` steps were taken and another was found."""

    def __init__(self, state: "SieveState"):
        super().__init__(f"sieve stopped after {len(state.steps)} steps (max_iterations reached)")
        self.state = state

    @property
    def steps(self) -> list[ReductionStep]:
        return list(self.state.steps)


class SieveState:
    """Mutable deletion bookkeeping for one sieve run.

    ``undeleted[j]`` is False once constraint ``j`` is removed and
    ``active[g]`` is False once global coordinate ``g`` is removed.
    ``touched[j]`` holds the live rows appearing in ``A_j``; the inverse map
    ``users`` lets a deletion invalidate exactly the constraints it affects.
    """

    def __init__(self, problem: SdpProblem, options: SieveOptions | None = None):
        self.problem = problem
        self.options = options or SieveOptions()
        s = problem.structure
        self.coords = list(s.coordinates())
        self.undeleted = np.ones(problem.m, dtype=bool)
        self.active = np.ones(s.n, dtype=bool)
        self.steps: list[ReductionStep] = []
        # b scale is frozen at the original data
        b = problem.b
        self.scale = max(float(np.max(np.abs(b))) if b.size else 0.0, 1.0)
        if self.options.safe_mode:
            self.zero_tol = self.options.eps * self.scale
            self.infeas_tol = math.sqrt(self.options.eps) * self.scale
        else:
            self.zero_tol = self.infeas_tol = 0.0

        offs = s.offsets
        self._entries: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self.touched: list[set[int]] = []
        self.users: dict[int, set[int]] = {}
        for j, con in enumerate(problem.constraints):
            items = list(con.A.items())
            gi = np.fromiter((offs[b] + i for (b, i, _), _v in items), dtype=np.int64, count=len(items))
            gj = np.fromiter((offs[b] + jj for (b, _, jj), _v in items), dtype=np.int64, count=len(items))
            vals = np.fromiter((v for _k, v in items), dtype=float, count=len(items))
            self._entries.append((gi, gj, vals))
            rows = set(gi.tolist()) | set(gj.tolist())
            self.touched.append(rows)
            for r in rows:
                self.users.setdefault(r, set()).add(j)
        self._cache: dict[int, Classification] = {}
        self._invalidated: set[int] = set()
        self.passes = 0
        self.classifications = 0
        self.cholesky_calls = 0

    @property
    def terminal(self) -> bool:
        return bool(self.steps) and self.steps[-1].kind is StepKind.INFEASIBLE

    def is_active(self, coord: Coordinate) -> bool:
        return bool(self.active[self.problem.structure.global_index(coord)])

    def indicator(self) -> np.ndarray:
        """Dense ``n x (m+1)`` usage table: column ``j`` marks live rows of ``A_j``,
        the last column marks rows still live anywhere."""
        n, m = self.problem.structure.n, self.problem.m
        out = np.zeros((n, m + 1), dtype=np.int8)
        for j, rows in enumerate(self.touched):
            if self.undeleted[j]:
                out[list(rows), j] = 1
        out[:, m] = self.active
        return out

    def live_submatrix(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Global indices of the live support of ``A_i`` and the dense submatrix there."""
        gi, gj, vals = self._entries[i]
        if gi.size:
            keep = self.active[gi] & self.active[gj]
            gi, gj, vals = gi[keep], gj[keep], vals[keep]
        if gi.size == 0:
            return np.zeros(0, dtype=np.int64), np.zeros((0, 0))
        idx = np.unique(np.concatenate([gi, gj]))
        pi = np.searchsorted(idx, gi)
        pj = np.searchsorted(idx, gj)
        D = np.zeros((idx.size, idx.size))
        D[pi, pj] = vals
        D[pj, pi] = vals
        return idx, D


def constraint_support(state: SieveState, i: int) -> list[Coordinate]:
    """Live coordinates where ``A_i`` has a stored entry, in canonical order."""
    idx, _ = state.live_submatrix(i)
    return [state.coords[g] for g in idx.tolist()]


def classify_constraint(state: SieveState, i: int) -> Classification:
    """Decide whether undeleted constraint ``i`` is reducing under the current mask."""
    if not state.undeleted[i]:
        raise ValueError(f"constraint {i} is already deleted")
    cached = state._cache.get(i)
    if cached is not None:
        return cached
    result = _classify(state, i)
    state._cache[i] = result
    return result


def _classify(state: SieveState, i: int) -> Classification:
    state.classifications += 1
    con: Constraint = state.problem.constraints[i]
    if con.touches_free():
        return _NOT_REDUCING
    b = con.b
    zero_tol, infeas_tol = state.zero_tol, state.infeas_tol
    idx, D = state.live_submatrix(i)
    if idx.size == 0:
        if abs(b) <= zero_tol:
            return Classification(Verdict.DELETE_ZERO)
        return Classification(Verdict.INFEASIBLE, 1 if b < 0 else -1)

    # at most one sign can make D positive definite; its diagonal decides which
    d0 = D[0, 0]
    if d0 == 0.0:
        return _NOT_REDUCING
    sign = 1 if d0 > 0 else -1
    diag = np.diagonal(D) * sign
    if not np.all(diag > 0):
        return _NOT_REDUCING
    state.cholesky_calls += 1
    if not pd_check(sign * D if sign < 0 else D, state.options.pivot_tol):
        return _NOT_REDUCING

    support = tuple(state.coords[g] for g in idx.tolist())
    sb = sign * b
    if -zero_tol < sb <= zero_tol:
        return Classification(Verdict.REDUCE, sign, support)
    if sb < -infeas_tol:
        return Classification(Verdict.INFEASIBLE, sign, support)
    if sb <= -zero_tol:
        if state.options.safe_mode:
            return Classification(Verdict.AMBIGUOUS, sign, support)
        return Classification(Verdict.REDUCE, sign, support)
    return _NOT_REDUCING


def step_for(state: SieveState, i: int, cls: Classification) -> ReductionStep:
    kinds = {Verdict.REDUCE: StepKind.REDUCE_PSD, Verdict.DELETE_ZERO: StepKind.DELETE_ZERO,
             Verdict.INFEASIBLE: StepKind.INFEASIBLE}
    if cls.verdict not in kinds:
        raise ValueError(f"verdict {cls.verdict.value} does not produce a step")
    return ReductionStep(kinds[cls.verdict], i, cls.sign, cls.support, state.problem.constraints[i].b)


def apply_reduction(state: SieveState, step: ReductionStep) -> SieveState:
    """Mark the step's constraint and support deleted and record the step."""
    if state.terminal:
        raise ValueError("state already certified infeasible")
    i = step.constraint
    if not state.undeleted[i]:
        raise ValueError(f"constraint {i} is already deleted")
    state.steps.append(step)
    if step.kind is StepKind.INFEASIBLE:
        return state
    state.undeleted[i] = False
    state._cache.pop(i, None)
    for r in state.touched[i]:
        state.users[r].discard(i)
    state.touched[i] = set()
    if step.kind is StepKind.REDUCE_PSD:
        s = state.problem.structure
        for c in step.support:
            g = s.global_index(c)
            if not state.active[g]:
                raise ValueError(f"coordinate {tuple(c)} is already deleted")
            state.active[g] = False
            for j in state.users.pop(g, ()):
                state.touched[j].discard(g)
                state._cache.pop(j, None)
                state._invalidated.add(j)
    return state


def _shrink(M: SymBlockMatrix, cert: Certificate) -> SymBlockMatrix:
    cmap = cert.coordinate_map
    out = {}
    for (b, i, j), v in M.items():
        ci = cmap.get(Coordinate(b, i))
        if ci is None:
            continue
        cj = cmap.get(Coordinate(b, j))
        if cj is None:
            continue
        out[(ci.block, ci.row, cj.row)] = v
    return SymBlockMatrix(cert.reduced_structure, out)


def compact(problem: SdpProblem, cert: Certificate) -> SdpProblem:
    """Physically remove the certificate's deleted coordinates and constraints."""
    kept = [con for j, con in enumerate(problem.constraints) if j in cert.constraint_map]
    cons = tuple(Constraint(_shrink(con.A, cert), con.b, con.free) for con in kept)
    return SdpProblem(cert.reduced_structure, _shrink(problem.C, cert), cons, problem.free_objective)


def materialize(state: SieveState) -> tuple[SdpProblem, Certificate]:
    """Compact the problem per the state's deletions; returns it with the certificate."""
    p = state.problem
    cert = Certificate.build(p.structure, p.m, state.steps)
    return compact(p, cert), cert


def sieve(problem: SdpProblem, options: SieveOptions | None = None) -> SieveOutcome:
    """Run the sieve to a fixpoint.

    Undeleted constraints are scanned in increasing index order and the first
    actionable one is applied, after which scanning restarts from the lowest
    constraint whose classification may have changed.  Cached verdicts make
    this equivalent to restarting from index 0.
    """
    state = SieveState(problem, options)
    return run(state)


def run(state: SieveState) -> SieveOutcome:
    opts = state.options
    m = state.problem.m
    start = 0
    while True:
        state.passes += 1
        found = None
        for i in range(start, m):
            if not state.undeleted[i]:
                continue
            cls = classify_constraint(state, i)
            if cls.actionable:
                found = (i, cls)
                break
        if found is None:
            break
        i, cls = found
        if opts.max_iterations is not None and len(state.steps) >= opts.max_iterations:
            raise SieveIterationLimit(state)
        state._invalidated.clear()
        apply_reduction(state, step_for(state, i, cls))
        if state.terminal:
            return SieveOutcome(Certificate.build(state.problem.structure, m, state.steps))
        start = min(min(state._invalidated, default=i + 1), i + 1)
    reduced, cert = materialize(state)
    return SieveOutcome(cert, reduced)


def check_certificate(problem: SdpProblem, cert: Certificate, options: SieveOptions | None = None) -> list[str]:
    """Replay ``cert`` on ``problem`` and report every step the sieve would not take.

    Each step must be what the classifier says about its constraint under the
    mask left by the preceding steps.  Scan order is not checked.
    """
    issues = []
    if cert.structure != problem.structure or cert.m != problem.m:
        return [f"certificate is for {cert.structure.describe()} m={cert.m}, "
                f"problem is {problem.structure.describe()} m={problem.m}"]
    state = SieveState(problem, options)
    for k, step in enumerate(cert.steps):
        if not state.undeleted[step.constraint]:
            issues.append(f"step {k}: constraint {step.constraint} already deleted")
            break
        cls = classify_constraint(state, step.constraint)
        expected = {Verdict.REDUCE: StepKind.REDUCE_PSD, Verdict.DELETE_ZERO: StepKind.DELETE_ZERO,
                    Verdict.INFEASIBLE: StepKind.INFEASIBLE}.get(cls.verdict)
        if expected is not step.kind or cls.sign != step.sign or cls.support != step.support:
            issues.append(f"step {k}: constraint {step.constraint} classifies as {cls.verdict.value} "
                          f"(sign {cls.sign}, support {len(cls.support)}), certificate says {step.kind.value}")
            break
        if step.b != problem.constraints[step.constraint].b:
            issues.append(f"step {k}: recorded b {step.b!r} differs from problem b")
            break
        apply_reduction(state, step)
    return issues
