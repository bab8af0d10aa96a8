"""Recovering solutions of the original problem from those of the sieved one."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .linalg import pd_check
from .model import BlockStructure, Certificate, Coordinate, SdpProblem, StepKind, SymBlockMatrix, linear_combination
from .sieve import _shrink

FREE_TOL = 1e-9


@dataclass(frozen=True)
class RecoveryOptions:
    shift: float = 1e-6

    def __post_init__(self):
        if not self.shift > 0:
            raise ValueError(f"shift must be positive, got {self.shift}")


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    """``y`` on success; otherwise ``failed_step`` names the certificate step that
    could not be given a multiplier (``None`` when no single step is to blame)."""

    y: np.ndarray | None
    failed_step: int | None = None

    @property
    def ok(self) -> bool:
        return self.y is not None


def pad_primal(X_reduced: SymBlockMatrix, cert: Certificate) -> SymBlockMatrix:
    """Embed a reduced primal matrix into the original structure, zeros elsewhere."""
    if X_reduced.structure != cert.reduced_structure:
        raise ValueError(f"X has structure {X_reduced.structure.describe()}, "
                         f"certificate expects {cert.reduced_structure.describe()}")
    back = {v: k for k, v in cert.coordinate_map.items()}
    out = {}
    for (b, i, j), v in X_reduced.items():
        oi, oj = back[Coordinate(b, i)], back[Coordinate(b, j)]
        out[(oi.block, oi.row, oj.row)] = v
    return SymBlockMatrix(cert.structure, out)


def restrict_primal(X: SymBlockMatrix, cert: Certificate) -> SymBlockMatrix:
    """Drop the deleted rows/columns of an original-size primal matrix."""
    if X.structure != cert.structure:
        raise ValueError("X does not conform to the certificate's original structure")
    return _shrink(X, cert)


def _slack_ok(structure: BlockStructure, blocks: list[np.ndarray], shift: float,
              alive: list[np.ndarray] | None = None) -> bool:
    for b, blk in enumerate(blocks):
        if alive is not None:
            rows = alive[b]
            if rows.size == 0:
                continue
            blk = blk[np.ix_(rows, rows)]
        if structure.is_nonneg(b):
            if not blk[0, 0] > -shift:
                return False
        elif not pd_check(blk + shift * np.eye(blk.shape[0])):
            return False
    return True


def _free_ok(problem: SdpProblem, y: np.ndarray) -> bool:
    f = problem.structure.free_count
    if f == 0:
        return True
    F = np.array([c.free for c in problem.constraints], dtype=float).reshape(problem.m, f)
    return bool(np.all(np.abs(F.T @ y - np.asarray(problem.free_objective)) <= FREE_TOL))


def dual_slack_pd(problem: SdpProblem, y: Sequence[float], shift: float = 1e-6) -> bool:
    """Whether ``C - sum_i y_i A_i + shift*I`` is positive definite blockwise.

    Nonnegative scalars need slack above ``-shift``; free variables need the
    dual equality to hold within 1e-9.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (problem.m,):
        raise ValueError(f"y has shape {y.shape}, expected ({problem.m},)")
    blocks = linear_combination(problem.structure, -y, problem.A, base=problem.C)
    return _slack_ok(problem.structure, blocks, shift) and _free_ok(problem, y)


def _linesearch(ok: Callable[[float], bool]) -> float | None:
    for v in (0.0, -1.0, -2.0):
        if ok(v):
            return v
    if not ok(-100.0):
        return None
    for v in range(-3, -100, -1):
        if ok(float(v)):
            return float(v)
    return -100.0


def _embed_reduced_y(cert: Certificate, y_reduced: Sequence[float]) -> np.ndarray:
    if cert.infeasible:
        raise ValueError("cannot recover a dual solution from an infeasibility certificate")
    y_reduced = np.asarray(y_reduced, dtype=float).reshape(-1)
    if y_reduced.shape[0] != len(cert.constraint_map):
        raise ValueError(f"y_reduced has length {y_reduced.shape[0]}, "
                         f"reduced problem has {len(cert.constraint_map)} constraints")
    y = np.zeros(cert.m)
    for orig, red in cert.constraint_map.items():
        y[orig] = y_reduced[red]
    return y


def _kept(cert: Certificate) -> np.ndarray:
    return np.array(sorted(cert.constraint_map), dtype=np.int64)


def basic_recovery(problem: SdpProblem, cert: Certificate, y_reduced: Sequence[float],
                   options: RecoveryOptions | None = None) -> RecoveryResult:
    """Extend a reduced dual solution one deleted constraint at a time.

    Steps are undone last-first.  Undoing step ``t`` restores its constraint
    on the problem that still lacks the coordinates removed by steps
    ``0..t-1``, and an integer linesearch over the constraint's multiplier
    (oriented so the restored matrix is PSD) tries 0, -1, -2, then -100; when
    only -100 works, the largest working value in -3 ... -100 is kept.
    Multipliers already fixed are never revisited.
    """
    options = options or RecoveryOptions()
    if cert.structure != problem.structure or cert.m != problem.m:
        raise ValueError("certificate does not match the problem")
    y = _embed_reduced_y(cert, y_reduced)
    s = problem.structure
    kept = _kept(cert)
    base = linear_combination(s, -y[kept], [problem.constraints[j].A for j in kept], base=problem.C)
    free_ok = _free_ok(problem, y)

    # alive rows per block before each step, built by undoing deletions from the end
    dead: set[Coordinate] = set(cert.deleted_coordinates)
    for t in range(len(cert.steps) - 1, -1, -1):
        step = cert.steps[t]
        if step.kind is StepKind.DELETE_ZERO:
            y[step.constraint] = 0.0
            continue
        dead.difference_update(step.support)
        alive = [np.array([r for r in range(k) if Coordinate(b, r) not in dead], dtype=np.int64)
                 for b, k in enumerate(s.orders)]
        Aj = problem.constraints[step.constraint].A.scaled(float(step.sign)).dense_blocks()

        def ok(u: float) -> bool:
            trial = [Bb - u * Ab for Bb, Ab in zip(base, Aj)]
            return free_ok and _slack_ok(s, trial, options.shift, alive)

        u = _linesearch(ok)
        if u is None:
            return RecoveryResult(None, t)
        y[step.constraint] = step.sign * u
        if u != 0.0:
            base = [Bb - u * Ab for Bb, Ab in zip(base, Aj)]
    return RecoveryResult(y)


# (deleted constraint matrices, dense blocks of C - sum over kept y_i A_i, structure) -> multipliers or None
IdealSolver = Callable[[list[SymBlockMatrix], list[np.ndarray], BlockStructure], "Sequence[float] | None"]


def ideal_recovery_hook(problem: SdpProblem, cert: Certificate, y_reduced: Sequence[float],
                        solver: IdealSolver | None = None,
                        options: RecoveryOptions | None = None) -> RecoveryResult:
    """Delegate the joint search over all deleted multipliers to ``solver``.

    Only assembly and verification happen here: the returned point must pass
    :func:`dual_slack_pd` on the original problem.
    """
    if solver is None:
        raise NotImplementedError("ideal recovery needs an external SDP feasibility solver callback")
    options = options or RecoveryOptions()
    y = _embed_reduced_y(cert, y_reduced)
    targets = [st.constraint for st in cert.steps if st.kind is StepKind.REDUCE_PSD]
    kept = _kept(cert)
    fixed = linear_combination(problem.structure, -y[kept], [problem.constraints[j].A for j in kept],
                               base=problem.C)
    got = solver([problem.constraints[j].A for j in targets], fixed, problem.structure)
    if got is None:
        return RecoveryResult(None)
    got = np.asarray(got, dtype=float).reshape(-1)
    if got.shape[0] != len(targets):
        return RecoveryResult(None)
    y[np.array(targets, dtype=np.int64)] = got
    if not dual_slack_pd(problem, y, options.shift):
        return RecoveryResult(None)
    return RecoveryResult(y)
