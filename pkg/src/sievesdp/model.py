"""Core data types for block-structured SDPs in primal standard form.

The primal problem is::

    inf  C . X + c_f . x_f
    s.t. A_i . X + a_i . x_f = b_i    (i = 0, ..., m-1)
         X block diagonal, PSD blocks PSD, nonnegative scalars >= 0

Nonnegative scalars are stored as order-1 blocks placed after the PSD blocks,
so a single ``(block, row)`` address covers every cone coordinate.  Free
variables live outside the matrix and carry plain coefficient vectors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np


class Coordinate(NamedTuple):
    """A row/column of the block-diagonal variable matrix."""

    block: int
    row: int


@dataclass(frozen=True)
class BlockStructure:
    psd_blocks: tuple[int, ...] = ()
    nonneg_count: int = 0
    free_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "psd_blocks", tuple(int(k) for k in self.psd_blocks))
        if any(k < 1 for k in self.psd_blocks):
            raise ValueError(f"PSD block orders must be >= 1, got {self.psd_blocks}")
        if self.nonneg_count < 0 or self.free_count < 0:
            raise ValueError("nonneg_count and free_count must be nonnegative")

    @cached_property
    def orders(self) -> tuple[int, ...]:
        """Orders of all blocks, PSD first, then one order-1 block per nonnegative scalar."""
        return self.psd_blocks + (1,) * self.nonneg_count

    @property
    def num_blocks(self) -> int:
        return len(self.orders)

    @property
    def n(self) -> int:
        return sum(self.orders)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        out, acc = [], 0
        for k in self.orders:
            out.append(acc)
            acc += k
        return tuple(out)

    def is_nonneg(self, block: int) -> bool:
        return block >= len(self.psd_blocks)

    def global_index(self, coord: Coordinate) -> int:
        return self.offsets[coord.block] + coord.row

    def coordinate(self, index: int) -> Coordinate:
        """Inverse of :meth:`global_index`."""
        block = int(np.searchsorted(self.offsets, index, side="right")) - 1
        return Coordinate(block, index - self.offsets[block])

    def coordinates(self) -> Iterator[Coordinate]:
        for b, k in enumerate(self.orders):
            for r in range(k):
                yield Coordinate(b, r)

    def contains(self, coord: Coordinate) -> bool:
        return 0 <= coord.block < self.num_blocks and 0 <= coord.row < self.orders[coord.block]

    def describe(self) -> str:
        """The ``f; l; s`` size notation: free count; nonneg count; PSD orders."""
        s = ",".join(str(k) for k in self.psd_blocks) or "0"
        return f"{self.free_count};{self.nonneg_count};{s}"


Key = tuple[int, int, int]


class SymBlockMatrix:
    """Sparse symmetric block-diagonal matrix holding only its upper triangle.

    ``entries`` maps ``(block, i, j)`` with ``i <= j`` to a nonzero value; an
    off-diagonal entry stands for both ``(i, j)`` and ``(j, i)``.  The
    constructor stores what it is given so that :func:`validate` can report
    malformed input; use :meth:`from_triplets` or :meth:`from_dense` to build
    canonical matrices.
    """

    __slots__ = ("structure", "_entries")

    def __init__(self, structure: BlockStructure, entries: Mapping[Key, float] | None = None):
        self.structure = structure
        self._entries = MappingProxyType(dict(entries or {}))

    @classmethod
    def zeros(cls, structure: BlockStructure) -> "SymBlockMatrix":
        return cls(structure)

    @classmethod
    def from_triplets(cls, structure: BlockStructure, triplets: Iterable[tuple[int, int, int, float]]):
        """Build from ``(block, i, j, value)``; lower-triangle keys are mirrored, zeros dropped.

        A key given twice (in either triangle) raises ``ValueError``.
        """
        entries: dict[Key, float] = {}
        for b, i, j, v in triplets:
            if i > j:
                i, j = j, i
            key = (int(b), int(i), int(j))
            if key in entries:
                raise ValueError(f"duplicate entry {key}")
            entries[key] = float(v)
        return cls(structure, {k: v for k, v in entries.items() if v != 0.0})

    @classmethod
    def from_dense(cls, structure: BlockStructure, dense) -> "SymBlockMatrix":
        """Sparsify a dense symmetric ``n x n`` matrix that is block diagonal in ``structure``."""
        a = np.asarray(dense, dtype=float)
        if a.shape != (structure.n, structure.n):
            raise ValueError(f"expected shape {(structure.n, structure.n)}, got {a.shape}")
        if not np.array_equal(a, a.T):
            raise ValueError("matrix is not symmetric")
        mask = np.ones(a.shape, dtype=bool)
        for off, k in zip(structure.offsets, structure.orders):
            mask[off:off + k, off:off + k] = False
        if np.any(a[mask] != 0.0):
            raise ValueError("matrix has entries outside the diagonal blocks")
        entries = {}
        for b, (off, k) in enumerate(zip(structure.offsets, structure.orders)):
            blk = a[off:off + k, off:off + k]
            ii, jj = np.nonzero(np.triu(blk))
            for i, j in zip(ii.tolist(), jj.tolist()):
                entries[(b, i, j)] = float(blk[i, j])
        return cls(structure, entries)

    @classmethod
    def from_blocks(cls, structure: BlockStructure, blocks: Sequence) -> "SymBlockMatrix":
        """Build from one dense array per block (nonneg scalars as 1x1 or plain numbers)."""
        if len(blocks) != structure.num_blocks:
            raise ValueError(f"expected {structure.num_blocks} blocks, got {len(blocks)}")
        entries = {}
        for b, blk in enumerate(blocks):
            a = np.atleast_2d(np.asarray(blk, dtype=float))
            k = structure.orders[b]
            if a.shape != (k, k):
                raise ValueError(f"block {b}: expected shape {(k, k)}, got {a.shape}")
            ii, jj = np.nonzero(np.triu(a))
            for i, j in zip(ii.tolist(), jj.tolist()):
                entries[(b, i, j)] = float(a[i, j])
        return cls(structure, entries)

    @property
    def entries(self) -> Mapping[Key, float]:
        return self._entries

    def items(self):
        return self._entries.items()

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymBlockMatrix):
            return NotImplemented
        return self.structure == other.structure and dict(self._entries) == dict(other._entries)

    def __hash__(self):
        return hash((self.structure, frozenset(self._entries.items())))

    def __repr__(self) -> str:
        return f"SymBlockMatrix({self.structure.describe()}, nnz={len(self)})"

    def full_nnz(self) -> int:
        """Nonzeros of the full symmetric matrix (off-diagonal entries count twice)."""
        return sum(1 if i == j else 2 for (_, i, j) in self._entries)

    def block_dense(self, block: int) -> np.ndarray:
        k = self.structure.orders[block]
        out = np.zeros((k, k))
        for (b, i, j), v in self._entries.items():
            if b == block:
                out[i, j] = v
                out[j, i] = v
        return out

    def dense_blocks(self) -> list[np.ndarray]:
        out = [np.zeros((k, k)) for k in self.structure.orders]
        for (b, i, j), v in self._entries.items():
            out[b][i, j] = v
            out[b][j, i] = v
        return out

    def to_dense(self) -> np.ndarray:
        n = self.structure.n
        out = np.zeros((n, n))
        offs = self.structure.offsets
        for (b, i, j), v in self._entries.items():
            out[offs[b] + i, offs[b] + j] = v
            out[offs[b] + j, offs[b] + i] = v
        return out

    def scaled(self, alpha: float) -> "SymBlockMatrix":
        if alpha == 0.0:
            return SymBlockMatrix(self.structure)
        return SymBlockMatrix(self.structure, {k: alpha * v for k, v in self._entries.items()})

    def support(self) -> list[Coordinate]:
        """Coordinates touched by a stored entry, sorted."""
        rows = set()
        for b, i, j in self._entries:
            rows.add(Coordinate(b, i))
            rows.add(Coordinate(b, j))
        return sorted(rows)


def inner_product(M: SymBlockMatrix, X) -> float:
    """Trace inner product ``M . X`` with ``X`` sparse or dense ``n x n``."""
    total = 0.0
    if isinstance(X, SymBlockMatrix):
        small, big = (M, X) if len(M) <= len(X) else (X, M)
        other = big.entries
        for key, v in small.items():
            w = other.get(key)
            if w is not None:
                total += (v * w) if key[1] == key[2] else 2.0 * v * w
        return total
    x = np.asarray(X, dtype=float)
    offs = M.structure.offsets
    for (b, i, j), v in M.items():
        gi, gj = offs[b] + i, offs[b] + j
        total += v * x[gi, gi] if i == j else v * (x[gi, gj] + x[gj, gi])
    return total


def linear_combination(structure: BlockStructure, coeffs: Sequence[float], mats: Sequence[SymBlockMatrix],
                       base: SymBlockMatrix | None = None) -> list[np.ndarray]:
    """Dense blocks of ``base + sum_i coeffs[i] * mats[i]``."""
    blocks = base.dense_blocks() if base is not None else [np.zeros((k, k)) for k in structure.orders]
    for c, A in zip(coeffs, mats):
        if c == 0.0:
            continue
        for (b, i, j), v in A.items():
            blocks[b][i, j] += c * v
            if i != j:
                blocks[b][j, i] += c * v
    return blocks


@dataclass(frozen=True)
class Constraint:
    A: SymBlockMatrix
    b: float
    free: tuple[float, ...] = ()

    def touches_free(self) -> bool:
        return any(c != 0.0 for c in self.free)


@dataclass(frozen=True)
class SdpProblem:
    structure: BlockStructure
    C: SymBlockMatrix
    constraints: tuple[Constraint, ...]
    free_objective: tuple[float, ...] = ()

    @classmethod
    def create(cls, structure: BlockStructure, C: SymBlockMatrix | None, A: Sequence[SymBlockMatrix],
               b: Sequence[float], free_coeffs: Sequence[Sequence[float]] | None = None,
               free_objective: Sequence[float] | None = None) -> "SdpProblem":
        """Convenience constructor; free-variable data defaults to zeros."""
        if len(A) != len(b):
            raise ValueError(f"{len(A)} constraint matrices but {len(b)} right-hand sides")
        f = structure.free_count
        if free_coeffs is None:
            free_coeffs = [(0.0,) * f for _ in A]
        if free_objective is None:
            free_objective = (0.0,) * f
        cons = tuple(Constraint(Ai, float(bi), tuple(float(c) for c in fi))
                     for Ai, bi, fi in zip(A, b, free_coeffs))
        return cls(structure, C if C is not None else SymBlockMatrix(structure), cons,
                   tuple(float(c) for c in free_objective))

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def b(self) -> np.ndarray:
        return np.array([c.b for c in self.constraints], dtype=float)

    @property
    def A(self) -> list[SymBlockMatrix]:
        return [c.A for c in self.constraints]

    def nnz(self) -> int:
        """Nonzeros over all constraint matrices and free-variable coefficients."""
        return sum(c.A.full_nnz() + sum(1 for v in c.free if v != 0.0) for c in self.constraints)

    def apply(self, X, x_free: Sequence[float] = ()) -> np.ndarray:
        """The constraint map ``A(X)`` (free-variable terms included)."""
        out = np.array([inner_product(c.A, X) for c in self.constraints], dtype=float)
        if len(x_free):
            out += np.array([np.dot(c.free, x_free) if c.free else 0.0 for c in self.constraints])
        return out

    def objective(self, X, x_free: Sequence[float] = ()) -> float:
        val = inner_product(self.C, X)
        if len(x_free):
            val += float(np.dot(self.free_objective, x_free))
        return val


@dataclass(frozen=True, eq=False)
class Solution:
    """An approximate primal-dual pair; ``X`` is ``None`` for dual-only data."""

    X: SymBlockMatrix | None
    y: np.ndarray
    x_free: np.ndarray = field(default_factory=lambda: np.zeros(0))
    Z: SymBlockMatrix | None = None

    def __post_init__(self):
        for name in ("y", "x_free"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


class StepKind(enum.Enum):
    REDUCE_PSD = "reduce"
    DELETE_ZERO = "delete_zero"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class ReductionStep:
    kind: StepKind
    constraint: int
    sign: int
    support: tuple[Coordinate, ...]
    b: float

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(Coordinate(*c) for c in self.support))
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        if self.kind is StepKind.REDUCE_PSD and not self.support:
            raise ValueError("a PSD reduction needs a nonempty support")
        if self.kind is StepKind.DELETE_ZERO and self.support:
            raise ValueError("a zero-constraint deletion has no support")


def compact_layout(structure: BlockStructure, deleted: Iterable[Coordinate]):
    """Structure left after removing ``deleted`` plus the original -> reduced coordinate map.

    Blocks shrink in place; emptied blocks disappear; surviving nonnegative
    scalars stay nonnegative.
    """
    gone = set(deleted)
    psd, nonneg = [], 0
    cmap: dict[Coordinate, Coordinate] = {}
    new_block = 0
    for b, k in enumerate(structure.orders):
        rows = [r for r in range(k) if Coordinate(b, r) not in gone]
        if not rows:
            continue
        for new_r, r in enumerate(rows):
            cmap[Coordinate(b, r)] = Coordinate(new_block, new_r)
        if structure.is_nonneg(b):
            nonneg += 1
        else:
            psd.append(len(rows))
        new_block += 1
    reduced = BlockStructure(tuple(psd), nonneg, structure.free_count)
    return reduced, cmap


def replay(steps: Sequence[ReductionStep]) -> tuple[frozenset, frozenset]:
    """Deleted coordinates and constraints implied by a step sequence.

    Raises ``ValueError`` if a coordinate or constraint is touched twice or an
    infeasibility step is not last.
    """
    coords: set[Coordinate] = set()
    cons: set[int] = set()
    seen: set[int] = set()
    for k, step in enumerate(steps):
        if step.kind is StepKind.INFEASIBLE and k != len(steps) - 1:
            raise ValueError(f"infeasibility step {k} is not the final step")
        if step.constraint in seen:
            raise ValueError(f"constraint {step.constraint} appears in more than one step")
        seen.add(step.constraint)
        if step.kind is StepKind.INFEASIBLE:
            continue
        cons.add(step.constraint)
        if step.kind is StepKind.REDUCE_PSD:
            overlap = coords.intersection(step.support)
            if overlap:
                raise ValueError(f"step {k} deletes already-deleted coordinates {sorted(overlap)}")
            coords.update(step.support)
    return frozenset(coords), frozenset(cons)


@dataclass(frozen=True, eq=False)
class Certificate:
    """Ordered record of sieve steps plus the index maps they induce."""

    steps: tuple[ReductionStep, ...]
    structure: BlockStructure
    m: int
    deleted_coordinates: frozenset
    deleted_constraints: frozenset
    reduced_structure: BlockStructure
    coordinate_map: Mapping[Coordinate, Coordinate]
    constraint_map: Mapping[int, int]

    @classmethod
    def build(cls, structure: BlockStructure, m: int, steps: Sequence[ReductionStep]) -> "Certificate":
        steps = tuple(steps)
        coords, cons = replay(steps)
        for step in steps:
            if not 0 <= step.constraint < m:
                raise ValueError(f"step constraint {step.constraint} out of range for m={m}")
            for c in step.support:
                if not structure.contains(c):
                    raise ValueError(f"step coordinate {tuple(c)} outside structure")
        reduced, cmap = compact_layout(structure, coords)
        kept = [i for i in range(m) if i not in cons]
        return cls(steps, structure, m, coords, cons, reduced,
                   MappingProxyType(cmap), MappingProxyType({i: r for r, i in enumerate(kept)}))

    @property
    def infeasible(self) -> bool:
        return bool(self.steps) and self.steps[-1].kind is StepKind.INFEASIBLE

    def __eq__(self, other) -> bool:
        if not isinstance(other, Certificate):
            return NotImplemented
        return (self.steps == other.steps and self.structure == other.structure and self.m == other.m
                and dict(self.coordinate_map) == dict(other.coordinate_map)
                and dict(self.constraint_map) == dict(other.constraint_map))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SieveOutcome:
    certificate: Certificate
    reduced: SdpProblem | None = None

    @property
    def infeasible(self) -> bool:
        return self.certificate.infeasible

    @property
    def iteration_count(self) -> int:
        return len(self.certificate.steps)


def _matrix_violations(name: str, M: SymBlockMatrix, structure: BlockStructure) -> list[str]:
    out = []
    if M.structure != structure:
        out.append(f"{name}: structure {M.structure.describe()} differs from problem {structure.describe()}")
    for (b, i, j), v in M.items():
        where = f"{name} entry (block={b}, i={i}, j={j})"
        if not 0 <= b < structure.num_blocks:
            out.append(f"{where}: block out of range")
            continue
        k = structure.orders[b]
        if not (0 <= i < k and 0 <= j < k):
            out.append(f"{where}: index out of range for block order {k}")
        if i > j:
            out.append(f"{where}: lower-triangle entry (i > j)")
        if not math.isfinite(v):
            out.append(f"{where}: non-finite value {v}")
        elif v == 0.0:
            out.append(f"{where}: stored zero")
    return out


def validate(problem: SdpProblem) -> list[str]:
    """List every invariant violation in ``problem``; empty means well-formed."""
    s = problem.structure
    out = _matrix_violations("C", problem.C, s)
    if len(problem.free_objective) != s.free_count:
        out.append(f"free objective has length {len(problem.free_objective)}, expected {s.free_count}")
    for idx, con in enumerate(problem.constraints):
        out.extend(_matrix_violations(f"A[{idx}]", con.A, s))
        if len(con.free) != s.free_count:
            out.append(f"A[{idx}]: free coefficients have length {len(con.free)}, expected {s.free_count}")
        if not math.isfinite(con.b):
            out.append(f"b[{idx}] = {con.b} is not finite")
    return out


def validate_solution(problem: SdpProblem, sol: Solution) -> list[str]:
    out = []
    if sol.y.shape[0] != problem.m:
        out.append(f"y has length {sol.y.shape[0]}, expected m = {problem.m}")
    if sol.X is not None:
        out.extend(_matrix_violations("X", sol.X, problem.structure))
    if sol.Z is not None:
        out.extend(_matrix_violations("Z", sol.Z, problem.structure))
    if sol.x_free.shape[0] not in (0, problem.structure.free_count):
        out.append(f"x_free has length {sol.x_free.shape[0]}, expected {problem.structure.free_count}")
    return out
