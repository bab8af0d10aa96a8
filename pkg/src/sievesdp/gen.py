"""Worked instances and seeded instance families with known answers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import (
    BlockStructure,
    Constraint,
    Coordinate,
    SdpProblem,
    Solution,
    SymBlockMatrix,
    inner_product,
)

# The similarity matrix used to obfuscate the positive-gap example.
OBFUSCATION_T = np.array([[3.0, 5.0, -2.0], [4.0, 1.0, 1.0], [-4.0, -4.0, 5.0]])


def _example_constraints(s: BlockStructure) -> list[SymBlockMatrix]:
    A1 = SymBlockMatrix(s, {(0, 0, 0): 1.0})
    A2 = SymBlockMatrix(s, {(0, 0, 2): 1.0, (0, 1, 1): 1.0})
    return [A1, A2]


def gen_example1() -> SdpProblem:
    """The 3x3 infeasible instance: ``x11 = 0`` and ``2 x13 + x22 = -1``; zero objective."""
    s = BlockStructure((3,))
    return SdpProblem.create(s, None, _example_constraints(s), [0.0, -1.0])


def gen_posgap() -> SdpProblem:
    """Same constraints with right-hand side (0, 1) and ``C = diag(1, 1, 0)``.

    Primal optimum is 1 (at ``diag(0, 1, 0)``) while the dual optimum is 0.
    """
    s = BlockStructure((3,))
    C = SymBlockMatrix(s, {(0, 0, 0): 1.0, (0, 1, 1): 1.0})
    return SdpProblem.create(s, C, _example_constraints(s), [0.0, 1.0])


def posgap_optimal_pair(y1: float = 0.0) -> Solution:
    """Primal optimum ``diag(0, 1, 0)`` with the dual-feasible ``y = (y1, 0)``, ``y1 <= 1``."""
    s = BlockStructure((3,))
    return Solution(SymBlockMatrix(s, {(0, 1, 1): 1.0}), np.array([y1, 0.0]))


def gen_posgap_eps(eps: float) -> SymBlockMatrix:
    """Near-feasible fake solution of the positive-gap instance with objective ``2*eps``.

    The corner entry is the smallest value keeping the matrix PSD,
    ``(1 - eps)^2 / (4 eps)``.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    s = BlockStructure((3,))
    half = (1.0 - eps) / 2.0
    corner = (1.0 - eps) ** 2 / (4.0 * eps)
    return SymBlockMatrix(s, {(0, 0, 0): eps, (0, 1, 1): eps, (0, 0, 2): half, (0, 2, 2): corner})


def _block_transforms(structure: BlockStructure, T) -> list[np.ndarray]:
    if isinstance(T, (list, tuple)):
        mats = [np.atleast_2d(np.asarray(t, dtype=float)) for t in T]
        if len(mats) != structure.num_blocks:
            raise ValueError(f"expected {structure.num_blocks} block transforms, got {len(mats)}")
        for b, (t, k) in enumerate(zip(mats, structure.orders)):
            if t.shape != (k, k):
                raise ValueError(f"block {b}: transform has shape {t.shape}, expected {(k, k)}")
        return mats
    T = np.asarray(T, dtype=float)
    n = structure.n
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"T must be square, got shape {T.shape}")
    if T.shape != (n, n):
        raise ValueError(f"T has order {T.shape[0]}, problem has order {n}")
    mats, mask = [], np.zeros((n, n), dtype=bool)
    for off, k in zip(structure.offsets, structure.orders):
        mats.append(T[off:off + k, off:off + k].copy())
        mask[off:off + k, off:off + k] = True
    if np.any(T[~mask] != 0.0):
        raise ValueError("T must be block diagonal conforming to the problem's blocks")
    return mats


def similarity_transform(problem: SdpProblem, T) -> SdpProblem:
    """Replace ``C`` and every ``A_i`` by ``T^T M T`` (blockwise); ``b`` is unchanged.

    ``T`` is a dense block-diagonal ``n x n`` matrix or a list of per-block
    matrices.  Exact zeros of the result are dropped.
    """
    s = problem.structure
    mats = _block_transforms(s, T)
    for b, t in enumerate(mats):
        if np.linalg.matrix_rank(t) < t.shape[0]:
            raise ValueError(f"block {b} transform is singular")

    def tr(M: SymBlockMatrix) -> SymBlockMatrix:
        return SymBlockMatrix.from_blocks(s, [t.T @ blk @ t for t, blk in zip(mats, M.dense_blocks())])

    cons = tuple(Constraint(tr(c.A), c.b, c.free) for c in problem.constraints)
    return SdpProblem(s, tr(problem.C), cons, problem.free_objective)


def random_congruence(rng: np.random.Generator, structure: BlockStructure, max_entry: int = 3,
                      max_cond: float = 1e3) -> list[np.ndarray]:
    """Per-block integer matrices with no zero entries and bounded condition number.

    Integer data keeps the transformed matrices exactly representable.
    """
    out = []
    choices = np.array([v for v in range(-max_entry, max_entry + 1) if v != 0], dtype=float)
    for k in structure.orders:
        for _ in range(10_000):
            t = rng.choice(choices, size=(k, k))
            if np.linalg.matrix_rank(t) == k and np.linalg.cond(t) <= max_cond:
                break
        else:
            raise RuntimeError(f"could not draw a well-conditioned order-{k} transform")
        out.append(t)
    return out


def random_unimodular(rng: np.random.Generator, m: int, ops: int | None = None) -> np.ndarray:
    """Product of random elementary row operations (row_i += k row_j, swaps)."""
    U = np.eye(m, dtype=np.int64)
    if m < 2:
        return U
    for _ in range(ops if ops is not None else 2 * m):
        i, j = rng.choice(m, size=2, replace=False)
        if rng.random() < 0.2:
            U[[i, j]] = U[[j, i]]
        else:
            U[i] += int(rng.choice([-2, -1, 1, 2])) * U[j]
    return U


@dataclass(frozen=True, eq=False)
class MessyInstance:
    problem: SdpProblem
    row_ops: np.ndarray
    transforms: list[np.ndarray]


def combine_rows(problem: SdpProblem, U: np.ndarray) -> SdpProblem:
    """Constraints replaced by ``U``-combinations: ``A'_i = sum_j U_ij A_j``, ``b' = U b``."""
    U = np.asarray(U)
    m = problem.m
    if U.shape != (m, m):
        raise ValueError(f"row operation matrix must be {m}x{m}")
    s = problem.structure
    cons = []
    for i in range(m):
        acc: dict = {}
        for j in range(m):
            u = float(U[i, j])
            if u == 0.0:
                continue
            for key, v in problem.constraints[j].A.items():
                acc[key] = acc.get(key, 0.0) + u * v
        A = SymBlockMatrix(s, {k: v for k, v in acc.items() if v != 0.0})
        b = float(sum(float(U[i, j]) * problem.constraints[j].b for j in range(m)))
        free = tuple(float(v) for v in sum((float(U[i, j]) * np.asarray(problem.constraints[j].free, dtype=float)
                                            for j in range(m)), np.zeros(s.free_count)))
        cons.append(Constraint(A, b, free))
    return SdpProblem(s, problem.C, tuple(cons), problem.free_objective)


def gen_messy(problem: SdpProblem, seed: int) -> MessyInstance:
    """Obfuscate ``problem`` by unimodular row operations and a random integer similarity."""
    rng = np.random.default_rng(seed)
    U = random_unimodular(rng, problem.m)
    Ts = random_congruence(rng, problem.structure)
    return MessyInstance(similarity_transform(combine_rows(problem, U), Ts), U, Ts)


@dataclass(frozen=True, eq=False)
class PlantRecord:
    """Where the reducing constraints were planted.

    ``constraints[j]`` has support ``supports[j]`` and sign ``signs[j]``; with
    ``chain`` set, plant ``j`` only becomes reducing once plant ``j-1`` is
    gone.  When ``infeasible`` is set the last plant has a negative
    right-hand side and depends on every other plant.
    """

    constraints: tuple[int, ...]
    supports: tuple[tuple[Coordinate, ...], ...]
    signs: tuple[int, ...]
    chain: bool = False
    infeasible: bool = False
    feasible_point: SymBlockMatrix | None = None

    @property
    def infeasible_constraint(self) -> int | None:
        return self.constraints[-1] if self.infeasible else None

    @property
    def deleted_constraints(self) -> frozenset:
        cons = self.constraints[:-1] if self.infeasible else self.constraints
        return frozenset(cons)

    @property
    def deleted_coordinates(self) -> frozenset:
        sups = self.supports[:-1] if self.infeasible else self.supports
        return frozenset(c for sup in sups for c in sup)


def _place_supports(rng, structure: BlockStructure, sizes: Sequence[int]) -> list[tuple[Coordinate, ...]]:
    free_rows = {b: list(range(k)) for b, k in enumerate(structure.orders)}
    budget = structure.n - sum(sizes)
    if budget < 2:
        raise ValueError("plants leave fewer than two coordinates for the fillers")
    supports = []
    for size in sizes:
        blocks = [b for b, rows in free_rows.items() if len(rows) >= size]
        if not blocks:
            raise ValueError(f"no block has room for a support of size {size}")
        b = int(rng.choice(blocks))
        picked = sorted(int(r) for r in rng.choice(free_rows[b], size=size, replace=False))
        free_rows[b] = [r for r in free_rows[b] if r not in picked]
        supports.append(tuple(Coordinate(b, r) for r in picked))
    return supports


def gen_planted(seed: int, n: int | None = None, m: int = 10, k: int = 3, *,
                blocks: Sequence[int] | None = None, nonneg: int = 0,
                support_sizes: Sequence[int] | None = None, max_support: int = 3,
                chain: bool = False, infeasible: bool = False,
                filler_entries: int = 6) -> tuple[SdpProblem, PlantRecord]:
    """Random problem with ``k`` reducing constraints hidden among ``m - k`` fillers.

    Plants are diagonally dominant definite matrices on disjoint supports with
    ``b = 0``.  Every filler has a positive and a negative diagonal entry on
    two never-planted coordinates, so it stays indefinite whatever is
    deleted.  Unless ``infeasible``, the filler right-hand sides are computed
    from a PSD point vanishing on the plants, which the record keeps.
    """
    rng = np.random.default_rng(seed)
    if blocks is None:
        if n is None:
            raise ValueError("give n or blocks")
        blocks = (n - nonneg,) if n - nonneg > 0 else ()
    s = BlockStructure(tuple(blocks), nonneg)
    if n is not None and s.n != n:
        raise ValueError(f"blocks describe order {s.n}, n = {n}")
    n = s.n
    if k < 0 or k > min(m, n):
        raise ValueError(f"need 0 <= k <= min(m, n), got k={k}, m={m}, n={n}")
    if infeasible and k == 0:
        raise ValueError("an infeasible family needs at least one plant")
    if support_sizes is None:
        support_sizes = [int(rng.integers(1, max_support + 1)) for _ in range(k)]
    if len(support_sizes) != k:
        raise ValueError("support_sizes must have k entries")
    supports = _place_supports(rng, s, support_sizes)
    planted = {c for sup in supports for c in sup}
    unplanted = [c for c in s.coordinates() if c not in planted]

    slots = [int(v) for v in rng.permutation(m)]
    plant_idx, filler_idx = slots[:k], slots[k:]

    mats: dict[int, SymBlockMatrix] = {}
    signs = []
    for j, (ci, sup) in enumerate(zip(plant_idx, supports)):
        sign = int(rng.choice([-1, 1]))
        signs.append(sign)
        b = sup[0].block
        rows = [c.row for c in sup]
        r = len(rows)
        off = np.triu(rng.uniform(-1.0, 1.0, size=(r, r)), 1)
        off = off + off.T
        D = off + np.diag(np.abs(off).sum(axis=1) + rng.uniform(0.5, 2.0, size=r))
        entries = {(b, rows[p], rows[q]): sign * float(D[p, q]) for p in range(r) for q in range(p, r)
                   if D[p, q] != 0.0}
        # a negative diagonal on earlier plants' rows blocks reduction until they are deleted
        deps = []
        if infeasible and j == k - 1:
            deps = supports[:j]
        elif chain and j > 0:
            deps = [supports[j - 1]]
        for dep in deps:
            c = dep[int(rng.integers(len(dep)))]
            entries[(c.block, c.row, c.row)] = -sign * float(rng.uniform(0.5, 2.0))
        mats[ci] = SymBlockMatrix(s, entries)

    for ci in filler_idx:
        p, q = rng.choice(len(unplanted), size=2, replace=False)
        cp, cq = unplanted[int(p)], unplanted[int(q)]
        entries = {(cp.block, cp.row, cp.row): float(rng.uniform(0.5, 2.0)),
                   (cq.block, cq.row, cq.row): -float(rng.uniform(0.5, 2.0))}
        for _ in range(int(rng.integers(0, filler_entries + 1))):
            b = int(rng.integers(s.num_blocks))
            i, jj = sorted(int(v) for v in rng.integers(s.orders[b], size=2))
            key = (b, i, jj)
            if key not in entries:
                v = float(rng.uniform(-1.0, 1.0))
                if v != 0.0:
                    entries[key] = v
        mats[ci] = SymBlockMatrix(s, entries)

    C_entries = {}
    for _ in range(int(rng.integers(1, 2 * n + 1))):
        b = int(rng.integers(s.num_blocks))
        i, jj = sorted(int(v) for v in rng.integers(s.orders[b], size=2))
        C_entries[(b, i, jj)] = float(rng.uniform(-1.0, 1.0)) or 1.0
    C = SymBlockMatrix(s, C_entries)

    X0 = _feasible_point(rng, s, planted)
    rhs = {ci: 0.0 for ci in plant_idx}
    if infeasible:
        rhs[plant_idx[-1]] = -signs[-1] * float(rng.uniform(1.0, 8.0))
        for ci in filler_idx:
            rhs[ci] = float(rng.uniform(-1.0, 1.0))
    else:
        for ci in filler_idx:
            rhs[ci] = inner_product(mats[ci], X0)
    problem = SdpProblem.create(s, C, [mats[i] for i in range(m)], [rhs[i] for i in range(m)])
    record = PlantRecord(tuple(plant_idx), tuple(supports), tuple(signs), chain, infeasible,
                         None if infeasible else X0)
    return problem, record


def _feasible_point(rng, s: BlockStructure, planted: set) -> SymBlockMatrix:
    blocks = []
    for b, k in enumerate(s.orders):
        live = [r for r in range(k) if Coordinate(b, r) not in planted]
        blk = np.zeros((k, k))
        if live:
            G = rng.normal(size=(len(live), len(live)))
            blk[np.ix_(live, live)] = G @ G.T / len(live) + 0.1 * np.eye(len(live))
        blocks.append(blk)
    return SymBlockMatrix.from_blocks(s, blocks)


def gen_diagonal_pair(seed: int, m: int = 4, blocks: Sequence[int] = (2, 3), nonneg: int = 2):
    """Feasible diagonal problem with a known zero-gap optimal pair.

    Complementary diagonal ``X`` and ``Z`` are drawn first; then
    ``C = A*(y) + Z`` and ``b = A(X)``.
    """
    rng = np.random.default_rng(seed)
    s = BlockStructure(tuple(blocks), nonneg)
    n = s.n
    x = np.zeros(n)
    z = np.zeros(n)
    for g in range(n):
        r = rng.random()
        if r < 0.45:
            x[g] = rng.uniform(0.5, 2.0)
        elif r < 0.9:
            z[g] = rng.uniform(0.5, 2.0)
    y = rng.uniform(-2.0, 2.0, size=m)
    A_diag = rng.uniform(-1.0, 1.0, size=(m, n)) * (rng.random((m, n)) < 0.7)

    def diag_mat(d) -> SymBlockMatrix:
        entries = {}
        for g, v in enumerate(d):
            if v != 0.0:
                c = s.coordinate(g)
                entries[(c.block, c.row, c.row)] = float(v)
        return SymBlockMatrix(s, entries)

    A = [diag_mat(A_diag[i]) for i in range(m)]
    C = diag_mat(A_diag.T @ y + z)
    X = diag_mat(x)
    b = [inner_product(Ai, X) for Ai in A]
    return SdpProblem.create(s, C, A, b), Solution(X, y)
