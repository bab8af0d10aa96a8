"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

import math
import time
from pathlib import Path

import numpy as np

from oracles import mp_min_eigenvalue
from sievesdp.gen import (
    OBFUSCATION_T,
    gen_diagonal_pair,
    gen_example1,
    gen_messy,
    gen_planted,
    gen_posgap,
    gen_posgap_eps,
    posgap_optimal_pair,
    random_congruence,
    similarity_transform,
)
from sievesdp.io import (
    read_certificate,
    read_sdpa,
    read_solution,
    write_certificate,
    write_sdpa,
    write_solution,
)
from sievesdp.linalg import min_eigenvalue, pd_check
from sievesdp.metrics import SIEVE_INFEASIBLE, SolveReport, dimacs_errors, help_code
from sievesdp.model import BlockStructure, Coordinate, SdpProblem, Solution, StepKind, SymBlockMatrix, replay
from sievesdp.recovery import basic_recovery, pad_primal, restrict_primal
from sievesdp.sieve import SieveState, Verdict, classify_constraint, sieve

GOLDEN = Path(__file__).parent / "golden"
RESULTS: dict[int, str] = {}


def record(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def best_time(fn, repeats=50):
    best = math.inf
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def test_criterion_01_example1_infeasible():
    p = gen_example1()
    out = sieve(p)
    steps = out.certificate.steps
    shape_ok = (
        out.infeasible and len(steps) == 2
        and steps[0].kind is StepKind.REDUCE_PSD and steps[0].constraint == 0
        and steps[0].support == (Coordinate(0, 0),)
        and steps[1].kind is StepKind.INFEASIBLE and steps[1].constraint == 1 and steps[1].b == -1.0
    )
    t = best_time(lambda: sieve(p))
    record(1, "Example 1 infeasible in 2 steps", shape_ok and t < 1e-3,
           f"steps={[(s.kind.value, s.constraint) for s in steps]}, best runtime {t * 1e3:.3f} ms")


def test_criterion_02_posgap_reduction_and_recovery():
    p = gen_posgap()
    out = sieve(p)
    red = out.reduced
    shape_ok = (
        red.structure == BlockStructure((2,)) and red.m == 1
        and red.A[0].to_dense().tolist() == [[1.0, 0.0], [0.0, 0.0]]
        and red.b.tolist() == [1.0]
        and red.C.to_dense().tolist() == [[1.0, 0.0], [0.0, 0.0]]
    )
    # reduced optimum: the only feasible X_pre with X_pre[0,0] = 1 and minimal objective
    X_pre = SymBlockMatrix(red.structure, {(0, 0, 0): 1.0})
    X = pad_primal(X_pre, out.certificate)
    pad_ok = np.array_equal(X.to_dense(), np.diag([0.0, 1.0, 0.0]))
    # reduced dual optimum y = 1 (slack diag(1 - y, 0))
    res = basic_recovery(p, out.certificate, [1.0])
    rec_ok = not res.ok and out.certificate.steps[res.failed_step].constraint == 0
    record(2, "posgap reduced shape, padding, recovery failure", shape_ok and pad_ok and rec_ok,
           f"shape={shape_ok}, padded X=diag{tuple(np.diag(X.to_dense()).tolist())}, "
           f"recovery failed at step {res.failed_step}")


def test_criterion_03_obfuscation_negative_control():
    counts = []
    counts.append(sieve(similarity_transform(gen_example1(), OBFUSCATION_T)).iteration_count)
    counts.append(sieve(similarity_transform(gen_posgap(), OBFUSCATION_T)).iteration_count)
    s3 = BlockStructure((3,))
    random_hits = sum(
        sieve(similarity_transform(gen_example1(), random_congruence(np.random.default_rng(seed), s3))).iteration_count > 0
        for seed in range(100))
    messy_hits = sum(sieve(gen_messy(gen_example1(), seed).problem).iteration_count > 0 for seed in range(100))
    messy_pg = sum(sieve(gen_messy(gen_posgap(), seed).problem).iteration_count > 0 for seed in range(100))
    ok = counts == [0, 0] and random_hits == 0 and messy_hits == 0 and messy_pg == 0
    record(3, "transformed and messy instances not reduced", ok,
           f"fixed T steps={counts}, random T reduced {random_hits}/100, "
           f"messy(example1) reduced {messy_hits}/100, messy(posgap) reduced {messy_pg}/100")


def planted_params(seed):
    rng = np.random.default_rng(1_000_003 + seed)
    nblocks = int(rng.integers(1, 5))
    nonneg = int(rng.integers(0, 6))
    blocks = tuple(int(v) for v in rng.integers(2, max(3, (50 - nonneg) // nblocks) + 1, size=nblocks))
    n = sum(blocks) + nonneg
    k = int(rng.integers(0, min(8, (n - 2) // 3) + 1))
    m = int(rng.integers(max(k, 1), 81))
    chain = bool(rng.random() < 0.4)
    infeasible = bool(k > 0 and rng.random() < 0.2)
    return dict(blocks=blocks, nonneg=nonneg, m=m, k=k, chain=chain, infeasible=infeasible)


def test_criterion_04_planted_oracle():
    t = time.perf_counter()
    good = 0
    chained = infeasible = 0
    failures = []
    for seed in range(500):
        kw = planted_params(seed)
        p, rec = gen_planted(seed, **kw)
        assert p.structure.n <= 50 and p.m <= 80 and len(rec.constraints) <= 8
        out = sieve(p)
        cert = out.certificate
        fillers = set(range(p.m)) - set(rec.constraints)
        ok = (cert.deleted_coordinates == rec.deleted_coordinates
              and cert.deleted_constraints == rec.deleted_constraints
              and not (cert.deleted_constraints & fillers)
              and out.infeasible == rec.infeasible
              and (not rec.infeasible or cert.steps[-1].constraint == rec.infeasible_constraint))
        good += ok
        chained += kw["chain"] and kw["k"] > 1
        infeasible += kw["infeasible"]
        if not ok:
            failures.append(seed)
    elapsed = time.perf_counter() - t
    record(4, "planted instances match plant records", good == 500 and elapsed < 60,
           f"{good}/500 exact ({chained} chained, {infeasible} infeasible), {elapsed:.2f} s"
           + (f", failing seeds {failures[:5]}" if failures else ""))


def test_criterion_05_safe_mode_band():
    s = BlockStructure((1,))
    expect = {-1e-10: Verdict.AMBIGUOUS, -1e-6: Verdict.INFEASIBLE, -1e-17: Verdict.REDUCE}
    got = {}
    for b, verdict in expect.items():
        p = SdpProblem.create(s, None, [SymBlockMatrix(s, {(0, 0, 0): 1.0}), SymBlockMatrix(s, {(0, 0, 0): 1.0})],
                              [b, 1.0])
        st = SieveState(p)
        got[b] = classify_constraint(st, 0).verdict
    thresholds_ok = SieveState(gen_example1()).infeas_tol == 2.0 ** -26 and SieveState(gen_example1()).zero_tol == 2.0 ** -52
    ok = got == expect and thresholds_ok
    record(5, "safe-mode classification band", ok,
           ", ".join(f"b'={b:g} -> {v.value}" for b, v in got.items()))


def test_criterion_06_dimacs_suite():
    worst = 0.0
    for seed in range(100):
        p, sol = gen_diagonal_pair(seed)
        e = dimacs_errors(p, sol)
        worst = max(worst, e.max_abs)
    pg = dimacs_errors(gen_posgap(), posgap_optimal_pair())
    eps_dev = 0.0
    for eps in (1e-2, 1e-3, 1e-4):
        X = gen_posgap_eps(eps)
        e = dimacs_errors(gen_posgap(), Solution(X, np.zeros(2)))
        eps_dev = max(eps_dev, abs(e.err1 - eps / 2), abs(gen_posgap().objective(X) - 2 * eps))
    ok = worst <= 1e-12 and abs(abs(pg.err5) - 0.5) <= 1e-12 and eps_dev <= 1e-12
    record(6, "DIMACS errors", ok,
           f"toy max |err|={worst:.2e}, posgap err5={pg.err5}, X_eps max deviation={eps_dev:.2e}")


def test_criterion_07_help_codes():
    rows = [
        (SolveReport(False, 3.79e6, 3.79e6, 2.22e1), SIEVE_INFEASIBLE, {"1"}),
        (SolveReport(False, 1.0, 1.0, 1.60e-6), SolveReport(False, 1.0, 1.0, 4.23e-8), {"2"}),
        (SolveReport(False, 1.0, 1.0, 3.36e-7), SolveReport(False, 1.0, 1.0, 9.28e-2), {"-2"}),
    ]
    got = [set(help_code(b, a)) for b, a, _ in rows]
    table_ok = got == [want for _, _, want in rows]
    rng = np.random.default_rng(7)
    clashes = 0
    for _ in range(5000):
        def rand_report():
            return SolveReport(bool(rng.random() < 0.3), float(rng.normal() * 10.0 ** rng.integers(-3, 4)),
                               float(rng.normal()), float(10.0 ** rng.uniform(-12, 2)), bool(rng.random() < 0.02))
        before = rand_report()
        after = SIEVE_INFEASIBLE if rng.random() < 0.05 else rand_report()
        c = help_code(before, after)
        clashes += ({"1", "-1"} <= c) or ({"2", "-2"} <= c)
    record(7, "help codes", table_ok and clashes == 0,
           f"table rows -> {[sorted(c) for c in got]}, exclusivity violations {clashes}/5000")


def test_criterion_08_feasibility_and_objective_preserved():
    worst_feas = worst_obj = 0.0
    checked = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        blocks = tuple(int(v) for v in rng.integers(5, 10, size=int(rng.integers(1, 4))))
        nonneg = int(rng.integers(0, 4))
        n = sum(blocks) + nonneg
        k = int(rng.integers(1, min(6, (n - 2) // 3) + 1))
        p, rec = gen_planted(seed, blocks=blocks, nonneg=nonneg, m=k + int(rng.integers(0, 15)), k=k,
                             chain=seed % 2 == 0)
        X = rec.feasible_point
        out = sieve(p)
        Xr = restrict_primal(X, out.certificate)
        worst_feas = max(worst_feas, float(np.max(np.abs(out.reduced.apply(Xr) - out.reduced.b), initial=0.0)))
        worst_obj = max(worst_obj, abs(p.objective(X) - out.reduced.objective(Xr)))
        checked += 1
    ok = checked == 200 and worst_feas <= 1e-12 and worst_obj <= 1e-12
    record(8, "restriction stays feasible with equal objective", ok,
           f"{checked} instances, max residual {worst_feas:.2e}, max objective gap {worst_obj:.2e}")


def test_criterion_09_linalg_oracles():
    rng = np.random.default_rng(2024)
    agree = total = 0
    worst = 0.0
    t = time.perf_counter()
    while total < 1000:
        n = int(rng.integers(1, 13))
        A = rng.normal(size=(n, n))
        A = A + A.T + rng.uniform(-3.0, 6.0) * np.eye(n)
        lam = mp_min_eigenvalue(A)
        if abs(lam) < 1e-12:
            continue
        total += 1
        agree += bool(pd_check(A)) == (lam > 0)
        worst = max(worst, abs(min_eigenvalue(A) - lam))
    elapsed = time.perf_counter() - t
    record(9, "pd_check and min_eigenvalue vs high-precision oracle", agree == 1000 and worst <= 1e-8,
           f"pd agreement {agree}/1000, max |lambda_min error| {worst:.2e} ({elapsed:.1f} s)")


def _fuzz_instance(seed):
    rng = np.random.default_rng(seed)
    blocks = tuple(int(v) for v in rng.integers(1, 7, size=int(rng.integers(1, 4))))
    s = BlockStructure(blocks, int(rng.integers(0, 4)))
    m = int(rng.integers(0, 8))

    def rand_mat():
        ent = {}
        for _ in range(int(rng.integers(0, 10))):
            b = int(rng.integers(s.num_blocks))
            i, j = sorted(int(v) for v in rng.integers(s.orders[b], size=2))
            ent[(b, i, j)] = float(rng.normal() * 10.0 ** rng.integers(-30, 30))
        return SymBlockMatrix(s, ent)

    p = SdpProblem.create(s, rand_mat(), [rand_mat() for _ in range(m)], [float(rng.normal()) for _ in range(m)])
    return p, Solution(rand_mat(), rng.normal(size=m), Z=rand_mat() if seed % 2 else None)


def test_criterion_10_io_roundtrips():
    bad = []
    for seed in range(200):
        p, sol = _fuzz_instance(seed)
        text = write_sdpa(p)
        back = read_solution(write_solution(sol), p)
        planted, _ = gen_planted(seed, blocks=(6, 5), nonneg=2, m=10, k=3, chain=seed % 2 == 0,
                                 infeasible=seed % 7 == 0)
        cert = sieve(planted).certificate
        cert_back = read_certificate(write_certificate(cert))
        ok = (read_sdpa(text) == p and write_sdpa(read_sdpa(text)) == text
              and back.X == sol.X and back.Z == sol.Z and np.array_equal(back.y, sol.y)
              and cert_back == cert and replay(cert_back.steps) == replay(cert.steps))
        if not ok:
            bad.append(seed)
    golden = {
        "example1.dat-s": write_sdpa(gen_example1()),
        "posgap.dat-s": write_sdpa(gen_posgap()),
        "example1.cert": write_certificate(sieve(gen_example1()).certificate),
        "posgap.cert": write_certificate(sieve(gen_posgap()).certificate),
        "posgap_reduced.dat-s": write_sdpa(sieve(gen_posgap()).reduced),
        "posgap_optimal.sol": write_solution(posgap_optimal_pair()),
    }
    golden_bad = [name for name, text in golden.items() if (GOLDEN / name).read_text() != text]
    record(10, "I/O round-trips and golden files", not bad and not golden_bad,
           f"{200 - len(bad)}/200 fuzzed round-trips, golden mismatches {golden_bad or 'none'}")


def test_criterion_11_scale():
    p, rec = gen_planted(11, blocks=(50,) * 6, m=1000, k=40)
    t = time.perf_counter()
    out = sieve(p)
    elapsed = time.perf_counter() - t
    ok = elapsed < 10 and out.iteration_count <= p.m and out.certificate.deleted_coordinates == rec.deleted_coordinates
    record(11, "n=300, m=1000, k=40 sieve", ok,
           f"{elapsed:.2f} s, {out.iteration_count} steps, n {p.structure.n}->{out.reduced.structure.n}")


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
