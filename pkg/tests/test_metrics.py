import math

import numpy as np
import pytest

from sievesdp.gen import gen_diagonal_pair, gen_posgap, gen_posgap_eps, posgap_optimal_pair
from sievesdp.metrics import (
    SIEVE_INFEASIBLE,
    SolveReport,
    dimacs_errors,
    help_code,
    pre_vs_solve,
    rate,
    reduction_stats,
    time_reduction,
)
from sievesdp.model import BlockStructure, SdpProblem, Solution, SymBlockMatrix


def test_posgap_exact_pair():
    e = dimacs_errors(gen_posgap(), posgap_optimal_pair())
    assert e.err1 == e.err2 == e.err3 == e.err4 == 0.0
    assert e.err5 == -0.5
    assert e.max_abs == 0.5


@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_posgap_eps(eps):
    X = gen_posgap_eps(eps)
    p = gen_posgap()
    e = dimacs_errors(p, Solution(X, np.zeros(2)))
    assert e.err1 == pytest.approx(eps / 2, abs=1e-12)
    assert p.objective(X) == pytest.approx(2 * eps, abs=1e-12)
    assert e.err2 <= 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_zero_gap_toy(seed):
    p, sol = gen_diagonal_pair(seed)
    e = dimacs_errors(p, sol)
    assert max(abs(v) for v in e.as_tuple()) <= 1e-12


def test_explicit_z_residual():
    p, sol = gen_diagonal_pair(0)
    Z = p.C.to_dense() - sum(y * A.to_dense() for y, A in zip(sol.y, p.A))
    exact = Solution(sol.X, sol.y, Z=SymBlockMatrix.from_dense(p.structure, Z))
    assert dimacs_errors(p, exact).err3 <= 1e-14
    Zp = Z.copy()
    Zp[0, 0] += 1.0
    e = dimacs_errors(p, Solution(sol.X, sol.y, Z=SymBlockMatrix.from_dense(p.structure, Zp)))
    c_inf = max(abs(v) for v in p.C.entries.values())
    assert e.err3 == pytest.approx(1.0 / (1.0 + c_inf), rel=1e-12)


def test_err_clamps_nonnegative():
    s = BlockStructure((2,))
    p = SdpProblem.create(s, SymBlockMatrix(s, {(0, 0, 0): 1.0}), [], [])
    X = SymBlockMatrix(s, {(0, 0, 0): -1.0})
    e = dimacs_errors(p, Solution(X, np.zeros(0)))
    assert e.err2 == 1.0
    assert e.err4 == 0.0


def test_dimacs_dimension_mismatch():
    with pytest.raises(ValueError):
        dimacs_errors(gen_posgap(), Solution(None, np.zeros(2)))
    with pytest.raises(ValueError):
        dimacs_errors(gen_posgap(), Solution(gen_posgap_eps(0.1), np.zeros(3)))


def test_help_code_table_rows():
    before = SolveReport(False, 3.79e6, 3.79e6, 2.22e1)
    assert help_code(before, SIEVE_INFEASIBLE) == {"1"}
    assert help_code(SolveReport(False, 5.0, 5.0, 1.60e-6), SolveReport(False, 5.0, 5.0, 4.23e-8)) == {"2"}
    assert help_code(SolveReport(False, 1.0, 1.0, 3.36e-7), SolveReport(False, 1.0, 1.0, 9.28e-2)) == {"-2"}


def test_help_code_identical_empty():
    r = SolveReport(False, 1.0, 1.0, 1e-9)
    assert help_code(r, r) == frozenset()


def test_help_code_infeasibility_flips():
    ok = SolveReport(False, 1.0, 1.0, 1e-3)
    bad = SolveReport(True, math.nan, math.nan, 1e-3)
    assert help_code(ok, bad) == {"1"}
    assert help_code(bad, ok) == {"-1"}


def test_help_code_objective_shift():
    assert help_code(SolveReport(False, 1.0, 1.0, 1e-9), SolveReport(False, 2.0, 2.0, 1e-9)) == {"3"}
    # +2 and +3 can co-occur
    assert help_code(SolveReport(False, 1.0, 1.0, 1e-3), SolveReport(False, 2.0, 2.0, 1e-6)) == {"2", "3"}
    # -2 suppresses +3
    assert help_code(SolveReport(False, 1.0, 1.0, 1e-9), SolveReport(False, 2.0, 2.0, 1e-2)) == {"-2"}


def test_help_code_memory():
    assert help_code(SolveReport(out_of_memory=True), SolveReport(False, 1.0, 1.0, 0.0)) == {"MM"}


def test_rates():
    assert rate(53523, 1385) == pytest.approx(0.974, abs=5e-4)
    assert rate(186225, 3204) == pytest.approx(0.983, abs=5e-4)
    assert math.isnan(rate(0, 0))
    assert time_reduction(2170.13, 272427.23, 131837.25) == pytest.approx(50.8101, abs=1e-3)
    assert pre_vs_solve(1.0, 4.0) == 25.0


def test_reduction_stats_identity():
    p = gen_posgap()
    st = reduction_stats(p, p, 0.0, 10.0, 10.0)
    assert st.reduction_n == st.reduction_m == 0.0
    assert st.time_reduction == 0.0
    assert st.nnz_before == st.nnz_after == 4


def test_reduction_stats_sequences_and_negative_time():
    p = gen_posgap()
    st = reduction_stats([p, p], [p], 0.0, 1.0, 1.0)
    assert st.n_before == 6 and st.n_after == 3 and st.reduction_m == 0.5
    with pytest.raises(ValueError):
        reduction_stats(p, p, -1.0, 1.0, 1.0)
