import io
import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from railshare.band_plan import BandState
from railshare.grid import GridConfig, ResourceGrid
from railshare.ilp import (
    IlpError,
    IlpScenario,
    LpParseError,
    OracleLimitError,
    build_model,
    expected_counts,
    export_lp,
    model_from_lp,
    parse_lp,
    read_solution,
    solve_exhaustive,
    write_solution,
)


def count_formulas(up, uc, K, T, M, preemption):
    """Variable and row totals per family, written out independently."""
    v = {"x": up * K * T, "y": uc * K * T * M, "f": up * K * T * M if preemption else 0,
         "zc": K * T * M, "zs": T * M}
    r = {
        "a": K * T if up else 0,
        "b": K * T * M if uc else 0,
        "c": up * K * T,
        "d": uc * K * T * M,
        "e1": up if preemption else 0,
        "e2": up * K * T * M if preemption else 0,
        "e3": up * K * T * M if preemption else 0,
        "e4": up * K * T * M if preemption else 0,
        "e": 0 if preemption else up,
        "f": uc,
        "g": uc * K,
        "h": 0 if preemption else up * uc * K * T * M,
        "lz1": up * K * T * M,
        "lz2": K * T * M,
        "lz3": uc * K * T * M,
        "ls1": K * T * M,
        "ls2": T * M,
    }
    return v, r


def tiny(up=(1,), uc=(1,), shape=(2, 1, 2), **kw):
    return IlpScenario.uniform(up, uc, shape, **kw)


HAND_BUILT = [
    tiny(name="one_each"),
    IlpScenario.uniform([0, 1], [0, 1], (17, 10, 7), colliding=range(5, 11), occupied=[5, 6],
                        gamma=1e3, th_perf=1e5, th_crit=2e3, name="table_scale"),
    IlpScenario.uniform([0], [0, 1, 2], (3, 2, 2), colliding=[0], name="more_critical"),
    IlpScenario.uniform([0, 1, 2], [], (4, 1, 3), name="performance_only"),
    IlpScenario.uniform([], [4], (2, 3, 2), name="critical_only"),
]


@pytest.mark.parametrize("sc", HAND_BUILT, ids=lambda s: s.name)
@pytest.mark.parametrize("preemption", [True, False])
def test_counts_match_formulas(sc, preemption):
    m = build_model(sc, preemption)
    v, r = count_formulas(len(sc.perf_users), len(sc.crit_users), sc.num_prbs, sc.num_slots,
                          sc.minislots, preemption)
    for fam, n in v.items():
        assert m.count(fam) == n, fam
    assert expected_counts(sc, preemption) == v
    assert m.num_binaries == sum(v.values())
    for rule, n in r.items():
        assert len(m.rows_of(rule)) == n, rule
    assert len(m.rows) == sum(r.values())


def test_small_example_counts():
    m = build_model(tiny(), True)
    assert (m.count("x"), m.count("y"), m.count("f")) == (2, 4, 4)


def test_table_scale_x_count():
    sc = IlpScenario.uniform([0, 1], [0, 1], (17, 10, 7))
    assert build_model(sc, True).count("x") == 340


def test_colliding_prb_forbids_critical():
    sc = tiny(colliding=[0])
    m = build_model(sc, True)
    d_rows = {r.terms[0][0]: r for r in m.rows_of("d")}
    for mm in range(2):
        row = d_rows[m.index[f"y_1_0_{mm}_0"]]
        assert len(row.terms) == 1 and row.terms[0][1] == 1.0 and row.sense == "<=" and row.rhs == 0
        assert d_rows[m.index[f"y_1_1_{mm}_0"]].rhs == 1


def test_orthogonality_rows_only_without_preemption():
    sc = IlpScenario.uniform([0, 1], [0, 2], (2, 2, 2))
    m = build_model(sc, False)
    names = {r.name for r in m.rows_of("h")}
    for i, j, k, mm, t in itertools.product([0, 1], [0, 2], range(2), range(2), range(2)):
        assert f"h_{i}_{j}_{k}_{mm}_{t}" in names
    row = next(r for r in m.rows if r.name == "h_1_2_1_0_1")
    assert sorted(m.variables[j] for j, _ in row.terms) == ["x_1_1_1", "y_2_1_0_1"]
    assert row.sense == "<=" and row.rhs == 1
    assert not build_model(sc, True).rows_of("h")


def test_objective_coefficients():
    sc = IlpScenario.uniform([0, 1], [0], (3, 2, 4))
    m = build_model(sc, True)
    assert m.objective[m.index["x_1_2_0"]] == Fraction(1, 2 * 3 * 2)
    assert m.objective[m.index["y_0_0_3_1"]] == -Fraction(1, 2 * 4 * 3 * 1)
    assert m.objective[m.index["zs_0_0"]] == -Fraction(1, 2 * 4)
    parsed = parse_lp(export_lp(m))
    assert parsed.objective["x_0_0_0"] == pytest.approx(1 / 12, rel=1e-11)


def test_export_is_deterministic(tmp_path):
    sc = HAND_BUILT[1]
    a = export_lp(build_model(sc, True))
    b = export_lp(build_model(sc, True))
    assert a == b
    assert all(len(line) <= 78 for line in a.splitlines())


@pytest.mark.parametrize("sc", HAND_BUILT, ids=lambda s: s.name)
@pytest.mark.parametrize("preemption", [True, False])
def test_lp_round_trip(sc, preemption):
    m = build_model(sc, preemption)
    text = export_lp(m)
    back = model_from_lp(text)
    assert back.variables == m.variables
    assert len(back.rows) == len(m.rows)
    assert back.preemption == preemption
    assert back.name == sc.name
    for r0, r1 in zip(m.rows, back.rows):
        assert (r0.name, r0.rule, r0.sense) == (r1.name, r1.rule, r1.sense)
        assert r1.rhs == pytest.approx(r0.rhs, rel=1e-11)
        assert [j for j, _ in r0.terms] == [j for j, _ in r1.terms]
    assert back.objective == m.objective
    assert export_lp(back) == text


def test_lp_parse_errors():
    with pytest.raises(LpParseError):
        model_from_lp("Subject To\n r: x <= 1\nEnd\n")
    with pytest.raises(LpParseError):
        model_from_lp("Maximize\n obj: x\nSubject To\n r: x <= 1\nBinary\n y\nEnd\n")
    with pytest.raises(LpParseError):
        parse_lp("Maximize\n obj: x\nSubject To\n r: x <= one\nEnd\n")


def test_all_zero_demand():
    sc = tiny(gamma=1.0, th_perf=0.0, th_crit=0.0)
    m = build_model(sc, True)
    sol = solve_exhaustive(m)
    assert sol.objective == 0
    assert m.is_feasible([0] * m.num_binaries)
    assert m.objective_value([0] * m.num_binaries) == sol.objective


def test_single_user_takes_both_prbs():
    sc = IlpScenario.uniform([0], [], (2, 1, 2), gamma=1.0, th_perf=1e9)
    sol = solve_exhaustive(build_model(sc, True))
    assert sol.value("x_0_0_0") == 1 and sol.value("x_0_1_0") == 1
    sol = solve_exhaustive(build_model(sc, False))
    assert sol.value("x_0_0_0") == 1 and sol.value("x_0_1_0") == 1


def test_infeasible_model():
    # critical floor unreachable: only colliding PRBs exist
    sc = IlpScenario.uniform([0], [0], (1, 1, 2), colliding=[0], th_crit=1.0)
    sol = solve_exhaustive(build_model(sc, True))
    assert not sol.feasible and sol.objective is None


def test_limit():
    sc = IlpScenario.uniform([0, 1], [0, 1], (17, 10, 7))
    with pytest.raises(OracleLimitError, match="binaries"):
        solve_exhaustive(build_model(sc, True), limit=24)


def brute_force(model):
    """Every assignment, in descending lexicographic order."""
    best, best_v = None, None
    for bits in itertools.product((1, 0), repeat=model.num_binaries):
        if model.is_feasible(bits):
            v = model.objective_value(bits)
            if best_v is None or v > best_v:
                best, best_v = bits, v
    return best, best_v


scenarios = st.builds(
    lambda shape, up, uc, col, occ, g, tp, tc, d: IlpScenario.uniform(
        up, uc, shape,
        colliding=[k for k in range(shape[0]) if col >> k & 1],
        occupied=[k for k in range(shape[0]) if col >> k & 1 and occ >> k & 1],
        gamma=g, th_perf=tp, th_crit=tc, deadline_minislots=d,
    ),
    st.sampled_from([(1, 1, 2), (2, 1, 1), (1, 2, 1), (2, 1, 2)]),
    st.sampled_from([(), (0,)]),
    st.sampled_from([(), (0,)]),
    st.integers(0, 3), st.integers(0, 3),
    st.sampled_from([0.5, 1.0, 2.0]),
    st.sampled_from([0.0, 1.0, 2.5, 100.0]),
    st.sampled_from([0.0, 1.0, 2.0]),
    st.integers(0, 3),
)


@settings(max_examples=80, deadline=None)
@given(scenarios, st.booleans())
def test_oracle_matches_brute_force(sc, preemption):
    m = build_model(sc, preemption)
    if m.num_binaries > 14:
        return
    sol = solve_exhaustive(m)
    bits, value = brute_force(m)
    if bits is None:
        assert not sol.feasible
        return
    assert sol.feasible and sol.objective == value
    assert tuple(sol.assignment[v] for v in m.variables) == bits


@settings(max_examples=60, deadline=None)
@given(scenarios)
def test_no_preemption_never_beats_preemption(sc):
    p = solve_exhaustive(build_model(sc, True))
    n = solve_exhaustive(build_model(sc, False))
    if n.feasible:
        assert p.feasible and p.objective >= n.objective


def fill_grid(sc, assignment):
    cfg = GridConfig(sc.num_prbs, sc.num_slots, sc.minislots)
    grid = ResourceGrid(cfg, BandState(sc.colliding, sc.occupied, (False,) * sc.num_prbs))
    for name, v in assignment.items():
        if v and name.startswith("x_"):
            i, k, t = map(int, name.split("_")[1:])
            grid.grant_performance(i, k, t)
    for name, v in assignment.items():
        if v and name.startswith("y_"):
            i, k, m, t = map(int, name.split("_")[1:])
            grid.grant_critical(i, k, t, m, preempt=True)
    return grid


@settings(max_examples=60, deadline=None)
@given(scenarios)
def test_report_of_oracle_grid_matches_objective(sc):
    m = build_model(sc, True)
    sol = solve_exhaustive(m)
    if not sol.feasible:
        return
    grid = fill_grid(sc, sol.assignment)
    rep = grid.report({}, num_perf_users=len(sc.perf_users), num_critical_users=len(sc.crit_users))
    assert rep.objective == sol.objective


def test_solution_round_trip():
    m = build_model(tiny(), True)
    sol = solve_exhaustive(m)
    buf = io.StringIO()
    write_solution(sol.assignment, buf, order=m.variables)
    buf.seek(0)
    assert read_solution(buf) == sol.assignment
    assert read_solution(io.StringIO('{"x_1_0_0": 1}\n\n{"var": "y", "value": 0}\n')) == {"x_1_0_0": 1, "y": 0}
    with pytest.raises(IlpError):
        read_solution(io.StringIO('{"var": "x", "value": 2}\n'))


def test_scenario_validation():
    with pytest.raises(IlpError):
        IlpScenario.uniform([0], [0], (2, 1, 1), colliding=[], occupied=[1])
    with pytest.raises(IlpError):
        IlpScenario.uniform([0, 0], [], (2, 1, 1))
    with pytest.raises(IlpError):
        IlpScenario.uniform([0], [], (0, 1, 1))
