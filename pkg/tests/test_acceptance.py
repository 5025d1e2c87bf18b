"""The ten acceptance criteria, each at its stated tolerance.

Every test prints (and adds to the terminal summary) one line of the form

    [NN] PASS|FAIL <criterion>: <checks> checks, worst <check> err=<e> tol=<t>

Runs use the verification suites of :mod:`kenergy.checks` on the default
grids; the t-integrals use 32 Gauss-Legendre nodes (twice the library
default) wherever a path integral is compared against something else.
"""
import time

import pytest

from kenergy.checks import Record, SuiteOptions, run_suites

ACCEPTANCE_N_T = 32


def records(suites, manifold, **kw):
    opts = SuiteOptions(manifold=manifold, **kw)
    return run_suites(suites, opts)


def _score(r: Record) -> float:
    if r.mode == "above":
        return 0.0 if r.passed else float("inf")
    err = r.rel_err if r.mode == "rel" else r.abs_err
    return err / r.tolerance if r.tolerance > 0 else float("inf")


def criterion(log, number: int, title: str, recs: list, note: str = ""):
    assert recs, "criterion produced no checks"
    failed = [r for r in recs if not r.passed]
    worst = max(recs, key=_score)
    err = worst.rel_err if worst.mode == "rel" else worst.abs_err
    status = "FAIL" if failed else "PASS"
    line = (f"[{number:02d}] {status} {title}: {len(recs)} checks, worst {worst.check} "
            f"{worst.mode}_err={err:.2e} tol={worst.tolerance:.0e}")
    if note:
        line += f" ({note})"
    log.append(line)
    print(line)
    assert not failed, "; ".join(f"{r.check}: lhs={r.lhs!r} rhs={r.rhs!r} tol={r.tolerance}" for r in failed)


def test_criterion_01_path_independence(acceptance_log):
    t0 = time.perf_counter()
    recs = records(["theorem1"], "CP1", samples=5, n_t=ACCEPTANCE_N_T, ks=(1,))
    recs += records(["theorem1"], "CP2", samples=5, n_t=ACCEPTANCE_N_T, ks=(1, 2))
    elapsed = time.perf_counter() - t0
    # the runtime target is part of the criterion: 2 minutes for everything above
    recs.append(Record("theorem1/runtime", "runtime target", 120.0, elapsed, 0.0, "above",
                       details={"seconds": elapsed}))
    criterion(acceptance_log, 1, "path independence (CP1 k=1, CP2 k=1,2; 5 potentials x 3 paths)", recs,
              f"{elapsed:.0f}s")


def test_criterion_02_euler_characteristic(acceptance_log):
    recs = []
    for kind in ("CP1", "CP2", "T2"):
        recs += records(["euler"], kind)
    criterion(acceptance_log, 2, "Euler characteristics 2, 3, 0 (reference + 3 perturbed each)", recs)


def test_criterion_03_formula_agreement(acceptance_log):
    recs = []
    for kind in ("CP1", "CP2", "T2"):
        recs += records(["formulas"], kind, samples=5, n_t=ACCEPTANCE_N_T)
    assert any("nopath" in r.check for r in recs)
    criterion(acceptance_log, 3, "path = closed formulas (1e-6), path-free M_1 on curves (1e-8)", recs)


def test_criterion_04_cocycle(acceptance_log):
    recs = []
    for kind in ("CP1", "CP2", "T2"):
        recs += records(["cocycle"], kind, samples=5)
    criterion(acceptance_log, 4, "cocycle defect on 5 pairs per manifold", recs)


def test_criterion_05_loops(acceptance_log):
    recs = records(["loops"], "CP1", samples=3)
    recs += records(["loops"], "CP2", samples=2)
    recs += records(["loops"], "T2", samples=3)
    assert sum("bc-derivative" in r.check for r in recs) >= 5
    criterion(acceptance_log, 5, "loop defect and Bott-Chern derivative at 5 t per loop", recs)


def test_criterion_06_flow_invariance(acceptance_log):
    recs = records(["theorem2"], "CP1")
    assert any(r.check.endswith("sup-phi") for r in recs)
    criterion(acceptance_log, 6, "z d/dz flow on CP1: dM_1/dt, F_1, metric independence", recs)


def test_criterion_07_futaki_routes(acceptance_log):
    recs = records(["futaki"], "CP1")
    assert len(recs) >= 6
    criterion(acceptance_log, 7, "Futaki via holomorphy potential = defining formula (CP1 radial)", recs)


def test_criterion_08_second_energy(acceptance_log):
    recs = records(["theorem3"], "CP2", symmetry="radial")
    formula = [r for r in recs if r.check != "theorem3/lambda"]
    assert len(formula) >= 5
    for r in formula:
        # the adjudication must show both readings measured against the path integral
        assert {"rhs_printed", "rhs_derived", "diff_printed", "diff_derived", "adjudicated"} <= set(r.details)
    verdicts = {r.details["adjudicated"] for r in formula}
    criterion(acceptance_log, 8, "second K-energy formula on the CP2 radial battery, lambda = 2 pi mu_1", recs,
              f"adjudicated coefficient: {', '.join(sorted(verdicts))}")


def test_criterion_09_critical_points_and_descent(acceptance_log):
    recs = []
    for kind in ("CP1", "CP2"):
        recs += records(["critical", "descent"], kind)
    criterion(acceptance_log, 9, "Fubini-Study critical, descent to residual 1e-4, gradient vs FD", recs)


def test_criterion_10_jet_oracle(acceptance_log):
    recs = []
    for kind in ("CP1", "CP2", "T2"):
        recs += records(["oracles"], kind)
    assert all(r.details["nodes"] == 20 for r in recs)
    criterion(acceptance_log, 10, "analytic jets vs finite differences on 20 nodes per family", recs)


@pytest.mark.parametrize("mode,lhs,rhs,tol,expected", [
    ("abs", 1.0, 1.0 + 1e-9, 1e-8, True),
    ("rel", 1e6, 1e6 + 1.0, 1e-6, True),
    ("rel", 1.0, 1.1, 1e-6, False),
    ("above", 0.2, 0.1, 0.0, True),
    ("above", 0.05, 0.1, 0.0, False),
    ("abs", float("nan"), 0.0, 1.0, False),
])
def test_record_semantics(mode, lhs, rhs, tol, expected):
    assert Record("x", "plumbing", lhs, rhs, tol, mode).passed is expected
