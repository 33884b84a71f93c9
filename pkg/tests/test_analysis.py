import math

import numpy as np
import pytest

from spduff.analysis import (
    CSV_FIELDS,
    envelope_convergence,
    oscillation_report,
    run_sweep,
    worker_count,
)
from spduff.errors import NeedsSweep


def test_d0_reports_match_harmonic_closed_form(sweeps):
    sw = sweeps["D0"]
    (rep,) = sw.for_epsilon(0.01)
    assert rep.zero_count in (31, 32)
    assert rep.max_spacing == pytest.approx(math.pi * 0.01, abs=1e-9)
    assert rep.bound == pytest.approx(0.01 * math.pi / 0.9, rel=1e-12)
    assert rep.passed
    for r in sw.reports:
        assert r.envelope_sup_error <= 1e-6
        assert r.converged_envelope_error <= 1e-12
        assert r.diagnostics["r_min_observed"] == pytest.approx(math.sqrt(0.1), abs=1e-7)


@pytest.mark.parametrize("name", ["D0", "D1", "D2"])
def test_spacing_certificate_and_alternation(sweeps, name):
    sw = sweeps[name]
    assert not sw.errors
    for r in sw.reports:
        assert r.zero_count >= 1
        assert r.max_spacing <= r.bound, (r.chart_id, r.epsilon)
        assert r.diagnostics["alternating"]
        assert r.diagnostics["tangential_zeros"] == 0
        assert all(e.residual <= 1e-10 for e in r.crossings)


@pytest.mark.parametrize("name", ["D0", "D1", "D2"])
def test_zero_count_divergence(sweeps, name):
    sw = sweeps[name]
    for chart in sw.chart_ids():
        z = [r.zero_count for r in sw.reports if r.chart_id == chart]
        assert all(b >= 1.5 * a for a, b in zip(z, z[1:])), (chart, z)


def test_ratio_windows(sweeps):
    for row in sweeps["D0"].ratios:
        assert 1.9 <= row["ratio"] <= 2.1
    k2 = [row["ratio"] for row in sweeps["D1"].ratios if row["chart"] == "K2"]
    assert len(k2) == 2
    assert all(1.8 <= q <= 2.2 for q in k2)


def test_d1_counts_regression(sweeps):
    z = {(r.chart_id, r.epsilon): r.zero_count for r in sweeps["D1"].reports}
    assert [z["K2", e] for e in (0.02, 0.01, 0.005)] == [5, 11, 21]
    assert [z["K1", e] for e in (0.02, 0.01, 0.005)] == [16, 31, 63]


def test_one_sided_envelope_convergence(sweeps):
    for name in ("D0", "D1", "D2"):
        for r in sweeps[name].reports:
            assert r.diagnostics["envelope_sign_consistent"], (name, r.chart_id, r.epsilon)


def test_d1_envelope_convergence_and_symmetry(sweeps):
    sw = sweeps["D1"]
    k2 = envelope_convergence(sw, "K2")
    assert [e for e, _ in k2] == [0.02, 0.01, 0.005]
    assert k2[-1][1] < k2[0][1]
    k1, k3 = envelope_convergence(sw, "K1"), envelope_convergence(sw, "K3")
    for (_, a), (_, b) in zip(k1, k3):
        assert abs(a - b) <= 0.1 * max(a, b)


def test_envelope_sup_error_small_on_d1(sweeps):
    for r in sweeps["D1"].reports:
        assert r.envelope_sup_error <= 1e-8


def test_gamma_monotone_on_d1(sweeps):
    for r in sweeps["D1"].reports:
        assert r.diagnostics["gamma_increasing"], (r.chart_id, r.epsilon)


def test_polar_invariants_hold_on_outer_charts(sweeps):
    # the level stays close to H0 + delta on the outer charts of D0 and D1
    for name in ("D0", "D1"):
        for r in sweeps[name].reports:
            if r.chart_id != "K2":
                assert r.diagnostics["gamma_rate_above_bound"], (name, r.chart_id, r.epsilon)
                assert r.diagnostics["r_above_r_min"], (name, r.chart_id, r.epsilon)


def test_middle_chart_energy_drift_is_flagged(sweeps):
    # measured energy dips below H0 + delta on K2, so r falls under the constant's r_min
    d = {r.epsilon: r.diagnostics for r in sweeps["D1"].reports if r.chart_id == "K2"}
    assert all(not x["r_above_r_min"] for x in d.values())
    assert all(x["energy_deviation"][0] < 0 for x in d.values())
    assert not d[0.02]["gamma_rate_above_bound"]


def test_diagnostics_are_reported_everywhere(sweeps):
    keys = {
        "initial_condition",
        "gamma_increasing",
        "min_gamma_rate_over_bound",
        "r_min_observed",
        "r_min_constant",
        "energy_deviation",
        "gamma_rate_above_bound",
        "r_above_r_min",
    }
    for sw in sweeps.values():
        for r in sw.reports:
            assert keys <= set(r.diagnostics)


def test_csv_row_fields(sweeps):
    r = sweeps["D1"].reports[0]
    assert tuple(r.row()) == CSV_FIELDS


def test_singleton_sweep_has_no_ratios(d0):
    sw = run_sweep(d0, [0.01], workers=1)
    assert sw.ratios == []
    with pytest.raises(NeedsSweep):
        envelope_convergence(sw, "K1")


def test_sweep_requires_decreasing_eps(d0):
    with pytest.raises(ValueError):
        run_sweep(d0, [0.01, 0.02])
    with pytest.raises(ValueError):
        run_sweep(d0, [])


def test_failing_epsilon_gives_partial_result(d1):
    sw = run_sweep(d1, [0.2, 0.02], workers=1)
    assert 0.2 in sw.errors and "EpsilonTooLarge" in sw.errors[0.2]
    assert {r.epsilon for r in sw.reports} == {0.02}
    assert not sw.passed


def test_parallel_and_serial_agree(d0):
    a = run_sweep(d0, [0.02, 0.01], workers=1)
    b = run_sweep(d0, [0.02, 0.01], workers=2)
    assert [r.row() for r in a.reports] == [r.row() for r in b.reports]


def test_oscillation_report_single_eps(d1, mani1, charts1):
    reps = oscillation_report(d1, mani1, charts1, 0.02, 0.05)
    assert [r.chart_id for r in reps] == ["K1", "K2", "K3"]
    assert all(r.passed for r in reps)


def test_worker_count_cap(monkeypatch):
    monkeypatch.setenv("SPDUFF_THREADS", "1")
    assert worker_count(8) == 1
    monkeypatch.delenv("SPDUFF_THREADS")
    assert 1 <= worker_count(3) <= 3
