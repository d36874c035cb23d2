import numpy as np
import pytest

import profmatch


def test_balanced_subset_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(20):
        dev = rng.normal(size=(10, 2))
        tol = [0.2, 0.3]
        fast = profmatch.solve_max_balanced_subset(dev, tol)
        slow = profmatch.brute_force_reference(dev, tol)
        assert fast["objective"] == slow["objective"]
        chosen = dev[fast["selected"]]
        if len(chosen):
            assert np.all(np.abs(chosen.mean(axis=0)) <= np.array(tol) + 1e-9)


def test_assignment_total():
    cost = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
    cols, total = profmatch.solve_assignment(cost)
    assert total == pytest.approx(5.0)
    assert sorted(cols) == [0, 1, 2]


def test_paired_tests():
    two, one = profmatch.mcnemar_exact(10, 15, 5, 20)
    assert two == pytest.approx(0.041389, rel=1e-4)
    assert one == pytest.approx(two / 2)
    t_plus, p = profmatch.wilcoxon_signed_rank([1.0, 2.0, 3.0])
    assert t_plus == 6.0
    assert p == pytest.approx(0.25)
    g = profmatch.rosenbaum_gamma_binary(40, 10)
    assert g["gamma_star"] > 1.0


def test_glm_intercept_only_probit():
    x = np.ones((20, 1))
    y = np.r_[np.ones(5), np.zeros(15)]
    fit = profmatch.fit_binary_glm(x, y, "probit")
    assert fit["coefficients"][0] == pytest.approx(-0.6744897501960817, abs=1e-6)


def test_errors_carry_codes():
    with pytest.raises(profmatch.Error) as info:
        profmatch.fit_binary_glm(np.ones((4, 1)), np.ones(4), "logit")
    assert info.value.code == "DegenerateResponseError"


def test_cohort_and_profile_match():
    cohort = profmatch.generate_cohort(replicate=0, n_cohort=400, master_seed=3)
    assert set(cohort) >= {"X1", "X6", "S", "Z", "Y"}
    trial = cohort["S"] == 1
    cols = {k: v[trial] for k, v in cohort.items() if k in ("X1", "X2", "Z")}
    targets = [float(cohort["X1"].mean()), float(cohort["X2"].mean())]
    tols = [0.05 * float(cohort["X1"].std(ddof=1)), 0.05 * float(cohort["X2"].std(ddof=1))]
    groups = profmatch.profile_match(cols, ["X1", "X2"], targets, tols, "Z", [0.0, 1.0], gap=1)
    for g in groups:
        rows = g["rows"]
        assert len(rows) == g["objective"] > 0
        for k, name in enumerate(["X1", "X2"]):
            assert abs(cols[name][rows].mean() - targets[k]) <= tols[k] + 1e-9


def test_run_scenario_small():
    row = profmatch.run_scenario(replicates=3, bootstrap_B=0, solver_gap=1, method="iow")
    assert row["replicates_ok"] == 3
    assert row["scenario"].endswith("-iow")
