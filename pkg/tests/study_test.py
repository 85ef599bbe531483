import os

import numpy as np
import pandas as pd
import pytest

from contactinterval import study
from contactinterval.study import CellConfig, StudyConfig


def toy_config(**kwargs):
    settings = dict(cells=(CellConfig("weibull-half", 0.5, 0.2, "inf"),),
                    replicates=3, n_nodes=400, infections=60, seed=4)
    settings.update(kwargs)
    return StudyConfig(**settings)


def default_cells_test():

    cells = study.default_cells()
    assert len(cells) == 12
    assert len({cell.name for cell in cells}) == 12
    assert {(cell.alpha, cell.gamma) for cell in cells} == {(0.5, 0.2), (2.0, 0.6)}
    assert {cell.varied for cell in cells} == set(study.VARIED)
    assert sorted(cell.others for cell in cells) == [0.0] * 6 + [1.0] * 6
    with pytest.raises(ValueError):
        CellConfig("bad", 1.0, 1.0, "age")


def from_dict_test():

    config = StudyConfig.from_dict({"replicates": 5, "jobs": 2,
                                    "cells": [{"name": "c", "alpha": 2.0, "gamma": 0.6, "varied": "sus",
                                               "others": 1.0}]})
    assert config.replicates == 5
    assert config.cells == (CellConfig("c", 2.0, 0.6, "sus", 1.0),)
    assert StudyConfig.from_dict({}).cells == study.default_cells()
    with pytest.raises(ValueError):
        StudyConfig.from_dict({"replicate": 5})
    with pytest.raises(ValueError):
        StudyConfig(jobs=0)


def toy_study_test(tmp_path):

    tables = study.run_coverage_study(toy_config(), str(tmp_path))
    assert set(tables) == {"estimates", "baseline_estimates", "runs", "coverage_beta",
                           "coverage_baseline", "ci_widths", "acceptance"}
    assert set(tables["acceptance"]["check"]) >= {"beta_coverage", "em_iterations", "em_converged", "ci_width"}
    for name in tables:
        assert os.path.isfile(os.path.join(str(tmp_path), name + ".csv"))

    runs = tables["runs"]
    assert len(runs) == 3
    assert list(runs["replicate"]) == [0, 1, 2]

    estimates = tables["estimates"]
    if not estimates.empty:
        assert set(estimates["method"]) == {"hat", "tilde"}
        assert set(estimates["covariate"]) == {"x_inf", "x_sus", "x_pair"}
        assert (estimates["lo"] <= estimates["hi"]).all()
        assert set(tables["baseline_estimates"]["quantile"]) == {0.10, 0.25, 0.50, 0.75, 0.90}
        coverage = tables["coverage_beta"]
        assert list(coverage.columns) == ["cell", "method", "covariate", "coverage", "n"]
        assert coverage["coverage"].between(0.0, 1.0).all()
        widths = tables["ci_widths"]
        assert {"width_hat", "width_tilde", "ratio"} <= set(widths.columns)


def failing_replicate_is_recorded_test(monkeypatch):

    def broken(rows, spec, opts=None, event_mass=None, beta0=None):
        raise np.linalg.LinAlgError("Singular matrix")

    monkeypatch.setattr(study.complete, "maximize", broken)
    tables = study.run_coverage_study(toy_config(replicates=2))
    runs = tables["runs"]
    assert len(runs) == 2
    assert runs["error"].notna().all()
    assert tables["estimates"].empty
    assert not tables["acceptance"]["passed"].any()


def synthetic_tables(tilde_sus_coverage=0.93):
    cells = (CellConfig("a0.5-inf", 0.5, 0.2, "inf"), CellConfig("a2-sus", 2.0, 0.6, "sus"))
    coverage = pd.DataFrame([("a0.5-inf", "hat", "x_inf", 0.95, 200), ("a0.5-inf", "tilde", "x_inf", 0.93, 200),
                             ("a2-sus", "hat", "x_sus", 0.94, 200),
                             ("a2-sus", "tilde", "x_sus", tilde_sus_coverage, 200)],
                            columns=["cell", "method", "covariate", "coverage", "n"])
    runs = pd.DataFrame({"cell": ["a0.5-inf"] * 3 + ["a2-sus"] * 3, "replicate": [0, 1, 2] * 2,
                         "error": [None] * 6, "em_iterations": [5, 6, 7, 6, 6, 9],
                         "em_converged": [True] * 6})
    baseline = []
    for q in (0.10, 0.25, 0.50, 0.75, 0.90):
        baseline.append({"cell": "a0.5-inf", "method": "tilde", "quantile": q, "covered": True})
        baseline.append({"cell": "a2-sus", "method": "tilde", "quantile": q, "covered": q < 0.7})
    estimates = pd.DataFrame([("a0.5-inf", "hat", "x_inf", -0.5, 0.5), ("a0.5-inf", "tilde", "x_inf", -0.8, 0.8),
                              ("a2-sus", "hat", "x_sus", -0.5, 0.5), ("a2-sus", "tilde", "x_sus", -0.52, 0.52)],
                             columns=["cell", "method", "covariate", "lo", "hi"])
    tables = {"coverage_beta": coverage, "runs": runs, "baseline_estimates": pd.DataFrame(baseline),
              "estimates": estimates}
    return tables, toy_config(cells=cells)


def acceptance_checks_test():

    tables, config = synthetic_tables()
    checks = study.acceptance_checks(tables, config)
    assert checks["passed"].all()
    assert len(checks[checks["check"] == "beta_coverage"]) == 4
    assert len(checks[checks["check"] == "baseline_coverage"]) == 7
    assert checks.loc[checks["check"] == "em_iterations", "value"].item() == 6.0

    tables, config = synthetic_tables(tilde_sus_coverage=0.85)
    checks = study.acceptance_checks(tables, config)
    failed = checks[~checks["passed"]]
    assert list(zip(failed["check"], failed["cell"], failed["method"])) == [("beta_coverage", "a2-sus", "tilde")]


@pytest.mark.slow
def desk_scale_acceptance_test():

    cells = tuple(cell for cell in study.default_cells() if cell.others == 0.0)
    config = StudyConfig(cells=cells, replicates=200, n_nodes=2000, infections=300, seed=2012,
                         jobs=os.cpu_count() or 1)
    checks = study.run_coverage_study(config)["acceptance"]
    assert checks["passed"].all(), checks[~checks["passed"]].to_string()


def worker_count_does_not_change_results_test():

    serial = study.run_coverage_study(toy_config(replicates=2))
    parallel = study.run_coverage_study(toy_config(replicates=2, jobs=2))
    pd.testing.assert_frame_equal(serial["runs"], parallel["runs"])
    pd.testing.assert_frame_equal(serial["estimates"], parallel["estimates"])
