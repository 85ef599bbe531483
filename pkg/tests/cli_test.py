import json
import math
import os

import pandas as pd
import pytest

import contactinterval
from contactinterval import cli
from contactinterval.base import UsageError


def simulated(tmp_path):
    """Simulate into tmp_path, trying seeds until an epidemic takes off."""
    out = str(tmp_path / "sim")
    for seed in range(100):
        code = cli.dispatch(["simulate", "--n-nodes", "400", "--infections", "60",
                             "--beta", "0.5", "-0.5", "0", "--seed", str(seed), "--out", out])
        assert code == 0
        with open(os.path.join(out, "truth.json")) as fp:
            if not json.load(fp)["died_out"]:
                return out
    raise AssertionError("every epidemic died out")


def read_json(path):
    with open(path) as fp:
        return json.load(fp)


def round_trip_test(tmp_path):

    sim = simulated(tmp_path)
    line_list = os.path.join(sim, "line_list.csv")
    pairs = os.path.join(sim, "pairs.csv")
    fit_json = str(tmp_path / "fit.json")
    baseline = str(tmp_path / "baseline.csv")

    assert cli.dispatch(["fit", line_list, "--pairs", pairs, "--json-out", fit_json,
                         "--baseline-out", baseline, "--probability-out", str(tmp_path / "prob.csv"),
                         "--pattern", "x_inf=1", "--pattern", "x_sus=1,x_pair=1"]) == 0
    fit = read_json(fit_json)
    assert [c["name"] for c in fit["coefficients"]] == ["x_inf", "x_sus", "x_pair"]
    assert fit["n_infectees"] == 60
    assert list(pd.read_csv(baseline).columns) == ["stratum", "tau", "cumhaz", "var", "lo", "hi"]
    assert set(pd.read_csv(str(tmp_path / "prob.csv"))["pattern"]) == {"x_inf=1", "x_sus=1,x_pair=1"}

    em_json = str(tmp_path / "em.json")
    weights = str(tmp_path / "weights.csv")
    assert cli.dispatch(["fit-em", line_list, "--pairs", pairs, "--json-out", em_json,
                         "--weights-out", weights, "--trace-out", str(tmp_path / "trace.csv")]) == 0
    assert read_json(em_json)["info_kind"] == "louis"
    frame = pd.read_csv(weights)
    assert list(frame.columns) == ["j", "i", "p_ij"]
    assert frame.groupby("j")["p_ij"].sum().round(9).eq(1.0).all()

    rows = str(tmp_path / "rows.csv")
    assert cli.dispatch(["pairs", line_list, "--pairs", pairs, "--out", rows]) == 0
    again_json = str(tmp_path / "again.json")
    assert cli.dispatch(["fit", "--pairs-in", rows, "--json-out", again_json]) == 0
    again = read_json(again_json)
    assert again["coefficients"] == fit["coefficients"]
    assert again["loglik"] == fit["loglik"]

    na_json = str(tmp_path / "na.json")
    assert cli.dispatch(["nelson-aalen", line_list, "--pairs", pairs, "--json-out", na_json,
                         "--baseline-out", str(tmp_path / "na.csv")]) == 0
    assert read_json(na_json)["coefficients"] == []


def interaction_fit_test(tmp_path):

    sim = simulated(tmp_path)
    line_list = os.path.join(sim, "line_list.csv")
    pairs = os.path.join(sim, "pairs.csv")
    fit_json = str(tmp_path / "fit.json")
    assert cli.dispatch(["fit", line_list, "--pairs", pairs, "--interaction", "x_inf:x_sus",
                         "--json-out", fit_json]) == 0
    fit = read_json(fit_json)
    assert [c["name"] for c in fit["coefficients"]] == ["x_inf", "x_sus", "x_pair", "x_inf:x_sus"]
    assert all(math.isfinite(c["coef"]) for c in fit["coefficients"])

    rows = str(tmp_path / "rows.csv")
    assert cli.dispatch(["pairs", line_list, "--pairs", pairs, "--interaction", "x_inf:x_sus",
                         "--out", rows]) == 0
    frame = pd.read_csv(rows)
    assert (frame["x_inf:x_sus"] == frame["x_inf"] * frame["x_sus"]).all()

    assert cli.dispatch(["fit", line_list, "--pairs", pairs, "--interaction", "x_inf"]) == 3
    assert cli.dispatch(["fit", line_list, "--pairs", pairs, "--interaction", "x_inf:age_sus"]) == 1
    assert cli.dispatch(["fit", "--pairs-in", rows, "--interaction", "x_inf:x_sus"]) == 3


def usage_errors_test(tmp_path, capsys):

    assert cli.dispatch([]) == 3
    assert cli.dispatch(["fit", str(tmp_path / "missing.csv")]) == 3
    assert cli.dispatch(["fit"]) == 3
    assert cli.dispatch(["fit", "--pairs-in", "a.csv", "--relrisk", "probit"]) == 3
    assert cli.dispatch(["simulate", "--neighbors", "7", "--out", str(tmp_path / "odd")]) == 3
    assert cli.dispatch(["fit", "--pairs-in", str(tmp_path / "missing.csv"),
                         "--json-out", str(tmp_path / "nowhere" / "fit.json")]) == 3
    capsys.readouterr()


def data_error_test(tmp_path):

    path = tmp_path / "bad.csv"
    path.write_text("id,group,t_infection,latent,infectious_period,obs_limit,imported\n"
                    "1,7,0,0,0,10,1\n")
    assert cli.dispatch(["fit", str(path)]) == 1

    path.write_text("id,group,t_infection,latent,infectious_period,obs_limit,imported,infector\n"
                    "1,7,0,0,6,10,1,\n"
                    "2,7,2,0,6,10,0,abc\n")
    assert cli.dispatch(["fit", str(path)]) == 1


def convergence_error_test(tmp_path):

    path = tmp_path / "rows.csv"
    path.write_text("i,j,start,stop,event,candidate,stratum,weight,x\n"
                    "1,2,0,1.0,1,1,0,1,1.0\n"
                    "1,3,0,2.0,0,0,0,1,1.0\n"
                    "1,4,0,3.0,1,1,0,1,1.0\n")
    assert cli.dispatch(["fit", "--pairs-in", str(path)]) == 2


def version_test(capsys):

    assert cli.dispatch(["--version"]) == 0
    assert contactinterval.__version__ in capsys.readouterr().out


def coverage_study_command_test(tmp_path, monkeypatch):

    config = tmp_path / "study.json"
    config.write_text(json.dumps({"n_nodes": 300, "infections": 40,
                                  "cells": [{"name": "c", "alpha": 0.5, "gamma": 0.2, "varied": "pair"}]}))
    monkeypatch.setenv(cli.THREADS_VARIABLE, "1")
    out = str(tmp_path / "study")
    assert cli.dispatch(["coverage-study", "--config", str(config), "--replicates", "1",
                         "--out", out]) == 0
    assert os.path.isfile(os.path.join(out, "coverage_beta.csv"))


def study_file_jobs_test(tmp_path, monkeypatch):

    seen = []
    monkeypatch.setattr(cli.study, "run_coverage_study", lambda config, out_dir: seen.append(config))
    monkeypatch.delenv(cli.THREADS_VARIABLE, raising=False)
    config = tmp_path / "study.json"
    config.write_text(json.dumps({"jobs": 4, "replicates": 2}))
    out = str(tmp_path / "study")

    assert cli.dispatch(["coverage-study", "--config", str(config), "--out", out]) == 0
    assert seen[-1].jobs == 4
    assert cli.dispatch(["coverage-study", "--config", str(config), "--jobs", "2", "--out", out]) == 0
    assert seen[-1].jobs == 2
    monkeypatch.setenv(cli.THREADS_VARIABLE, "3")
    assert cli.dispatch(["coverage-study", "--config", str(config), "--jobs", "2", "--out", out]) == 0
    assert seen[-1].jobs == 3
    assert seen[-1].replicates == 2


def threads_test(monkeypatch):

    cfg = cli.RunConfig(command="coverage-study", jobs=3)
    monkeypatch.delenv(cli.THREADS_VARIABLE, raising=False)
    assert cfg.threads() == 3
    assert cli.RunConfig(command="coverage-study").threads() is None
    monkeypatch.setenv(cli.THREADS_VARIABLE, "5")
    assert cfg.threads() == 5
    monkeypatch.setenv(cli.THREADS_VARIABLE, "many")
    with pytest.raises(UsageError):
        cfg.threads()
