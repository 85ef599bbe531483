# -*- mode: python; tab-width:8; py-indent-offset:4; indent-tabs-mode:nil -*-
#pylint: disable=C0301,R0914
#line length; too many locals;

"""
Confidence interval coverage study.

Each replicate simulates an epidemic, fits the complete-data model (true
infectors revealed) and the ECM model (infectors hidden), and records
the estimates and confidence limits of every coefficient and of the
baseline cumulative hazard at the 10/25/50/75/90% quantiles of all
possible contact intervals.

Replicates run in worker processes titled with setproctitle. Each
replicate draws its random numbers from its own stream, spawned from the
study seed, so results do not depend on the number of workers.

Output files:

* ``estimates.csv``: one row per replicate, method and coefficient;
* ``baseline_estimates.csv``: one row per replicate, method and quantile;
* ``coverage_beta.csv``: coverage per cell, method and coefficient;
* ``coverage_baseline.csv``: coverage per cell, method and quantile;
* ``ci_widths.csv``: paired CI widths of the two methods per replicate;
* ``acceptance.csv``: the checks of :func:`acceptance_checks`.
"""

import dataclasses
import json
import logging
import multiprocessing
import os
import typing

import numpy as np
import pandas as pd
import setproctitle

from contactinterval import complete
from contactinterval import em
from contactinterval import simulate
from contactinterval.base import normal_quantile
from contactinterval.smooth import SmoothOptions

log = logging.getLogger(__name__)

VARIED = ("inf", "sus", "pair")


@dataclasses.dataclass(frozen=True)
class CellConfig:
    """
    One design cell: the Weibull baseline, which coefficient is drawn from
    Uniform(-1, 1), and the value of the other two.
    """
    name: str
    alpha: float
    gamma: float
    varied: str
    others: float = 0.0

    def __post_init__(self):
        if self.varied not in VARIED:
            raise ValueError("varied must be one of %s, not %r" % (", ".join(VARIED), self.varied))


def default_cells():
    """Shapes 0.5 and 2 crossed with each varied coefficient, the others at 0 or 1."""
    cells = []
    for others in (0.0, 1.0):
        for alpha, gamma in ((0.5, 0.2), (2.0, 0.6)):
            for varied in VARIED:
                cells.append(CellConfig("a%g-%s-o%g" % (alpha, varied, others), alpha, gamma, varied, others))
    return tuple(cells)


@dataclasses.dataclass(frozen=True)
class StudyConfig:
    """Coverage study design; ``conf_alpha`` is one minus the confidence level."""
    cells: typing.Tuple[CellConfig, ...] = dataclasses.field(default_factory=default_cells)
    replicates: int = 200
    n_nodes: int = 2000
    ws_neighbors: int = 10
    rewire_prob: float = 0.1
    infections: int = 300
    infectious_mean: float = 1.0
    conf_alpha: float = 0.05
    relrisk: str = "loglinear"
    ties: str = "efron"
    bandwidth: typing.Optional[float] = None
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")

    @classmethod
    def from_dict(cls, values):
        """Build a config from a JSON object; ``cells`` is a list of objects."""
        values = dict(values)
        unknown = set(values) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError("unknown study config key(s) %s" % ", ".join(sorted(unknown)))
        if "cells" in values:
            values["cells"] = tuple(CellConfig(**cell) for cell in values["cells"])
        return cls(**values)

    @classmethod
    def from_json(cls, path):
        with open(path) as fp:
            return cls.from_dict(json.load(fp))


def _init_worker():
    setproctitle.setproctitle("contact-interval: coverage worker")


def _coefficient_rows(method, result, truth, z):
    se = np.sqrt(np.maximum(np.diag(result.cov_beta), 0.0))
    rows = []
    for k, name in enumerate(result.names):
        lo, hi = result.beta[k] - z * se[k], result.beta[k] + z * se[k]
        rows.append({"method": method, "covariate": name, "true": truth[name],
                     "estimate": result.beta[k], "se": se[k], "lo": lo, "hi": hi,
                     "covered": bool(lo <= truth[name] <= hi)})
    return rows


def _baseline_rows(method, result, grid, config, alpha):
    cumhaz = result.baseline[0]
    lower, upper = cumhaz.confidence_band(alpha, grid)
    truth = config.true_cumhaz(grid)
    rows = []
    for q, tau, est, lo, hi, true in zip(simulate.QUANTILES, grid, cumhaz(grid), lower, upper, truth):
        rows.append({"method": method, "quantile": q, "tau": tau, "true": true,
                     "estimate": est, "lo": lo, "hi": hi, "covered": bool(lo <= true <= hi)})
    return rows


def run_replicate(task):
    """
    Simulate and fit one replicate.

    :param task: (study config, cell, replicate number, seed sequence)
    :returns: dict with ``coefficients`` and ``baseline`` row lists, or an
      ``error`` message.
    """
    config, cell, replicate, seed = task
    rng = np.random.default_rng(seed)
    beta = {name: cell.others for name in VARIED}
    beta[cell.varied] = float(rng.uniform(-1.0, 1.0))
    epidemic = simulate.EpidemicConfig(
        n_nodes=config.n_nodes, ws_neighbors=config.ws_neighbors, rewire_prob=config.rewire_prob,
        weibull_shape=cell.alpha, weibull_rate=cell.gamma, infectious_mean=config.infectious_mean,
        beta_true=(beta["inf"], beta["sus"], beta["pair"]), stop_after_infections=config.infections,
        seed=int(rng.integers(2 ** 63 - 1)))
    out = {"cell": cell.name, "replicate": replicate}
    truth = {"x_%s" % name: value for name, value in beta.items()}
    z = normal_quantile(config.conf_alpha)
    try:
        sim = simulate.simulate_epidemic(epidemic)
        if sim.died_out:
            out["error"] = "epidemic died out"
            return out
        rows, sets = sim.pair_rows("complete")
        grid = sim.quantile_grid(rows)
        newton = complete.NewtonOptions(ties=config.ties)
        hat = complete.maximize(rows, config.relrisk, newton)
        tilde = em.ecm_fit(rows, sets, config.relrisk,
                           em.EMOptions(newton=newton, smooth=SmoothOptions(bandwidth=config.bandwidth)))
    except Exception as ex:  #pylint: disable=W0703
        log.warning("replicate %d of cell %s failed: %s: %s", replicate, cell.name, type(ex).__name__, ex)
        out["error"] = "%s: %s" % (type(ex).__name__, ex)
        return out

    out["coefficients"] = (_coefficient_rows("hat", hat, truth, z)
                           + _coefficient_rows("tilde", tilde, truth, z))
    out["baseline"] = (_baseline_rows("hat", hat, grid, epidemic, config.conf_alpha)
                       + _baseline_rows("tilde", tilde, grid, epidemic, config.conf_alpha))
    out["em_iterations"] = tilde.em_iterations
    out["em_converged"] = tilde.converged
    return out


def _tasks(config):
    seeds = np.random.SeedSequence(config.seed).spawn(len(config.cells) * config.replicates)
    k = 0
    for cell in config.cells:
        for replicate in range(config.replicates):
            yield config, cell, replicate, seeds[k]
            k += 1


def _collect(outcomes):
    coefficients, baseline, runs = [], [], []
    for out in outcomes:
        key = {"cell": out["cell"], "replicate": out["replicate"]}
        runs.append(dict(key, error=out.get("error"), em_iterations=out.get("em_iterations"),
                         em_converged=out.get("em_converged")))
        for row in out.get("coefficients", ()):
            coefficients.append(dict(key, **row))
        for row in out.get("baseline", ()):
            baseline.append(dict(key, **row))
    return pd.DataFrame(coefficients), pd.DataFrame(baseline), pd.DataFrame(runs)


def _coverage(frame, by):
    if frame.empty:
        return pd.DataFrame(columns=by + ["coverage", "n"])
    grouped = frame.groupby(by, sort=False)["covered"]
    return grouped.agg(coverage="mean", n="size").reset_index()


def _widths(coefficients, baseline):
    frames = []
    if not coefficients.empty:
        coef = coefficients.assign(target=coefficients["covariate"])
        frames.append(coef)
    if not baseline.empty:
        base_rows = baseline.assign(target=["cumhaz@%g" % q for q in baseline["quantile"]])
        frames.append(base_rows)
    if not frames:
        return pd.DataFrame(columns=["cell", "replicate", "target", "width_hat", "width_tilde", "ratio"])
    both = pd.concat(frames, ignore_index=True)
    both["width"] = both["hi"] - both["lo"]
    wide = both.pivot_table(index=["cell", "replicate", "target"], columns="method",
                            values="width", aggfunc="first").reset_index()
    wide = wide.rename(columns={"hat": "width_hat", "tilde": "width_tilde"})
    wide.columns.name = None
    with np.errstate(divide="ignore", invalid="ignore"):
        wide["ratio"] = wide["width_tilde"] / wide["width_hat"]
    return wide


COVERAGE_RANGE = (0.90, 0.98)
BASELINE_FLOOR = 0.88
MAX_MEDIAN_EM_ITERATIONS = 8
MIN_EM_CONVERGED = 0.95
SUS_WIDTH_RATIO = (0.9, 1.1)


def _check(name, cell, method, target, value, low=-np.inf, high=np.inf):
    value = float(value)
    return {"check": name, "cell": cell, "method": method, "target": target, "value": value,
            "low": low, "high": high, "passed": bool(np.isfinite(value) and low <= value <= high)}


def _lookup(frame, value_column, **keys):
    if frame.empty:
        return np.nan
    mask = np.ones(len(frame), dtype=bool)
    for column, value in keys.items():
        mask &= (frame[column] == value).to_numpy()
    return frame.loc[mask, value_column].mean() if mask.any() else np.nan


def acceptance_checks(tables, config):
    """
    Compare a finished study with the expected behavior of the design.

    Only the cells whose fixed coefficients are 0 take part. The checks are:

    * ``beta_coverage``: coverage of the varied coefficient in [0.90, 0.98]
      for both methods in every cell;
    * ``em_iterations``: median ECM iterations at most 8;
    * ``em_converged``: at least 95% of the ECM fits converged;
    * ``baseline_coverage``: ECM baseline coverage pooled over the cells of
      a shape, at least 0.88 at every quantile for shape 0.5 and below
      0.88 at the 75% and 90% quantiles for shape 2;
    * ``ci_width``: mean CI width of the ECM ``x_inf`` estimate above the
      complete-data one, and the two ``x_sus`` widths within 10%.

    :param tables: the tables returned by :func:`run_coverage_study`.
    :param config: the :class:`StudyConfig` that produced them.
    :returns: DataFrame with one row per check and a ``passed`` column.
    """
    design = {cell.name: cell for cell in config.cells if cell.others == 0.0}
    checks = []

    coverage = tables["coverage_beta"]
    for name, cell in design.items():
        target = "x_%s" % cell.varied
        for method in ("hat", "tilde"):
            value = _lookup(coverage, "coverage", cell=name, method=method, covariate=target)
            checks.append(_check("beta_coverage", name, method, target, value, *COVERAGE_RANGE))

    runs = tables["runs"]
    if runs.empty:
        iterations = pd.Series([], dtype=float)
    else:
        runs = runs[runs["cell"].isin(list(design))]
        iterations = pd.to_numeric(runs["em_iterations"], errors="coerce")
    fitted = iterations.notna()
    checks.append(_check("em_iterations", "all", "tilde", "median", iterations[fitted].median(),
                         high=MAX_MEDIAN_EM_ITERATIONS))
    converged = runs.loc[fitted, "em_converged"].astype(bool).mean() if fitted.any() else np.nan
    checks.append(_check("em_converged", "all", "tilde", "share", converged, low=MIN_EM_CONVERGED))

    baseline = tables["baseline_estimates"]
    if not baseline.empty:
        baseline = baseline[(baseline["method"] == "tilde") & baseline["cell"].isin(list(design))]
        baseline = baseline.assign(shape=baseline["cell"].map({name: cell.alpha for name, cell in design.items()}))
    shapes = {cell.alpha for cell in design.values()}
    below = np.nextafter(BASELINE_FLOOR, 0.0)
    for shape, quantiles, low, high in ((0.5, simulate.QUANTILES, BASELINE_FLOOR, 1.0),
                                        (2.0, (0.75, 0.90), 0.0, below)):
        if shape not in shapes:
            continue
        for q in quantiles:
            value = _lookup(baseline, "covered", shape=shape, quantile=q)
            checks.append(_check("baseline_coverage", "alpha=%g" % shape, "tilde", "cumhaz@%g" % q,
                                 value, low, high))

    estimates = tables["estimates"]
    if not estimates.empty:
        estimates = estimates[estimates["cell"].isin(list(design))]
        estimates = estimates.assign(width=estimates["hi"] - estimates["lo"])
    ratios = {}
    for target in ("x_inf", "x_sus"):
        hat = _lookup(estimates, "width", method="hat", covariate=target)
        tilde = _lookup(estimates, "width", method="tilde", covariate=target)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios[target] = np.float64(tilde) / np.float64(hat)
    checks.append(_check("ci_width", "all", "tilde/hat", "x_inf", ratios["x_inf"], low=np.nextafter(1.0, 2.0)))
    checks.append(_check("ci_width", "all", "tilde/hat", "x_sus", ratios["x_sus"], *SUS_WIDTH_RATIO))
    return pd.DataFrame(checks, columns=["check", "cell", "method", "target", "value", "low", "high", "passed"])


def run_coverage_study(config, out_dir=None):
    """
    Run every replicate of every cell and tabulate coverage.

    :param config: :class:`StudyConfig`.
    :param out_dir: directory for the CSV outputs, or None to skip writing.
    :returns: dict of DataFrames keyed ``estimates``, ``baseline_estimates``,
      ``runs``, ``coverage_beta``, ``coverage_baseline``, ``ci_widths``,
      ``acceptance``.
    """
    tasks = list(_tasks(config))
    log.info("coverage study: %d cell(s) x %d replicate(s) on %d worker(s)",
             len(config.cells), config.replicates, config.jobs)
    if config.jobs == 1:
        outcomes = [run_replicate(task) for task in tasks]
    else:
        with multiprocessing.Pool(config.jobs, initializer=_init_worker) as pool:
            outcomes = pool.map(run_replicate, tasks, chunksize=1)

    coefficients, baseline, runs = _collect(outcomes)
    failed = int(runs["error"].notna().sum()) if not runs.empty else 0
    if failed:
        log.warning("%d of %d replicate(s) failed or died out", failed, len(runs))

    tables = {"estimates": coefficients,
              "baseline_estimates": baseline,
              "runs": runs,
              "coverage_beta": _coverage(coefficients, ["cell", "method", "covariate"]),
              "coverage_baseline": _coverage(baseline, ["cell", "method", "quantile"]),
              "ci_widths": _widths(coefficients, baseline)}
    tables["acceptance"] = acceptance_checks(tables, config)
    failing = tables["acceptance"].loc[~tables["acceptance"]["passed"], "check"]
    if len(failing):
        log.info("%d acceptance check(s) not met: %s", len(failing), ", ".join(sorted(set(failing))))
    if out_dir is not None:
        for name, frame in tables.items():
            frame.to_csv(os.path.join(out_dir, name + ".csv"), index=False)
    return tables
