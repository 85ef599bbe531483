# -*- mode: python; tab-width:8; py-indent-offset:4; indent-tabs-mode:nil -*-
#pylint: disable=R0912,R0914
#too many branches; too many locals;

"""
Command line interface.

Usage: contact-interval [--version] [-v] {simulate,fit,fit-em,nelson-aalen,coverage-study,pairs} ...

Exit codes: 0 success, 1 data error, 2 convergence failure, 3 usage error.
Diagnostics go to standard error. Results go to the declared output
files; a JSON result or table with no output file is written to
standard output.

Environment Variables
---------------------

CONTACT_INTERVAL_THREADS
    overrides ``--jobs`` for ``coverage-study``; with neither set, the
    ``jobs`` key of the study JSON applies.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
import typing

import numpy as np
import pandas as pd

import contactinterval
from contactinterval import complete
from contactinterval import data
from contactinterval import em
from contactinterval import simulate
from contactinterval import study
from contactinterval.base import ConvergenceError, DataError, UsageError
from contactinterval.smooth import SmoothOptions

log = logging.getLogger(__name__)

THREADS_VARIABLE = "CONTACT_INTERVAL_THREADS"


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """
    Everything one invocation needs. Each command line flag sets one field;
    ``epidemic`` collects the ``simulate`` flags that set
    :class:`contactinterval.simulate.EpidemicConfig` fields.
    """
    command: str
    line_list: typing.Optional[str] = None
    pairs: typing.Optional[str] = None
    pairs_in: typing.Optional[str] = None
    config: typing.Optional[str] = None
    out: typing.Optional[str] = None
    json_out: typing.Optional[str] = None
    baseline_out: typing.Optional[str] = None
    weights_out: typing.Optional[str] = None
    trace_out: typing.Optional[str] = None
    probability_out: typing.Optional[str] = None
    relrisk: str = "loglinear"
    ties: str = "efron"
    strata: typing.Optional[str] = None
    strata_role: str = "inf"
    missing: str = "complete-case"
    mode: typing.Optional[str] = None
    covariates: typing.Optional[typing.Tuple[str, ...]] = None
    interaction: typing.Tuple[str, ...] = ()
    alpha: float = 0.05
    bandwidth: typing.Optional[float] = None
    max_em: int = 25
    min_em: int = 2
    em_tol: float = 0.002
    incubation: typing.Optional[float] = None
    latent: typing.Optional[float] = None
    infectious: typing.Optional[float] = None
    infer_imported: bool = False
    pattern: typing.Tuple[str, ...] = ()
    seed: typing.Optional[int] = None
    jobs: typing.Optional[int] = None
    replicates: typing.Optional[int] = None
    verbose: int = 0
    epidemic: typing.Mapping[str, object] = dataclasses.field(default_factory=dict)

    @classmethod
    def from_namespace(cls, namespace):
        values = vars(namespace)
        names = {f.name for f in dataclasses.fields(cls)}
        epidemic = {key: val for key, val in values.items() if key not in names}
        fields = {key: val for key, val in values.items() if key in names}
        for key in ("covariates", "pattern", "interaction"):
            if fields.get(key) is not None:
                fields[key] = tuple(fields[key])
        return cls(epidemic=epidemic, **fields)

    def schema(self):
        return data.LineListSchema(incubation=self.incubation, latent=self.latent,
                                   infectious_period=self.infectious, infer_imported=self.infer_imported)

    def policy(self, mode):
        return data.PairPolicy(mode=mode, missing=self.missing, strata=self.strata,
                               strata_role=self.strata_role, interactions=self.interactions())

    def interactions(self):
        return tuple(data.PairPolicy.parse_interaction(text) for text in self.interaction)

    def newton(self):
        return complete.NewtonOptions(ties=self.ties)

    def em_options(self, fix_beta=False):
        return em.EMOptions(min_iter=self.min_em, max_iter=self.max_em, ll_tol=self.em_tol,
                            fix_beta=fix_beta, smooth=SmoothOptions(bandwidth=self.bandwidth),
                            newton=self.newton())

    def threads(self):
        """Worker count from the environment variable, then ``--jobs``; None if neither is set."""
        env = os.environ.get(THREADS_VARIABLE)
        if env:
            try:
                return int(env)
            except ValueError:
                raise UsageError(None, "%s must be an integer, not %r" % (THREADS_VARIABLE, env))
        return self.jobs


class _Parser(argparse.ArgumentParser):
    """Argument parser that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(None, "%s: %s" % (self.prog, message))


def _add_input(parser):
    parser.add_argument("line_list", nargs="?", help="line-list CSV")
    parser.add_argument("--pairs", help="pair CSV; default is within-group pairs")
    parser.add_argument("--pairs-in", dest="pairs_in", help="pair-row CSV instead of a line list")
    parser.add_argument("--incubation", type=float, help="read t_onset and subtract this incubation period")
    parser.add_argument("--latent", type=float, help="latent period for every infected individual")
    parser.add_argument("--infectious", type=float, help="infectious period for every infected individual")
    parser.add_argument("--infer-imported", dest="infer_imported", action="store_true",
                        help="flag infected individuals with no possible infector as imported")
    parser.add_argument("--missing", choices=("complete-case", "drop-pair-only"),
                        help="missing covariate rule")
    parser.add_argument("--strata", help="stratify the baseline by this individual column")
    parser.add_argument("--strata-role", dest="strata_role", choices=("inf", "sus"),
                        help="take the stratum from the infector (inf) or the susceptible (sus)")
    parser.add_argument("--covariates", nargs="+", help="covariates to use; default all")
    parser.add_argument("--interaction", action="append",
                        help="add the product of two covariates, a:b (repeatable)")


def _add_model(parser):
    parser.add_argument("--relrisk", choices=("loglinear", "linear"), help="relative risk family")
    parser.add_argument("--ties", choices=("efron", "breslow"), help="tie policy")
    parser.add_argument("--alpha", type=float, help="one minus the confidence level")
    parser.add_argument("--json-out", dest="json_out", help="result JSON file")
    parser.add_argument("--baseline-out", dest="baseline_out", help="baseline table CSV")
    parser.add_argument("--probability-out", dest="probability_out",
                        help="transmission probability CSV")
    parser.add_argument("--pattern", action="append",
                        help="covariate pattern name=value,... for --probability-out (repeatable)")


def _add_em(parser):
    parser.add_argument("--bandwidth", type=float, help="hazard smoothing bandwidth")
    parser.add_argument("--max-em", dest="max_em", type=int, help="maximum ECM iterations")
    parser.add_argument("--min-em", dest="min_em", type=int, help="minimum ECM iterations")
    parser.add_argument("--em-tol", dest="em_tol", type=float,
                        help="expected log likelihood change for convergence")
    parser.add_argument("--trace-out", dest="trace_out", help="ECM trace CSV")


def build_parser():
    """The argument parser; unset flags are left out of the namespace."""
    parser = _Parser(prog="contact-interval", argument_default=argparse.SUPPRESS,
                     description="Relative risk regression on contact intervals.")
    parser.add_argument("--version", action="version", version="%(prog)s " + contactinterval.__version__)
    parser.add_argument("-v", "--verbose", action="count", help="-v for progress, -vv for debugging")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    sub = commands.add_parser("simulate", argument_default=argparse.SUPPRESS,
                              help="simulate an epidemic on a small-world network")
    sub.add_argument("--n-nodes", dest="n_nodes", type=int, help="number of nodes")
    sub.add_argument("--neighbors", dest="ws_neighbors", type=int, help="nearest neighbors in the ring")
    sub.add_argument("--rewire", dest="rewire_prob", type=float, help="rewiring probability")
    sub.add_argument("--shape", dest="weibull_shape", type=float, help="Weibull shape alpha")
    sub.add_argument("--rate", dest="weibull_rate", type=float, help="Weibull rate gamma")
    sub.add_argument("--infectious-mean", dest="infectious_mean", type=float, help="mean infectious period")
    sub.add_argument("--latent", type=float, help="latent period")
    sub.add_argument("--beta", dest="beta_true", type=float, nargs=3, metavar=("INF", "SUS", "PAIR"),
                     help="true coefficients")
    sub.add_argument("--infections", dest="stop_after_infections", type=int,
                     help="infections observed after the index case")
    sub.add_argument("--seed", type=int, help="random seed")
    sub.add_argument("--out", required=True, help="output directory")

    sub = commands.add_parser("fit", argument_default=argparse.SUPPRESS,
                              help="fit with who-infected-whom observed")
    _add_input(sub)
    _add_model(sub)

    sub = commands.add_parser("fit-em", argument_default=argparse.SUPPRESS,
                              help="fit with who-infected-whom unobserved")
    _add_input(sub)
    _add_model(sub)
    _add_em(sub)
    sub.add_argument("--weights-out", dest="weights_out", help="infector probability CSV")

    sub = commands.add_parser("nelson-aalen", argument_default=argparse.SUPPRESS,
                              help="marginal Nelson-Aalen estimate of the homogeneous model")
    _add_input(sub)
    _add_em(sub)
    sub.add_argument("--alpha", type=float, help="one minus the confidence level")
    sub.add_argument("--baseline-out", dest="baseline_out", help="baseline table CSV")
    sub.add_argument("--json-out", dest="json_out", help="result JSON file")

    sub = commands.add_parser("coverage-study", argument_default=argparse.SUPPRESS,
                              help="confidence interval coverage study")
    sub.add_argument("--config", help="study JSON")
    sub.add_argument("--replicates", type=int, help="replicates per cell")
    sub.add_argument("--jobs", type=int, help="worker processes")
    sub.add_argument("--seed", type=int, help="study seed")
    sub.add_argument("--out", required=True, help="output directory")

    sub = commands.add_parser("pairs", argument_default=argparse.SUPPRESS,
                              help="export the pair rows")
    _add_input(sub)
    sub.add_argument("--mode", choices=("complete", "unknown"),
                     help="event flags from the infector column (complete) or none (unknown); "
                     "default complete when the line list has infectors")
    sub.add_argument("--out", required=True, help="pair-row CSV")
    return parser


def _check_input(path, flag):
    if path is not None and not os.path.isfile(path):
        raise UsageError(None, "%s: no such file %s" % (flag, path))


def _check_output(path, flag):
    if path is None:
        return
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise UsageError(None, "%s: directory %s does not exist" % (flag, parent))


def resolve(cfg):
    """
    Check every path before computing anything.

    :raises: **UsageError** on missing inputs, missing output directories
      or conflicting flags.
    """
    if cfg.command in ("fit", "fit-em", "nelson-aalen", "pairs"):
        if (cfg.line_list is None) == (cfg.pairs_in is None):
            raise UsageError(None, "give exactly one of a line list or --pairs-in")
        if cfg.pairs_in is not None and (cfg.pairs is not None or cfg.incubation is not None
                                         or cfg.strata is not None or cfg.interaction):
            raise UsageError(None, "--pairs-in cannot be combined with --pairs, --incubation, "
                             "--strata or --interaction")
        try:
            cfg.interactions()
        except ValueError as ex:
            raise UsageError(ex, "--interaction:")
        if cfg.command == "pairs" and cfg.pairs_in is not None:
            raise UsageError(None, "pairs needs a line list")
        _check_input(cfg.line_list, "line list")
        _check_input(cfg.pairs, "--pairs")
        _check_input(cfg.pairs_in, "--pairs-in")
    if cfg.command == "coverage-study":
        _check_input(cfg.config, "--config")
    if cfg.pattern and cfg.probability_out is None:
        raise UsageError(None, "--pattern needs --probability-out")
    for flag in ("json_out", "baseline_out", "weights_out", "trace_out", "probability_out"):
        _check_output(getattr(cfg, flag), "--" + flag.replace("_", "-"))
    if cfg.command == "pairs":
        _check_output(cfg.out, "--out")
    elif cfg.out is not None:
        os.makedirs(cfg.out, exist_ok=True)


def _load(cfg, mode):
    if cfg.pairs_in is not None:
        rows, sets = data.read_pair_rows(cfg.pairs_in)
    else:
        records, contacts = data.load_line_list(cfg.line_list, cfg.schema(), cfg.pairs)
        if mode is None:
            mode = "complete" if any(rec.infector is not None for rec in records) else "unknown"
        rows, sets = data.build_pair_rows(records, contacts, cfg.policy(mode))
    if cfg.covariates is not None:
        unknown = [name for name in cfg.covariates if name not in rows.names]
        if unknown:
            raise UsageError(None, "unknown covariate(s) %s" % ", ".join(unknown))
        rows = rows.select_covariates(cfg.covariates)
    log.info("%d pair row(s), %d infectee(s) with possible infectors", len(rows), len(sets))
    return rows, sets


def _emit_json(payload, path):
    text = json.dumps(payload, indent=2)
    if path is None:
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w") as fp:
            fp.write(text + "\n")


def _emit_table(frame, path):
    if path is None:
        frame.to_csv(sys.stdout, index=False)
    else:
        frame.to_csv(path, index=False)


def _parse_pattern(text, names):
    values = np.zeros(len(names))
    for item in text.split(","):
        if not item.strip():
            continue
        name, sep, value = item.partition("=")
        name = name.strip()
        if not sep or name not in names:
            raise UsageError(None, "bad pattern item %r; covariates are %s" % (item, ", ".join(names)))
        try:
            values[names.index(name)] = float(value)
        except ValueError:
            raise UsageError(None, "bad pattern value %r" % value)
    return values


def _probabilities(fitter, cfg, names):
    frames = []
    patterns = cfg.pattern or ("",)
    for text in patterns:
        x = _parse_pattern(text, list(names))
        for stratum, cumhaz in fitter.result.baseline.items():
            tau = cumhaz.jump_times
            frames.append(pd.DataFrame({"pattern": text, "stratum": stratum, "tau": tau,
                                        "probability": fitter.transmission_probability(x, tau, stratum)}))
    return pd.concat(frames, ignore_index=True)


def _summary_payload(rows, sets):
    return {"exposure": data.exposure_diagnostic(rows),
            "n_rows": len(rows),
            "n_infectees": len(sets),
            "n_trees": sets.n_trees()}


def _emit_fit(fitter, cfg, rows, sets):
    payload = fitter.to_dict(cfg.alpha)
    payload.update(_summary_payload(rows, sets))
    _emit_json(payload, cfg.json_out)
    if cfg.baseline_out is not None:
        _emit_table(fitter.baseline_table(cfg.alpha), cfg.baseline_out)
    if cfg.probability_out is not None:
        _emit_table(_probabilities(fitter, cfg, rows.names), cfg.probability_out)


def _run_simulate(cfg):
    values = dict(cfg.epidemic)
    if cfg.latent is not None:
        values["latent"] = cfg.latent
    if cfg.seed is not None:
        values["seed"] = cfg.seed
    if "beta_true" in values:
        values["beta_true"] = tuple(values["beta_true"])
    sim = simulate.simulate_epidemic(simulate.EpidemicConfig(**values))
    paths = simulate.write_outputs(sim, cfg.out)
    if sim.died_out:
        log.warning("epidemic died out after %d infection(s)", sim.n_infected)
    log.info("wrote %s", ", ".join(sorted(paths.values())))


def _run_fit(cfg):
    rows, sets = _load(cfg, "complete")
    fitter = complete.Fitter(cfg.relrisk, cfg.newton())
    fitter.fit(rows)
    _emit_fit(fitter, cfg, rows, sets)


def _run_fit_em(cfg):
    rows, sets = _load(cfg, "unknown")
    fitter = em.Fitter(cfg.relrisk, cfg.em_options())
    result = fitter.fit(rows, sets)
    _emit_fit(fitter, cfg, rows, sets)
    if cfg.weights_out is not None:
        _emit_table(result.weights.to_frame(), cfg.weights_out)
    if cfg.trace_out is not None:
        _emit_table(result.trace, cfg.trace_out)


def _run_nelson_aalen(cfg):
    rows, sets = _load(cfg, "unknown")
    result = em.marginal_nelson_aalen(rows, sets, cfg.em_options(fix_beta=True))
    fitter = em.Fitter("loglinear", name="nelson-aalen")
    fitter.result = result
    table = fitter.baseline_table(cfg.alpha)
    _emit_table(table, cfg.baseline_out)
    if cfg.json_out is not None:
        payload = fitter.to_dict(cfg.alpha)
        payload.update(_summary_payload(rows, sets))
        _emit_json(payload, cfg.json_out)
    if cfg.trace_out is not None:
        _emit_table(result.trace, cfg.trace_out)


def _run_coverage_study(cfg):
    config = study.StudyConfig.from_json(cfg.config) if cfg.config else study.StudyConfig()
    overrides = {}
    if cfg.threads() is not None:
        overrides["jobs"] = cfg.threads()
    if cfg.replicates is not None:
        overrides["replicates"] = cfg.replicates
    if cfg.seed is not None:
        overrides["seed"] = cfg.seed
    config = dataclasses.replace(config, **overrides)
    study.run_coverage_study(config, cfg.out)


def _run_pairs(cfg):
    rows, _unused = _load(cfg, cfg.mode)
    data.write_pair_rows(rows, cfg.out)


RUNNERS = {"simulate": _run_simulate,
           "fit": _run_fit,
           "fit-em": _run_fit_em,
           "nelson-aalen": _run_nelson_aalen,
           "coverage-study": _run_coverage_study,
           "pairs": _run_pairs}

_handler = None


def _configure_logging(verbosity):
    global _handler
    root = logging.getLogger("contactinterval")
    if _handler is not None:
        root.removeHandler(_handler)
    _handler = logging.StreamHandler(sys.stderr)
    _handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(_handler)
    root.setLevel(logging.DEBUG if verbosity >= 2 else logging.INFO if verbosity == 1 else logging.WARNING)


def dispatch(argv):
    """
    Run one command.

    :param argv: arguments without the program name.
    :returns: exit code.
    """
    try:
        namespace = build_parser().parse_args(argv)
    except UsageError as ex:
        sys.stderr.write("%s\n" % ex)
        return 3
    except SystemExit as ex:
        return ex.code or 0

    try:
        cfg = RunConfig.from_namespace(namespace)
        _configure_logging(cfg.verbose)
        resolve(cfg)
        RUNNERS[cfg.command](cfg)
    except UsageError as ex:
        log.error("%s", ex)
        return 3
    except ValueError as ex:
        log.error("bad option: %s", ex)
        return 3
    except DataError as ex:
        log.error("%s", ex)
        return 1
    except ConvergenceError as ex:
        log.error("%s", ex)
        return 2
    return 0


def main():
    """Console entry point."""
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
