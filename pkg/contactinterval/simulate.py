# -*- mode: python; tab-width:8; py-indent-offset:4; indent-tabs-mode:nil -*-

"""
Network epidemic simulator.

Epidemics run on a Watts-Strogatz small-world network. Each node has an
infectiousness covariate ``x_inf`` and a susceptibility covariate
``x_sus``, and each ordered pair of neighbors a pairwise covariate
``x_pair``, all Bernoulli. The hazard of infectious contact from i to j
at infectiousness age tau is

    exp(beta_inf x_inf_i + beta_sus x_sus_j + beta_pair x_pair_ij) lambda0(tau)

with a Weibull baseline, Lambda0(tau) = (gamma tau)^alpha. One imported
index case is infected at time 0; the index case and the next
``stop_after_infections`` infections are observed, and observation ends
at the time of the last of them.
"""

import dataclasses
import heapq
import json
import logging
import os
import typing

import networkx as nx
import numpy as np

from contactinterval import data
from contactinterval.data import ContactSet, LineListRecord

log = logging.getLogger(__name__)

COVARIATES = ("x_inf", "x_sus", "x_pair")
QUANTILES = (0.10, 0.25, 0.50, 0.75, 0.90)


@dataclasses.dataclass(frozen=True)
class EpidemicConfig:
    """
    Simulation design. ``beta_true`` is (beta_inf, beta_sus, beta_pair).
    """
    n_nodes: int = 2000
    ws_neighbors: int = 10
    rewire_prob: float = 0.1
    weibull_shape: float = 0.5
    weibull_rate: float = 0.2
    infectious_mean: float = 1.0
    latent: float = 0.0
    beta_true: typing.Tuple[float, float, float] = (0.0, 0.0, 0.0)
    covariate_prob: float = 0.5
    stop_after_infections: int = 300
    seed: typing.Optional[int] = None

    def __post_init__(self):
        if not self.weibull_shape > 0 or not self.weibull_rate > 0:
            raise ValueError("Weibull shape and rate must be positive")
        if not self.infectious_mean > 0:
            raise ValueError("infectious_mean must be positive")
        if not self.latent >= 0:
            raise ValueError("latent must be nonnegative")
        if not 0 <= self.rewire_prob <= 1:
            raise ValueError("rewire_prob must lie in [0, 1]")
        if self.ws_neighbors % 2 or not 0 < self.ws_neighbors < self.n_nodes:
            raise ValueError("ws_neighbors must be even, positive and less than n_nodes")
        if not 0 <= self.covariate_prob <= 1:
            raise ValueError("covariate_prob must lie in [0, 1]")
        if self.stop_after_infections < 1:
            raise ValueError("stop_after_infections must be at least 1")
        if len(self.beta_true) != len(COVARIATES):
            raise ValueError("beta_true needs one value per covariate %s" % (COVARIATES,))

    def true_cumhaz(self, tau):
        """Baseline cumulative hazard (gamma tau)^alpha."""
        return (self.weibull_rate * np.asarray(tau, dtype=float)) ** self.weibull_shape

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["beta_true"] = list(self.beta_true)
        return out


@dataclasses.dataclass(frozen=True, eq=False)
class SimOutput:
    """
    One simulated epidemic: line list, contact set, true infectors and
    the contact interval drawn for every ordered pair (i, j) where j was
    still susceptible when i was infected, before comparison with the
    infectious period of i.
    """
    records: typing.List[LineListRecord]
    contacts: ContactSet
    infector: typing.Dict[int, int]
    config: EpidemicConfig
    obs_limit: float
    died_out: bool
    contact_intervals: typing.Dict[typing.Tuple[int, int], float]

    @property
    def contact_draws(self):
        """All drawn contact intervals, in drawing order."""
        return np.fromiter(self.contact_intervals.values(), dtype=float, count=len(self.contact_intervals))

    @property
    def n_infected(self):
        return sum(1 for rec in self.records if rec.observed_infected)

    def pair_rows(self, mode="complete"):
        """Pair rows and infectious sets for fitting."""
        return data.build_pair_rows(self.records, self.contacts, data.PairPolicy(mode=mode))

    def quantile_grid(self, rows=None, quantiles=QUANTILES):
        """Quantiles of all possible (censored and uncensored) contact intervals."""
        if rows is None:
            rows, _unused = self.pair_rows()
        return np.quantile(rows.stop, quantiles)

    def truth(self):
        """The `truth.json` content."""
        beta_inf, beta_sus, beta_pair = self.config.beta_true
        return {"beta": {"x_inf": beta_inf, "x_sus": beta_sus, "x_pair": beta_pair},
                "alpha": self.config.weibull_shape,
                "gamma": self.config.weibull_rate,
                "v": {str(j): i for j, i in sorted(self.infector.items())},
                "obs_limit": self.obs_limit,
                "died_out": self.died_out,
                "config": self.config.to_dict()}


def _graph_seed(rng):
    return int(rng.integers(2 ** 31 - 1))


def watts_strogatz(n, k, p, seed=None):
    """
    Watts-Strogatz small-world network as a symmetric contact set.

    Starts from a ring where each node is joined to its k nearest
    neighbors and rewires each edge with probability p to a uniformly
    chosen endpoint, never creating self-loops or duplicate edges.

    :raises: **ValueError** on invalid parameters.
    """
    if k % 2 or not 0 < k < n:
        raise ValueError("k must be even, positive and less than n")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if isinstance(seed, np.random.Generator):
        seed = _graph_seed(seed)
    graph = nx.watts_strogatz_graph(n, k, p, seed=seed)
    edges = []
    for i, j in graph.edges():
        edges.append((i, j))
        edges.append((j, i))
    return ContactSet(edges)


def simulate_epidemic(config):
    """
    Run one epidemic.

    :param config: :class:`EpidemicConfig`.
    :rtype: :class:`SimOutput`; ``died_out`` is set when the epidemic ends
      before the target number of infections.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_nodes
    network = watts_strogatz(n, config.ws_neighbors, config.rewire_prob, seed=_graph_seed(rng))
    neighbors = {i: [] for i in range(n)}
    for i, j in network:
        neighbors[i].append(j)

    x_inf = rng.binomial(1, config.covariate_prob, size=n).astype(float)
    x_sus = rng.binomial(1, config.covariate_prob, size=n).astype(float)
    pairs = list(network)
    x_pair = dict(zip(pairs, rng.binomial(1, config.covariate_prob, size=len(pairs)).astype(float)))
    periods = rng.exponential(config.infectious_mean, size=n)
    beta_inf, beta_sus, beta_pair = config.beta_true

    index = int(rng.integers(n))
    infection_time = {}
    infector = {}
    draws = {}
    queue = [(0.0, index, -1)]
    target = config.stop_after_infections + 1
    obs_limit = np.inf

    while queue and len(infection_time) < target:
        t, j, i = heapq.heappop(queue)
        if j in infection_time:
            continue
        infection_time[j] = t
        if i >= 0:
            infector[j] = i
        if len(infection_time) == target:
            obs_limit = t
            break

        onset = t + config.latent
        for k in neighbors[j]:
            if k in infection_time:
                continue
            risk = np.exp(beta_inf * x_inf[j] + beta_sus * x_sus[k] + beta_pair * x_pair[(j, k)])
            # inverse of the scaled cumulative hazard
            tau = (rng.exponential() / risk) ** (1.0 / config.weibull_shape) / config.weibull_rate
            draws[(j, k)] = tau
            if tau <= periods[j]:
                heapq.heappush(queue, (onset + tau, k, j))

    died_out = len(infection_time) < target
    if died_out:
        log.info("epidemic died out after %d infection(s)", len(infection_time))

    records = []
    for node in range(n):
        t = infection_time.get(node, np.inf)
        records.append(LineListRecord(
            id=node,
            t_infection=float(t),
            latent=config.latent,
            infectious_period=float(periods[node]),
            obs_limit=float(obs_limit),
            covariates={"x_inf": x_inf[node], "x_sus": x_sus[node]},
            imported=node == index,
            infector=infector.get(node)))

    contacts = ContactSet(pairs, {pair: [(0.0, {"x_pair": value})] for pair, value in x_pair.items()})
    return SimOutput(records=records, contacts=contacts, infector=infector, config=config,
                     obs_limit=float(obs_limit), died_out=died_out,
                     contact_intervals=draws)


def write_outputs(sim, out_dir):
    """
    Write ``line_list.csv``, ``pairs.csv`` and ``truth.json`` into *out_dir*.

    :returns: dict of written paths.
    """
    paths = {"line_list": os.path.join(out_dir, "line_list.csv"),
             "pairs": os.path.join(out_dir, "pairs.csv"),
             "truth": os.path.join(out_dir, "truth.json")}
    data.write_line_list(sim.records, paths["line_list"])
    data.write_pairs(sim.contacts, paths["pairs"])
    with open(paths["truth"], "w") as fp:
        json.dump(sim.truth(), fp, indent=2, default=float)
    return paths
