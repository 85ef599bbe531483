# -*- mode: python; tab-width:8; py-indent-offset:4; indent-tabs-mode:nil -*-
#pylint: disable=C0301
#line length;

"""
Line lists, contact sets and pairwise risk sets.

Use this module to read an epidemic line list, build the ordered pairs
at risk of infectious contact on the infectiousness-age time scale, and
export or re-import those pair rows.

File formats
------------

Line list CSV: ``id,group,t_infection,latent,infectious_period,obs_limit,imported,<covariates>``.
An empty cell is missing; ``inf`` is allowed for ``t_infection``. An
optional ``infector`` column holds the observed infector of each
non-imported infection. A ``t_onset`` column may replace ``t_infection``
when a :class:`LineListSchema` gives the incubation period.

Pair CSV: ``i,j,<pair covariates>``, optionally with a ``from`` column giving
the infectiousness age from which that row's pair covariates apply.

Pair-row CSV: ``i,j,start,stop,event,candidate,stratum,weight,<covariates>``.
"""

import collections
import dataclasses
import itertools
import logging
import math
import typing

import numpy as np
import pandas as pd

from contactinterval.base import DataError

log = logging.getLogger(__name__)

RESERVED_COLUMNS = ("id", "group", "t_infection", "t_onset", "latent", "infectious_period",
                    "obs_limit", "imported", "infector")
PAIR_ROW_COLUMNS = ("i", "j", "start", "stop", "event", "candidate", "stratum", "weight")
_TRUE_STRINGS = ("1", "1.0", "true", "t", "yes", "y")


@dataclasses.dataclass(frozen=True)
class LineListRecord:
    """
    One individual's event times and covariates.

    ``t_infection`` is absolute time (``inf`` if never infected), ``latent``
    and ``infectious_period`` are durations, ``obs_limit`` is the time until
    which infection in this individual is observed.
    """
    id: int
    t_infection: float
    latent: float
    infectious_period: float
    obs_limit: float
    covariates: typing.Mapping[str, object] = dataclasses.field(default_factory=dict)
    imported: bool = False
    group: object = None
    infector: typing.Optional[int] = None

    @property
    def infected(self):
        """True if infected (at any finite time)."""
        return math.isfinite(self.t_infection)

    @property
    def observed_infected(self):
        """True if infected no later than the observation limit."""
        return self.infected and self.t_infection <= self.obs_limit

    @property
    def onset(self):
        """Onset of infectiousness, t + latent."""
        return self.t_infection + self.latent

    @property
    def removal(self):
        """End of infectiousness."""
        return self.t_infection + self.latent + self.infectious_period

    def validate(self, row=None):
        """
        Check the record invariants.

        :param row: CSV line number used in the error message.
        :raises: **DataError** on a violated invariant.
        """
        where = "" if row is None else "row %d: " % row
        if math.isnan(self.t_infection):
            raise DataError(None, where + "t_infection is missing for id %s" % self.id)
        if math.isnan(self.obs_limit):
            raise DataError(None, where + "obs_limit is missing for id %s" % self.id)
        if self.imported and not self.infected:
            raise DataError(None, where + "imported individual %s has no infection time" % self.id)
        if self.infected:
            if not self.latent >= 0:
                raise DataError(None, where + "latent period must be >= 0 for id %s" % self.id)
            if not self.infectious_period > 0:
                raise DataError(None, where + "infectious period must be > 0 for id %s" % self.id)
            if not math.isfinite(self.removal):
                raise DataError(None, where + "infectious period must be finite for id %s" % self.id)


class ContactSet(object):
    """
    Ordered pairs (i, j) between which infectious contact is possible.

    :param edges: iterable of (i, j) pairs; self-pairs are rejected.
    :param pair_covariates: optional map (i, j) -> list of (from_age, {name: value}).
    """

    def __init__(self, edges, pair_covariates=None):
        edges = frozenset((int(i), int(j)) for i, j in edges)
        for i, j in edges:
            if i == j:
                raise DataError(None, "self-pair (%d, %d) in contact set" % (i, j))
        self.edges = edges
        self.pair_covariates = dict(pair_covariates or {})
        names = set()
        for pieces in self.pair_covariates.values():
            for _unused_from, values in pieces:
                names.update(values)
        self.pair_names = tuple(sorted(names))

    @classmethod
    def from_groups(cls, records):
        """All within-group ordered pairs; records with no group get no contacts."""
        groups = collections.defaultdict(list)
        for rec in records:
            if rec.group is not None:
                groups[rec.group].append(rec.id)
        edges = []
        for members in groups.values():
            edges.extend(itertools.permutations(members, 2))
        return cls(edges)

    def __contains__(self, pair):
        return pair in self.edges

    def __iter__(self):
        return iter(sorted(self.edges))

    def __len__(self):
        return len(self.edges)

    def covariate_pieces(self, i, j):
        """Return the (from_age, values) pieces for pair ij, sorted by age."""
        return sorted(self.pair_covariates.get((i, j), [(0.0, {})]), key=lambda piece: piece[0])


@dataclasses.dataclass(frozen=True)
class PairRiskRow:
    """One (start, stop] at-risk interval of the ordered pair ij in infectiousness age."""
    infector: int
    susceptible: int
    start: float
    stop: float
    event: bool
    candidate: bool
    covariates: typing.Tuple[float, ...]
    stratum: int = 0
    weight: float = 1.0


class PairRows(object):
    """
    Column-oriented, read-only table of :class:`PairRiskRow`.

    :param names: covariate names, one per column of *X*.
    """

    def __init__(self, infector, susceptible, start, stop, event, candidate, X, names,
                 stratum=None, weight=None, strata_labels=None):

        n = len(infector)
        self.infector = _column(infector, int)
        self.susceptible = _column(susceptible, int)
        self.start = _column(start, float)
        self.stop = _column(stop, float)
        self.event = _column(event, bool)
        self.candidate = _column(candidate, bool)
        self.stratum = _column(np.zeros(n) if stratum is None else stratum, int)
        self.weight = _column(np.ones(n) if weight is None else weight, float)
        X = np.array(X, dtype=float).reshape(n, len(names))
        X.setflags(write=False)
        self.X = X
        self.names = tuple(names)
        self.strata_labels = dict(strata_labels or {})

        if np.any(self.stop <= self.start) or np.any(self.start < 0):
            raise DataError(None, "pair rows need 0 <= start < stop")
        if np.any(self.weight < 0) or np.any(self.weight > 1):
            raise DataError(None, "pair row weights must lie in [0, 1]")
        if np.any(self.event & ~self.candidate):
            raise DataError(None, "an event row must be a candidate row")

    @classmethod
    def from_rows(cls, rows, names):
        """Build a table from a sequence of :class:`PairRiskRow`."""
        rows = list(rows)
        return cls([r.infector for r in rows], [r.susceptible for r in rows],
                   [r.start for r in rows], [r.stop for r in rows],
                   [r.event for r in rows], [r.candidate for r in rows],
                   np.array([r.covariates for r in rows], dtype=float).reshape(len(rows), len(names)),
                   names, stratum=[r.stratum for r in rows], weight=[r.weight for r in rows])

    def __len__(self):
        return len(self.infector)

    def __iter__(self):
        for k in range(len(self)):
            yield PairRiskRow(int(self.infector[k]), int(self.susceptible[k]),
                              float(self.start[k]), float(self.stop[k]),
                              bool(self.event[k]), bool(self.candidate[k]),
                              tuple(float(v) for v in self.X[k]),
                              int(self.stratum[k]), float(self.weight[k]))

    @property
    def n_covariates(self):
        return self.X.shape[1]

    @property
    def horizon(self):
        """Largest infectiousness age at which any pair is at risk."""
        return float(self.stop.max()) if len(self) else 0.0

    def take(self, index):
        """Return the sub-table selected by a boolean mask or index array."""
        return PairRows(self.infector[index], self.susceptible[index], self.start[index],
                        self.stop[index], self.event[index], self.candidate[index],
                        self.X[index], self.names, stratum=self.stratum[index],
                        weight=self.weight[index], strata_labels=self.strata_labels)

    def replace(self, **columns):
        """Return a copy with some columns replaced."""
        fields = dict(infector=self.infector, susceptible=self.susceptible, start=self.start,
                      stop=self.stop, event=self.event, candidate=self.candidate, X=self.X,
                      names=self.names, stratum=self.stratum, weight=self.weight,
                      strata_labels=self.strata_labels)
        fields.update(columns)
        return PairRows(**fields)

    def select_covariates(self, names):
        """Return a copy restricted to the named covariate columns."""
        index = [self.names.index(name) for name in names]
        return self.replace(X=self.X[:, index], names=tuple(names))

    def to_frame(self):
        """The pair-row export layout as a DataFrame."""
        frame = pd.DataFrame({"i": self.infector, "j": self.susceptible,
                              "start": self.start, "stop": self.stop,
                              "event": self.event.astype(int), "candidate": self.candidate.astype(int),
                              "stratum": self.stratum, "weight": self.weight})
        for k, name in enumerate(self.names):
            frame[name] = self.X[:, k]
        return frame


def _column(values, dtype):
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.setflags(write=False)
    return arr


class InfectiousSets(object):
    """
    Possible infectors of each non-imported infectee.

    :param sets: map infectee id -> ordered sequence of infector ids.
    """

    def __init__(self, sets):
        self.sets = {int(j): tuple(sorted(int(i) for i in infectors)) for j, infectors in sets.items()}

    @classmethod
    def from_rows(cls, rows):
        """Recover the infectious sets from the candidate rows of a table."""
        sets = collections.defaultdict(list)
        for i, j in zip(rows.infector[rows.candidate], rows.susceptible[rows.candidate]):
            sets[int(j)].append(int(i))
        return cls(sets)

    def __getitem__(self, j):
        return self.sets[j]

    def __contains__(self, j):
        return j in self.sets

    def __iter__(self):
        return iter(sorted(self.sets))

    def __len__(self):
        return len(self.sets)

    def items(self):
        return sorted(self.sets.items())

    def sizes(self):
        """Map infectee -> number of possible infectors."""
        return {j: len(infectors) for j, infectors in self.items()}

    def n_candidates(self):
        return sum(len(infectors) for infectors in self.sets.values())

    def n_trees(self):
        """Number of possible transmission trees (exact integer)."""
        return math.prod(len(infectors) for infectors in self.sets.values())


@dataclasses.dataclass(frozen=True)
class LineListSchema:
    """
    How to read a line list.

    When ``incubation`` is set the file carries ``t_onset`` and the loader
    uses ``t_infection = t_onset - incubation``. ``latent`` and
    ``infectious_period`` fill (or override) those columns for every
    infected individual. With ``infer_imported`` an infected individual
    with an empty infectious set is flagged imported instead of rejected.
    """
    incubation: typing.Optional[float] = None
    latent: typing.Optional[float] = None
    infectious_period: typing.Optional[float] = None
    infer_imported: bool = False


@dataclasses.dataclass(frozen=True)
class PairPolicy:
    """
    How to build pair rows.

    ``mode`` is "complete" (who-infected-whom observed, from the
    ``infector`` column) or "unknown". ``missing`` is "complete-case" or
    "drop-pair-only". Covariate roles default to ``*_inf`` individual
    columns (from the infector), ``*_sus`` individual columns (from the
    susceptible) and every pair covariate. Each ``interactions`` entry
    (a, b) adds the product column ``a:b`` of two of those covariates.
    """
    mode: str = "unknown"
    missing: str = "complete-case"
    infectiousness: typing.Optional[typing.Tuple[str, ...]] = None
    susceptibility: typing.Optional[typing.Tuple[str, ...]] = None
    pairwise: typing.Optional[typing.Tuple[str, ...]] = None
    strata: typing.Optional[str] = None
    strata_role: str = "inf"
    interactions: typing.Tuple[typing.Tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.mode not in ("complete", "unknown"):
            raise ValueError("mode must be 'complete' or 'unknown', not %r" % self.mode)
        if self.missing not in ("complete-case", "drop-pair-only"):
            raise ValueError("missing must be 'complete-case' or 'drop-pair-only', not %r" % self.missing)
        if self.strata_role not in ("inf", "sus"):
            raise ValueError("strata_role must be 'inf' or 'sus', not %r" % self.strata_role)
        for pair in self.interactions:
            if len(pair) != 2 or pair[0] == pair[1]:
                raise ValueError("an interaction needs two different covariates, not %r" % (pair,))

    @staticmethod
    def parse_interaction(text):
        """Split ``"a:b"`` into ("a", "b")."""
        first, sep, second = text.partition(":")
        if not sep or not first.strip() or not second.strip() or ":" in second:
            raise ValueError("interaction must look like a:b, not %r" % text)
        return first.strip(), second.strip()


def interaction_name(pair):
    return "%s:%s" % tuple(pair)


def _is_missing(value):
    if value is None:
        return True
    try:
        return bool(pd.isna(value))
    except (TypeError, ValueError):
        return False


def _to_float(value, default=np.nan):
    if _is_missing(value):
        return default
    try:
        return float(value)
    except (TypeError, ValueError):
        raise DataError(None, "cannot convert %r to a number" % (value,))


def _to_int(value, what):
    try:
        number = float(value)
    except (TypeError, ValueError) as ex:
        raise DataError(ex, "bad %s %r:" % (what, value))
    if not number.is_integer():
        raise DataError(None, "bad %s %r: not an integer" % (what, value))
    return int(number)


def _to_bool(value):
    if _is_missing(value):
        return False
    return str(value).strip().lower() in _TRUE_STRINGS


def _read_csv(path):
    try:
        return pd.read_csv(path, skipinitialspace=True, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as ex:
        raise DataError(ex, "cannot read %s:" % path)


def read_records(path, schema=None):
    """
    Read and validate the records of a line-list CSV.

    :param path: line list file name.
    :param schema: :class:`LineListSchema`, or None for the plain layout.
    :returns: list of :class:`LineListRecord`.
    :raises: **DataError** on malformed rows, reported with line numbers.
    """
    schema = schema or LineListSchema()
    frame = _read_csv(path)
    time_column = "t_onset" if schema.incubation is not None else "t_infection"
    required = ["id", time_column, "obs_limit"]
    if schema.latent is None:
        required.append("latent")
    if schema.infectious_period is None:
        required.append("infectious_period")
    absent = [col for col in required if col not in frame.columns]
    if absent:
        raise DataError(None, "%s: missing column(s) %s" % (path, ", ".join(absent)))

    covariate_names = [col for col in frame.columns if col not in RESERVED_COLUMNS]
    records = []
    seen = set()
    for index, row in frame.iterrows():
        line = index + 2
        try:
            ident = _to_int(row["id"], "id")
        except DataError as ex:
            raise DataError(ex, "row %d:" % line)
        if ident in seen:
            raise DataError(None, "row %d: duplicate id %d" % (line, ident))
        seen.add(ident)

        try:
            t_infection = _to_float(row[time_column])
            if schema.incubation is not None:
                t_infection -= schema.incubation
            infected = math.isfinite(t_infection)
            latent = schema.latent if schema.latent is not None and infected else _to_float(row.get("latent"))
            infectious = (schema.infectious_period if schema.infectious_period is not None and infected
                          else _to_float(row.get("infectious_period")))
            infector = row.get("infector")
            record = LineListRecord(
                id=ident,
                t_infection=t_infection,
                latent=latent,
                infectious_period=infectious,
                obs_limit=_to_float(row["obs_limit"]),
                covariates={name: (None if _is_missing(row[name]) else row[name]) for name in covariate_names},
                imported=_to_bool(row.get("imported")),
                group=None if _is_missing(row.get("group")) else row.get("group"),
                infector=None if _is_missing(infector) else _to_int(infector, "infector"))
        except DataError as ex:
            raise DataError(None, "row %d:" % line, ex)
        record.validate(line)
        records.append(record)
    return records


def read_pairs(path):
    """
    Read a pair CSV into a :class:`ContactSet`.

    :raises: **DataError** on malformed rows.
    """
    frame = _read_csv(path)
    for col in ("i", "j"):
        if col not in frame.columns:
            raise DataError(None, "%s: missing column %s" % (path, col))
    names = [col for col in frame.columns if col not in ("i", "j", "from")]
    edges = []
    pieces = collections.defaultdict(list)
    for index, row in frame.iterrows():
        line = index + 2
        try:
            i, j = _to_int(row["i"], "infector id"), _to_int(row["j"], "susceptible id")
        except DataError as ex:
            raise DataError(ex, "row %d:" % line)
        if i == j:
            raise DataError(None, "row %d: self-pair (%d, %d)" % (line, i, j))
        start = _to_float(row.get("from"), 0.0) if "from" in frame.columns else 0.0
        if start < 0:
            raise DataError(None, "row %d: negative covariate change age" % line)
        edges.append((i, j))
        pieces[(i, j)].append((start, {name: _to_float(row[name]) for name in names}))
    return ContactSet(edges, pieces)


def infectious_sets(records, contacts):
    """
    Compute the infectious set of every observed, non-imported infectee.

    i is a possible infector of j iff C_ij = 1 and i is infectious at t_j,
    i.e. t_i + latent_i < t_j <= t_i + latent_i + infectious_period_i.
    """
    by_id = {rec.id: rec for rec in records}
    sets = {rec.id: [] for rec in records if rec.observed_infected and not rec.imported}
    for i, j in contacts:
        if j not in sets or i not in by_id:
            continue
        ri, rj = by_id[i], by_id[j]
        if ri.infected and ri.onset < rj.t_infection <= ri.removal:
            sets[j].append(i)
    return InfectiousSets(sets)


def load_line_list(path, schema=None, pairs_path=None):
    """
    Read a line list and its contact set.

    The contact set comes from *pairs_path* when given, otherwise from the
    ``group`` column (all within-group ordered pairs).

    :returns: (records, contacts)
    :raises: **DataError** on malformed rows, violated invariants, or an
      infected individual with an empty infectious set and no imported flag.
    """
    schema = schema or LineListSchema()
    records = read_records(path, schema)
    if pairs_path is not None:
        contacts = read_pairs(pairs_path)
    elif any(rec.group is not None for rec in records):
        contacts = ContactSet.from_groups(records)
    else:
        raise DataError(None, "%s: no group column and no pair file; contacts are unknown" % path)

    known = {rec.id for rec in records}
    for i, j in contacts:
        if i not in known or j not in known:
            raise DataError(None, "pair (%d, %d) names an id not in the line list" % (i, j))

    sets = infectious_sets(records, contacts)
    orphans = [j for j, infectors in sets.items() if not infectors]
    if orphans:
        if not schema.infer_imported:
            raise DataError(None, "infected individual(s) %s have no possible infector and are not flagged imported"
                            % ", ".join(str(j) for j in orphans))
        log.info("flagging %d individual(s) with empty infectious sets as imported", len(orphans))
        orphans = set(orphans)
        records = [dataclasses.replace(rec, imported=True) if rec.id in orphans else rec for rec in records]
    return records, contacts


def _role_names(explicit, available, suffix):
    if explicit is not None:
        missing = [name for name in explicit if name not in available]
        if missing:
            raise DataError(None, "unknown covariate(s) %s" % ", ".join(missing))
        return tuple(explicit)
    return tuple(name for name in available if name.endswith(suffix))


def build_pair_rows(records, contacts, policy=None):
    """
    Build the pair rows at risk of infectious contact.

    Each ordered pair ij with C_ij = 1 and i infected is at risk on
    (0, stop] with stop = min(iota_i, t_j - t_i - eps_i, T_j - t_i - eps_i);
    pairs with stop <= 0 are left out. Pair covariates that change with
    infectiousness age split the interval into left-truncated rows, and
    only the last piece carries the candidate and event flags.

    Under "drop-pair-only" an infectee that loses all its candidate pairs
    (in complete mode, the pair of its observed infector) stays in the rows
    as a susceptible but is no longer an infectee; a warning names it.

    :param policy: :class:`PairPolicy`.
    :returns: (PairRows, InfectiousSets)
    :raises: **DataError** on unknown covariates, a missing or impossible
      observed infector in complete mode, or an empty infectious set.
    """
    policy = policy or PairPolicy()
    records = sorted(records, key=lambda rec: rec.id)
    by_id = {rec.id: rec for rec in records}

    individual = sorted(set().union(*(rec.covariates.keys() for rec in records))) if records else []
    inf_names = _role_names(policy.infectiousness, individual, "_inf")
    sus_names = _role_names(policy.susceptibility, individual, "_sus")
    pair_names = _role_names(policy.pairwise, contacts.pair_names, "")
    names = inf_names + sus_names + pair_names
    products = []
    for pair in policy.interactions:
        unknown = [name for name in pair if name not in names]
        if unknown:
            raise DataError(None, "interaction %s names unknown covariate(s) %s"
                            % (interaction_name(pair), ", ".join(unknown)))
        products.append((names.index(pair[0]), names.index(pair[1])))
    names = names + tuple(interaction_name(pair) for pair in policy.interactions)

    strata_labels = {}
    if policy.strata is not None:
        if policy.strata not in individual:
            raise DataError(None, "unknown strata column %r" % policy.strata)
        levels = sorted({rec.covariates.get(policy.strata) for rec in records
                         if not _is_missing(rec.covariates.get(policy.strata))}, key=str)
        strata_labels = {level: code for code, level in enumerate(levels)}

    rows = []
    for i, j in contacts:
        ri, rj = by_id.get(i), by_id.get(j)
        if ri is None or rj is None or not ri.infected:
            continue
        stop = min(ri.infectious_period, rj.t_infection - ri.onset, rj.obs_limit - ri.onset)
        if not stop > 0:
            continue
        interval = rj.t_infection - ri.onset
        candidate = (rj.observed_infected and not rj.imported
                     and 0 < interval <= ri.infectious_period)
        event = candidate and policy.mode == "complete" and rj.infector == i

        fixed = ([_to_float(ri.covariates.get(name)) for name in inf_names]
                 + [_to_float(rj.covariates.get(name)) for name in sus_names])
        owner = ri if policy.strata_role == "inf" else rj
        level = owner.covariates.get(policy.strata) if policy.strata is not None else None
        stratum = strata_labels.get(level, -1) if policy.strata is not None and not _is_missing(level) else 0
        if policy.strata is not None and _is_missing(level):
            stratum = -1

        pieces = [(start, values) for start, values in contacts.covariate_pieces(i, j) if start < stop]
        if not pieces or pieces[0][0] > 0:
            pieces.insert(0, (0.0, {}))
        for k, (start, values) in enumerate(pieces):
            end = pieces[k + 1][0] if k + 1 < len(pieces) else stop
            if end <= start:
                continue
            last = k + 1 == len(pieces)
            x = fixed + [_to_float(values.get(name)) for name in pair_names]
            x = tuple(x + [x[a] * x[b] for a, b in products])
            rows.append(PairRiskRow(i, j, float(start), float(end), bool(event and last),
                                    bool(candidate and last), x, stratum, 1.0))

    before = {(row.infector, row.susceptible) for row in rows if row.candidate}
    rows = _apply_missing_policy(rows, policy)
    after = {(row.infector, row.susceptible) for row in rows if row.candidate}
    lost = _lost_infectees(records, before, after, policy)
    if lost:
        log.warning("infectee(s) %s lost the pair of their infector to missing covariates and are "
                    "left out as infectees", ", ".join(str(j) for j in sorted(lost)))
        rows = [dataclasses.replace(row, candidate=False, event=False) if row.susceptible in lost else row
                for row in rows]
    rows.sort(key=lambda row: (row.susceptible, row.infector, row.start))
    table = PairRows.from_rows(rows, names)
    table = table.replace(strata_labels=strata_labels)
    sets = InfectiousSets.from_rows(table)

    at_risk = {row.susceptible for row in rows}
    for rec in records:
        if not rec.observed_infected or rec.imported or rec.id in lost:
            continue
        if rec.id not in sets and rec.id in at_risk:
            raise DataError(None, "infected individual %d has no possible infector and is not flagged imported" % rec.id)
        if policy.mode == "complete" and rec.id in sets:
            if rec.infector is None:
                raise DataError(None, "observed infector missing for infectee %d" % rec.id)
            if rec.infector not in sets[rec.id]:
                raise DataError(None, "observed infector %d of %d is not in its infectious set"
                                % (rec.infector, rec.id))
    return table, sets


def _lost_infectees(records, before, after, policy):
    """
    Infectees whose candidate pairs "drop-pair-only" removed: all of them,
    or in complete mode the pair of the observed infector.
    """
    if policy.missing != "drop-pair-only" or before == after:
        return set()
    lost = set()
    for rec in records:
        if not rec.observed_infected or rec.imported:
            continue
        had = {i for i, j in before if j == rec.id}
        kept = {i for i, j in after if j == rec.id}
        if had and not kept:
            lost.add(rec.id)
        elif policy.mode == "complete" and rec.infector in had and rec.infector not in kept:
            lost.add(rec.id)
    return lost


def _apply_missing_policy(rows, policy):
    missing = [row for row in rows if row.stratum < 0 or any(math.isnan(v) for v in row.covariates)]
    if not missing:
        return rows

    if policy.missing == "drop-pair-only":
        log.warning("dropping %d pair row(s) with missing covariates only; the remaining possible "
                    "infectors of those infectees get too much credit", len(missing))
        bad = set(id(row) for row in missing)
        return [row for row in rows if id(row) not in bad]

    bad_pairs = {(row.infector, row.susceptible) for row in missing}
    removed = {row.susceptible for row in rows if row.candidate and (row.infector, row.susceptible) in bad_pairs}
    kept = [row for row in rows
            if row.susceptible not in removed and (row.infector, row.susceptible) not in bad_pairs]
    log.info("complete-case rule removed %d infectee(s) and %d row(s)", len(removed), len(rows) - len(kept))
    return kept


def exposure_diagnostic(rows, warn_ratio=0.1):
    """
    Mean number of infectors to which the susceptible of a randomly chosen
    at-risk pair is exposed: (1/m) sum_j Y_.j(0+)^2.

    A warning is logged when the value exceeds *warn_ratio* times m.

    :raises: **DataError** if there are no at-risk pairs.
    """
    initial = np.asarray(rows.start) == 0
    m = int(initial.sum())
    if m == 0:
        raise DataError(None, "no pairs at risk of infectious contact")
    _unused_ids, counts = np.unique(np.asarray(rows.susceptible)[initial], return_counts=True)
    value = float(np.sum(counts.astype(float) ** 2)) / m
    if value > warn_ratio * m:
        log.warning("susceptibles are exposed to %.3g infectors on average against %d pairs at risk; "
                    "large-sample inference may be poor", value, m)
    return value


def write_pair_rows(rows, path):
    """Write the pair-row export CSV; floats keep all 17 significant digits."""
    rows.to_frame().to_csv(path, index=False, float_format="%.17g")


def read_pair_rows(path):
    """
    Read a pair-row export CSV.

    :returns: (PairRows, InfectiousSets)
    """
    frame = _read_csv(path)
    absent = [col for col in PAIR_ROW_COLUMNS if col not in frame.columns]
    if absent:
        raise DataError(None, "%s: missing column(s) %s" % (path, ", ".join(absent)))
    names = [col for col in frame.columns if col not in PAIR_ROW_COLUMNS]
    table = PairRows(frame["i"].to_numpy(), frame["j"].to_numpy(), frame["start"].to_numpy(),
                     frame["stop"].to_numpy(), frame["event"].to_numpy().astype(bool),
                     frame["candidate"].to_numpy().astype(bool),
                     frame[names].to_numpy(dtype=float).reshape(len(frame), len(names)), names,
                     stratum=frame["stratum"].to_numpy(), weight=frame["weight"].to_numpy())
    return table, InfectiousSets.from_rows(table)


def write_line_list(records, path):
    """Write records in the line-list CSV layout, with an ``infector`` column."""
    names = sorted(set().union(*(rec.covariates.keys() for rec in records))) if records else []
    frame = pd.DataFrame({
        "id": [rec.id for rec in records],
        "t_infection": [rec.t_infection for rec in records],
        "latent": [rec.latent for rec in records],
        "infectious_period": [rec.infectious_period for rec in records],
        "obs_limit": [rec.obs_limit for rec in records],
        "imported": [int(rec.imported) for rec in records],
        "infector": pd.array([rec.infector for rec in records], dtype="Int64"),
    })
    if any(rec.group is not None for rec in records):
        frame.insert(1, "group", [rec.group for rec in records])
    for name in names:
        frame[name] = [rec.covariates.get(name) for rec in records]
    frame.to_csv(path, index=False)


def write_pairs(contacts, path):
    """Write a contact set in the pair CSV layout."""
    records = []
    for i, j in contacts:
        for start, values in contacts.covariate_pieces(i, j):
            entry = {"i": i, "j": j, "from": start}
            entry.update(values)
            records.append(entry)
    frame = pd.DataFrame(records, columns=["i", "j", "from"] + list(contacts.pair_names))
    if not (frame["from"] > 0).any():
        frame = frame.drop(columns="from")
    frame.to_csv(path, index=False)
