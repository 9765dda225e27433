"""Role-symmetric empirical games

Strategies are points on a finite parameter grid, profiles are canonical
per-role multisets of strategy ids, and payoffs are sample means kept in an
append-only observation log.
"""
import itertools
import json
import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from compliance_egta.errors import ConfigurationError, DataError

MIXTURE_TOL = 1e-9


@dataclass(frozen=True)
class ParamDomain:
    """Closed interval ``[lo, hi]`` sampled every ``step``"""
    name: str
    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if not self.hi >= self.lo:
            raise ConfigurationError(
                'domain {} has hi < lo'.format(self.name))
        if not self.step > 0:
            raise ConfigurationError(
                'domain {} needs a positive step'.format(self.name))

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def num_steps(self):
        return int(round(self.width / self.step))

    def value(self, index):
        index = min(max(index, 0), self.num_steps)
        return round(self.lo + index * self.step, 10)

    def index(self, value):
        return int(round((value - self.lo) / self.step))

    def contains(self, value, tol=1e-9):
        return self.lo - tol <= value <= self.hi + tol

    def to_json(self):
        return {'name': self.name, 'lo': self.lo, 'hi': self.hi,
                'step': self.step}


def param_id(params):
    """Canonical id for a parameter vector"""
    return '[' + ','.join(format(float(p), '.6g') for p in params) + ']'


@dataclass(frozen=True)
class Strategy:
    role: str
    id: str
    params: tuple = ()
    label: str = ''

    @classmethod
    def from_params(cls, role, params, label=''):
        params = tuple(float(p) for p in params)
        return cls(role, param_id(params), params, label or param_id(params))

    @property
    def name(self):
        return self.label or self.id

    def to_json(self):
        return {'id': self.id, 'role': self.role,
                'params': list(self.params), 'label': self.label}


@dataclass(frozen=True)
class RoleSpec:
    name: str
    player_count: int
    node_count: int = None
    weight_overrides: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.node_count is None:
            object.__setattr__(self, 'node_count', self.player_count)
        if self.player_count < 1:
            raise ConfigurationError(
                'role {} needs at least one player'.format(self.name))
        if self.node_count < self.player_count:
            raise ConfigurationError(
                'role {} has fewer nodes than players'.format(self.name))
        if self.node_count % self.player_count:
            raise ConfigurationError(
                'role {}: {} nodes not divisible by {} players'.format(
                    self.name, self.node_count, self.player_count))

    def to_json(self):
        res = {'name': self.name, 'player_count': self.player_count,
               'node_count': self.node_count}
        if self.weight_overrides:
            res['weight_overrides'] = dict(self.weight_overrides)
        return res


@dataclass(frozen=True)
class PureProfile:
    """Per-role multisets of strategy ids

    Build with :meth:`make` to get the canonical (sorted) form; profiles built
    directly are checked with :attr:`is_canonical` before they are recorded.
    """
    roles: tuple
    strategies: tuple

    @classmethod
    def make(cls, assignment, roles=None):
        if roles is None:
            roles = tuple(assignment)
        return cls(tuple(roles), tuple(tuple(sorted(assignment[r]))
                                       for r in roles))

    @classmethod
    def from_key(cls, roles, key):
        return cls(tuple(roles), tuple(tuple(k) for k in key))

    @property
    def key(self):
        return self.strategies

    @property
    def is_canonical(self):
        return all(list(s) == sorted(s) for s in self.strategies)

    @property
    def id(self):
        return '; '.join('{}: {}'.format(r, ' '.join(s))
                         for r, s in zip(self.roles, self.strategies))

    def role_strategies(self, role):
        return self.strategies[self.roles.index(role)]

    def as_dict(self):
        return {r: list(s) for r, s in zip(self.roles, self.strategies)}

    def strategy_sets(self):
        return {r: sorted(set(s)) for r, s in zip(self.roles, self.strategies)}

    def __str__(self):
        return self.id


class MixedProfile:
    """Role-symmetric mixture: role -> {strategy id: probability}"""

    def __init__(self, mixture, tol=MIXTURE_TOL):
        clean = {}
        for role, probs in mixture.items():
            probs = {s: float(p) for s, p in probs.items()}
            if any(p < 0 for p in probs.values()):
                raise ValueError('negative probability in role ' + role)
            total = sum(probs.values())
            if abs(total - 1) > tol:
                raise ValueError('probabilities for role {} sum to {}'.format(
                    role, total))
            clean[role] = {s: p for s, p in sorted(probs.items()) if p > 0}
        self.mixture = clean

    @classmethod
    def pure(cls, assignment):
        return cls({r: {s: 1.0} for r, s in assignment.items()})

    @classmethod
    def from_arrays(cls, roles, strategy_sets, arrays, min_prob=0.0):
        """Build from per-role probability vectors, zeroing tiny weights"""
        mix = {}
        for role, strats, probs in zip(roles, strategy_sets, arrays):
            probs = np.where(np.asarray(probs) < min_prob, 0.0, probs)
            if probs.sum() <= 0:
                probs = np.ones(len(strats))
            probs = probs / probs.sum()
            mix[role] = dict(zip(strats, probs))
        return cls(mix)

    @property
    def roles(self):
        return tuple(self.mixture)

    def support(self, role):
        return sorted(self.mixture[role])

    def strategies_in(self):
        return {r: self.support(r) for r in self.mixture}

    def prob(self, role, strategy):
        return self.mixture[role].get(strategy, 0.0)

    def support_profiles(self, players):
        """Pure profiles with positive probability

        ``players`` maps role to player count.
        """
        per_role = [list(itertools.combinations_with_replacement(
            self.support(r), players[r])) for r in self.mixture]
        return [PureProfile(self.roles, combo)
                for combo in itertools.product(*per_role)]

    def distance(self, other):
        """L-infinity distance over the union of strategies"""
        dist = 0.0
        for role in set(self.mixture) | set(other.mixture):
            a = self.mixture.get(role, {})
            b = other.mixture.get(role, {})
            for s in set(a) | set(b):
                dist = max(dist, abs(a.get(s, 0.0) - b.get(s, 0.0)))
        return dist

    def is_pure(self):
        return all(len(p) == 1 for p in self.mixture.values())

    def key(self):
        return tuple((r, tuple(sorted(p.items())))
                     for r, p in self.mixture.items())

    def to_json(self):
        return {r: dict(p) for r, p in self.mixture.items()}

    def __eq__(self, other):
        return isinstance(other, MixedProfile) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        parts = []
        for role, probs in self.mixture.items():
            if len(probs) == 1:
                parts.append('{}: {}'.format(role, next(iter(probs))))
            else:
                parts.append('{}: [{}]'.format(role, '; '.join(
                    '{} {:.3f}'.format(s, p) for s, p in probs.items())))
        return 'MixedProfile(' + ', '.join(parts) + ')'


class _Entry:
    __slots__ = ('count', 'mean', 'by_strategy')

    def __init__(self, size):
        self.count = 0
        self.mean = np.zeros(size)
        self.by_strategy = None


class PayoffDatabase:
    """Append-only payoff log with a derived per-profile index

    Payoff vectors have one entry per player slot, laid out role by role in
    the canonical (sorted) order of the profile. Appends are serialized by a
    lock so parallel workers may record concurrently.
    """

    def __init__(self, roles, known_strategies=None, path=None):
        self.roles = tuple(roles)
        self.role_names = tuple(r.name for r in self.roles)
        self.num_slots = sum(r.player_count for r in self.roles)
        self.known = known_strategies
        self.observations = []
        self.index = {}
        self.path = path
        self._lock = threading.Lock()

    def __len__(self):
        return len(self.observations)

    def _check(self, profile, payoffs):
        if tuple(profile.roles) != self.role_names:
            raise DataError('profile roles {} do not match game roles'.format(
                profile.roles))
        if not profile.is_canonical:
            raise DataError('profile is not canonical: {}'.format(profile))
        for role, strats in zip(self.roles, profile.strategies):
            if len(strats) != role.player_count:
                raise DataError('role {} needs {} players, got {}'.format(
                    role.name, role.player_count, len(strats)))
            if self.known is not None:
                unknown = set(strats) - set(self.known[role.name])
                if unknown:
                    raise DataError('unknown strategies for role {}: {}'.format(
                        role.name, sorted(unknown)))
        if len(payoffs) != self.num_slots:
            raise DataError('expected {} payoffs, got {}'.format(
                self.num_slots, len(payoffs)))

    def _apply(self, key, payoffs):
        entry = self.index.get(key)
        if entry is None:
            entry = self.index[key] = _Entry(self.num_slots)
        entry.count += 1
        entry.mean = entry.mean + (payoffs - entry.mean) / entry.count
        entry.by_strategy = None

    def record(self, profile, payoffs, seed, timestamp=None):
        payoffs = np.asarray(payoffs, float)
        self._check(profile, payoffs)
        obs = {'profile': profile.as_dict(), 'payoffs': payoffs.tolist(),
               'seed': int(seed),
               'timestamp': time.time() if timestamp is None else timestamp}
        with self._lock:
            self.observations.append(obs)
            self._apply(profile.key, payoffs)
            if self.path is not None:
                with open(self.path, 'a') as f:
                    f.write(json.dumps(obs) + '\n')
        return self

    def count(self, profile):
        key = profile.key if isinstance(profile, PureProfile) else profile
        entry = self.index.get(key)
        return 0 if entry is None else entry.count

    def mean(self, profile):
        key = profile.key if isinstance(profile, PureProfile) else profile
        return self.index[key].mean

    def strategy_payoff(self, key, role_index, strategy):
        """Mean payoff to a player of ``role_index`` playing ``strategy``

        Returns None if ``key`` is unevaluated.
        """
        entry = self.index.get(key)
        if entry is None:
            return None
        if entry.by_strategy is None:
            table = {}
            start = 0
            for r, strats in enumerate(key):
                for s in set(strats):
                    idx = [start + i for i, t in enumerate(strats) if t == s]
                    table[r, s] = float(entry.mean[idx].mean())
                start += len(strats)
            entry.by_strategy = table
        return entry.by_strategy.get((role_index, strategy))

    def profiles(self):
        return [PureProfile.from_key(self.role_names, k) for k in self.index]

    def rebuild_index(self):
        """Recompute the index by replaying the log"""
        self.index = {}
        for obs in self.observations:
            prof = PureProfile.make(obs['profile'], self.role_names)
            self._apply(prof.key, np.asarray(obs['payoffs'], float))
        return self

    def dump(self, path):
        with open(path, 'w') as f:
            for obs in self.observations:
                f.write(json.dumps(obs) + '\n')

    def load(self, path):
        """Append observations from a line-delimited JSON log"""
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    obs = json.loads(line)
                    prof = PureProfile.make(obs['profile'], self.role_names)
                    payoffs = np.asarray(obs['payoffs'], float)
                except (ValueError, KeyError) as exc:
                    raise DataError('{}:{}: {}'.format(path, lineno, exc))
                self._check(prof, payoffs)
                self.observations.append(obs)
                self._apply(prof.key, payoffs)
        return self


def record_observation(db, profile, payoffs, seed):
    """Append one observation to ``db`` and return it"""
    return db.record(profile, payoffs, seed)


class EmpiricalGame:
    """Roles, a strategy catalog, candidate sets, and payoff data

    The catalog holds every strategy ever simulated; ``strategy_sets`` is the
    candidate space C that analysis is restricted to.
    """

    def __init__(self, roles, strategies, candidate_sets=None,
                 domains=None, payoffs=None):
        self.roles = tuple(roles)
        names = [r.name for r in self.roles]
        if len(set(names)) != len(names):
            raise ConfigurationError('duplicate role names')
        self.role_names = tuple(names)
        self.domains = tuple(domains) if domains else None
        self.catalog = {r: {} for r in self.role_names}
        self._by_params = {r: {} for r in self.role_names}
        self.strategy_sets = {r: [] for r in self.role_names}
        self.auto_generated = set()
        # equilibria per subgame, keyed by sample counts; data is append-only
        self.analysis_cache = {}
        self.payoffs = payoffs if payoffs is not None else PayoffDatabase(
            self.roles, self.catalog)
        self.payoffs.known = self.catalog
        for strat in strategies:
            self.add_strategy(strat, candidate=candidate_sets is None)
        if candidate_sets is not None:
            for role, ids in candidate_sets.items():
                for sid in ids:
                    self.add_candidate(role, sid)

    # structure

    def role(self, name):
        return self.roles[self.role_names.index(name)]

    def role_index(self, name):
        try:
            return self.role_names.index(name)
        except ValueError:
            raise KeyError('unknown role: {}'.format(name))

    @property
    def players(self):
        return {r.name: r.player_count for r in self.roles}

    def strategy(self, role, sid):
        return self.catalog[role][sid]

    def add_strategy(self, strategy, candidate=False):
        """Add to the catalog, returning the canonical strategy

        A strategy whose params match an existing one of the same role is
        replaced by the existing entry.
        """
        if strategy.role not in self.catalog:
            raise ConfigurationError('unknown role: {}'.format(strategy.role))
        if self.domains is not None and strategy.params:
            if len(strategy.params) != len(self.domains):
                raise ConfigurationError(
                    'strategy {} has {} params, expected {}'.format(
                        strategy.name, len(strategy.params),
                        len(self.domains)))
            for dom, val in zip(self.domains, strategy.params):
                if not dom.contains(val):
                    raise ConfigurationError(
                        'strategy {}: {}={} outside [{}, {}]'.format(
                            strategy.name, dom.name, val, dom.lo, dom.hi))
        role_cat = self.catalog[strategy.role]
        pkey = param_id(strategy.params) if strategy.params else None
        if pkey is not None and pkey in self._by_params[strategy.role]:
            strategy = role_cat[self._by_params[strategy.role][pkey]]
        elif strategy.id in role_cat:
            if role_cat[strategy.id].params != strategy.params:
                raise ConfigurationError(
                    'strategy id {} reused with different params'.format(
                        strategy.id))
            strategy = role_cat[strategy.id]
        else:
            role_cat[strategy.id] = strategy
            if pkey is not None:
                self._by_params[strategy.role][pkey] = strategy.id
        if candidate:
            self.add_candidate(strategy.role, strategy.id)
        return strategy

    def find(self, role, params):
        sid = self._by_params[role].get(param_id(params))
        return None if sid is None else self.catalog[role][sid]

    def add_candidate(self, role, sid):
        if sid not in self.catalog[role]:
            raise ConfigurationError('unknown strategy {} for role {}'.format(
                sid, role))
        if sid not in self.strategy_sets[role]:
            self.strategy_sets[role].append(sid)
            self.strategy_sets[role].sort()

    def relabel(self, role, sid, label):
        strat = self.catalog[role][sid]
        self.catalog[role][sid] = Strategy(strat.role, strat.id, strat.params,
                                           label)

    # profiles

    def profile(self, assignment):
        return PureProfile.make(assignment, self.role_names)

    def all_profiles(self, sets=None):
        sets = self.strategy_sets if sets is None else sets
        per_role = [list(itertools.combinations_with_replacement(
            sorted(sets[r.name]), r.player_count)) for r in self.roles]
        for combo in itertools.product(*per_role):
            yield PureProfile(self.role_names, combo)

    def num_profiles(self, sets=None):
        sets = self.strategy_sets if sets is None else sets
        return math.prod(math.comb(len(sets[r.name]) + r.player_count - 1,
                                   r.player_count) for r in self.roles)

    def evaluated(self, profile):
        return self.payoffs.count(profile) >= 1

    def count(self, profile):
        return self.payoffs.count(profile)

    def is_complete(self, sets):
        index = self.payoffs.index
        return all(p.key in index for p in self.all_profiles(sets))

    def evaluated_profiles(self, sets=None):
        """Evaluated profiles that only use strategies in ``sets``"""
        sets = self.strategy_sets if sets is None else sets
        allowed = [set(sets[r]) for r in self.role_names]
        return [PureProfile.from_key(self.role_names, key)
                for key in self.payoffs.index
                if all(set(s) <= a for s, a in zip(key, allowed))]

    # serialization

    def to_json(self):
        res = {'roles': [r.to_json() for r in self.roles],
               'strategies': [dict(s.to_json(),
                                   auto_generated=(s.role, s.id) in
                                   self.auto_generated)
                              for r in self.role_names
                              for s in self.catalog[r].values()],
               'candidate_sets': {r: list(s)
                                  for r, s in self.strategy_sets.items()}}
        if self.domains:
            res['parameter_domains'] = [d.to_json() for d in self.domains]
        return res

    @classmethod
    def from_json(cls, data):
        try:
            roles = [RoleSpec(r['name'], int(r['player_count']),
                              int(r.get('node_count', r['player_count'])),
                              r.get('weight_overrides', {}))
                     for r in data['roles']]
            domains = [ParamDomain(**d)
                       for d in data.get('parameter_domains', ())] or None
            strategies = [Strategy(s['role'], s['id'],
                                   tuple(s.get('params', ())),
                                   s.get('label', ''))
                          for s in data['strategies']]
        except (KeyError, TypeError) as exc:
            raise ConfigurationError('bad game definition: {!r}'.format(exc))
        game = cls(roles, strategies, data.get('candidate_sets'), domains)
        for s in data['strategies']:
            if s.get('auto_generated'):
                game.auto_generated.add((s['role'], s['id']))
        return game


def save_game(game, path):
    with open(path, 'w') as f:
        json.dump(game.to_json(), f, indent=2)


def load_game(path, payoff_log=None):
    with open(path) as f:
        game = EmpiricalGame.from_json(json.load(f))
    if payoff_log is not None:
        game.payoffs.load(payoff_log)
    return game


@dataclass(frozen=True)
class ReductionMap:
    """role -> list of node groups, one group per reduced player"""
    groups: dict

    def players(self, role):
        return len(self.groups[role])

    def group_size(self, role):
        return len(self.groups[role][0])

    def player_of(self):
        return {node: (role, i) for role, groups in self.groups.items()
                for i, group in enumerate(groups) for node in group}


def make_reduction(node_counts, player_counts, node_ids=None):
    """Hierarchical reduction of node populations onto players

    Nodes are dealt round-robin so every player's group spans the population
    evenly. ``node_ids`` optionally maps role to the list of node identifiers;
    by default nodes are ``(role, index)`` pairs.
    """
    groups = {}
    for role, nodes in node_counts.items():
        players = player_counts[role]
        if players < 1 or nodes % players:
            raise ConfigurationError(
                'role {}: {} nodes cannot be split evenly over {} players'
                .format(role, nodes, players))
        ids = (node_ids[role] if node_ids is not None
               else [(role, i) for i in range(nodes)])
        if len(ids) != nodes:
            raise ConfigurationError('role {}: expected {} node ids'.format(
                role, nodes))
        groups[role] = [list(ids[p::players]) for p in range(players)]
    return ReductionMap(groups)


def reduced_payoff(node_payoffs, reduction):
    """Mean payoff of each player's constituent nodes, per role"""
    result = {}
    for role, groups in reduction.groups.items():
        vals = []
        for group in groups:
            total = 0.0
            for node in group:
                try:
                    total += node_payoffs[node]
                except (KeyError, IndexError):
                    raise DataError('missing payoff for node {}'.format(node))
            vals.append(total / len(group))
        result[role] = vals
    return result


def deviation_profiles(game, q, role, strategies):
    """Profiles where one ``role`` player switches to each of ``strategies``

    Remaining players draw from the support of ``q``. Switches to strategies
    in the role's support are not deviations and are skipped.
    """
    if role not in game.role_names:
        raise KeyError('unknown role: {}'.format(role))
    support = q.support(role)
    devs = sorted(set(strategies) - set(support))
    others = []
    for r in game.roles:
        n = r.player_count - (r.name == role)
        others.append(list(itertools.combinations_with_replacement(
            q.support(r.name), n)))
    ri = game.role_index(role)
    result = set()
    for combo in itertools.product(*others):
        for s in devs:
            key = list(combo)
            key[ri] = tuple(sorted(key[ri] + (s,)))
            result.add(PureProfile(game.role_names, tuple(key)))
    return result
