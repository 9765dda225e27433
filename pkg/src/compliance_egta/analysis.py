"""Analysis of partially evaluated role-symmetric games

Everything here is a pure function of an :class:`EmpiricalGame` snapshot.
Expected payoffs are taken over independent draws of the other players'
strategies from their role mixtures.
"""
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from compliance_egta.errors import IncompleteDataError
from compliance_egta.game import MixedProfile, PureProfile

MIN_SUPPORT_PROB = 0.01
MERGE_TOL = 1e-3


@dataclass(frozen=True)
class Subgame:
    """Per-role strategy subsets, stored sorted"""
    roles: tuple
    sets: tuple

    @classmethod
    def make(cls, sets, roles=None):
        roles = tuple(sets) if roles is None else tuple(roles)
        sets = tuple(tuple(sorted(set(sets[r]))) for r in roles)
        if any(not s for s in sets):
            raise ValueError('subgames need at least one strategy per role')
        return cls(roles, sets)

    @property
    def strategy_sets(self):
        return dict(zip(self.roles, self.sets))

    @property
    def size(self):
        return sum(len(s) for s in self.sets)

    def add(self, role, strategy):
        sets = self.strategy_sets
        sets[role] = sets[role] + (strategy,)
        return Subgame.make(sets, self.roles)

    def union(self, other):
        return Subgame.make({r: set(a) | set(b) for r, a, b in zip(
            self.roles, self.sets, other.sets)}, self.roles)

    def contains(self, other):
        return all(set(b) <= set(a) for a, b in zip(self.sets, other.sets))

    def to_json(self):
        return {r: list(s) for r, s in zip(self.roles, self.sets)}

    def __str__(self):
        return '; '.join('{}: {{{}}}'.format(r, ', '.join(s))
                         for r, s in zip(self.roles, self.sets))


class DeviationTable:
    """Payoffs to a deviating player of one role against every opponent draw

    ``opp_sets`` gives, per role, the strategies the other players draw
    from; ``devs`` are the deviator's strategies. Unevaluated cells are NaN.
    """

    def __init__(self, game, role, opp_sets, devs):
        self.game = game
        self.role_index = ri = game.role_index(role)
        self.opp_sets = [tuple(sorted(opp_sets[r])) for r in game.role_names]
        self.devs = tuple(devs)
        self.multisets = []
        self.counts = []
        self.coefs = []
        for r, (spec, strats) in enumerate(zip(game.roles, self.opp_sets)):
            num = spec.player_count - (r == ri)
            combos = list(itertools.combinations_with_replacement(
                strats, num))
            cnt = np.array([[c.count(s) for s in strats] for c in combos],
                           float).reshape(len(combos), len(strats))
            coef = np.array([math.factorial(num) / math.prod(
                math.factorial(int(k)) for k in row) for row in cnt])
            self.multisets.append(combos)
            self.counts.append(cnt)
            self.coefs.append(coef)
        db = game.payoffs
        size = math.prod(len(m) for m in self.multisets)
        self.payoffs = np.full((len(self.devs), size), np.nan)
        for i, combo in enumerate(itertools.product(*self.multisets)):
            key = list(combo)
            own = key[ri]
            for d, strat in enumerate(self.devs):
                key[ri] = tuple(sorted(own + (strat,)))
                val = db.strategy_payoff(tuple(key), ri, strat)
                if val is not None:
                    self.payoffs[d, i] = val
        self.missing = np.isnan(self.payoffs)
        self.filled = np.where(self.missing, 0.0, self.payoffs)

    def role_probs(self, mixes):
        """Per-role multiset probabilities for batched mixtures (B, k_r)"""
        res = []
        for mix, cnt, coef in zip(mixes, self.counts, self.coefs):
            mix = np.atleast_2d(mix)
            res.append(coef * np.prod(mix[:, None, :] ** cnt, axis=2))
        return res

    def joint(self, mixes):
        probs = self.role_probs(mixes)
        joint = probs[0]
        for p in probs[1:]:
            joint = (joint[:, :, None] * p[:, None, :]).reshape(
                joint.shape[0], -1)
        return joint

    def values(self, mixes):
        """Expected deviation payoffs, shape (B, len(devs)); NaN if unknown"""
        joint = self.joint(mixes)
        vals = joint @ self.filled.T
        lacking = (joint @ self.missing.T) > 0
        return np.where(lacking, np.nan, vals)

    def expected(self, mixes):
        """Like :meth:`values` for tables without gaps, computed in log space

        Roles with a single strategy contribute a constant factor and are
        skipped.
        """
        joint = None
        for mix, cnt, coef in zip(mixes, self.counts, self.coefs):
            if cnt.shape[1] == 1:
                continue
            logs = np.log(np.maximum(mix, 1e-300))
            probs = coef * np.exp(logs @ cnt.T)
            joint = probs if joint is None else (
                joint[:, :, None] * probs[:, None, :]).reshape(
                    joint.shape[0], -1)
        if joint is None:
            return np.broadcast_to(self.filled[:, 0],
                                   (mixes[0].shape[0], len(self.devs)))
        return joint @ self.filled.T

    def missing_profile(self, mixes, dev_index):
        joint = self.joint(mixes)[0]
        for i, combo in enumerate(itertools.product(*self.multisets)):
            if joint[i] > 0 and self.missing[dev_index, i]:
                key = list(combo)
                key[self.role_index] = tuple(sorted(
                    key[self.role_index] + (self.devs[dev_index],)))
                return PureProfile.from_key(self.game.role_names, key)
        return None


def _mix_arrays(game, q, opp_sets):
    return [np.array([q.prob(r, s) for s in sorted(opp_sets[r])])
            for r in game.role_names]


def expected_payoff(game, q, role, strategy):
    """Payoff to one ``role`` player on ``strategy`` when the rest follow ``q``

    Raises IncompleteDataError naming a missing profile if some opponent
    draw with positive probability is unevaluated.
    """
    opp = q.strategies_in()
    table = DeviationTable(game, role, opp, [strategy])
    mixes = _mix_arrays(game, q, opp)
    val = table.values(mixes)[0, 0]
    if np.isnan(val):
        raise IncompleteDataError(table.missing_profile(mixes, 0))
    return float(val)


@dataclass
class RegretResult:
    regret: float
    max_gain: float
    best_response: dict
    deviation: tuple
    gains: dict = field(repr=False)
    fully_evaluated: bool = True
    role_payoffs: dict = field(default_factory=dict, repr=False)


def regret(game, q, scope=None):
    """Regret of ``q`` against deviations to strategies in ``scope``

    ``scope`` maps role to deviation strategies and defaults to the game's
    candidate sets. Deviations lacking data are skipped and clear
    ``fully_evaluated``. The reported regret is clamped below at zero;
    ``max_gain`` keeps the raw value.
    """
    scope = game.strategy_sets if scope is None else scope
    opp = q.strategies_in()
    mixes = _mix_arrays(game, q, opp)
    gains = {}
    best = {}
    payoffs = {}
    fully = True
    top_gain = -math.inf
    top_dev = None
    for role in game.role_names:
        support = q.support(role)
        devs = sorted(set(scope[role]) | set(support))
        table = DeviationTable(game, role, opp, devs)
        vals = table.values(mixes)[0]
        sup_idx = [devs.index(s) for s in support]
        for i in sup_idx:
            if np.isnan(vals[i]):
                raise IncompleteDataError(table.missing_profile(mixes, i))
        role_val = float(sum(q.prob(role, devs[i]) * vals[i]
                             for i in sup_idx))
        payoffs[role] = role_val
        role_gains = {}
        role_best = None
        for s, v in zip(devs, vals):
            if np.isnan(v):
                fully = False
                continue
            role_gains[s] = float(v) - role_val
            if role_best is None or role_gains[s] > role_gains[role_best]:
                role_best = s
        gains[role] = role_gains
        best[role] = role_best
        if role_gains[role_best] > top_gain:
            top_gain = role_gains[role_best]
            top_dev = (role, role_best)
    return RegretResult(max(top_gain, 0.0), top_gain, best, top_dev, gains,
                        fully, payoffs)


def maximal_complete_subgames(game):
    """All maximal complete subgames over the candidate sets

    Complete subgames are closed under taking subsets, so every maximal one
    is reached from a complete single-strategy-per-role subgame by adding one
    strategy at a time. When the union of all single-strategy extensions of
    a subgame is itself complete it is the unique maximal superset, which
    prunes most of the search.
    """
    names = game.role_names
    cands = game.strategy_sets
    index = game.payoffs.index
    items = [(r, s) for r in names for s in cands[r]]
    allowed = [set(cands[r]) for r in names]
    seeds = set()
    for key in index:
        if all(len(set(k)) == 1 and k[0] in a for k, a in zip(key, allowed)):
            seeds.add(tuple((k[0],) for k in key))
    if not seeds:
        return []

    players = [r.player_count for r in game.roles]
    complete_memo = {}

    def complete_with(sets, ri, strat):
        # new profiles are exactly those where some role-ri player uses strat
        key = (sets, ri, strat)
        if key in complete_memo:
            return complete_memo[key]
        per_role = []
        for r, (strats, n) in enumerate(zip(sets, players)):
            if r == ri:
                per_role.append([tuple(sorted(c + (strat,))) for c in
                                 itertools.combinations_with_replacement(
                                     strats + (strat,), n - 1)])
            else:
                per_role.append(list(
                    itertools.combinations_with_replacement(strats, n)))
        ok = all(combo in index for combo in itertools.product(*per_role))
        complete_memo[key] = ok
        return ok

    def add(sets, ri, strat):
        sets = list(sets)
        sets[ri] = tuple(sorted(sets[ri] + (strat,)))
        return tuple(sets)

    def complete(sets):
        return all(p.key in index for p in game.all_profiles(
            dict(zip(names, sets))))

    found = set()
    visited = set()
    stack = sorted(seeds)
    while stack:
        sets = stack.pop()
        if sets in visited:
            continue
        visited.add(sets)
        ext = [(names.index(r), s) for r, s in items
               if s not in sets[names.index(r)]
               and complete_with(sets, names.index(r), s)]
        if not ext:
            found.add(sets)
            continue
        union = sets
        for ri, s in ext:
            union = add(union, ri, s)
        if complete(union):
            found.add(union)
            continue
        for ri, s in ext:
            nxt = add(sets, ri, s)
            if nxt not in visited:
                stack.append(nxt)
    return [Subgame(names, sets) for sets in sorted(found)]


def _within_regret(tables, mixes):
    """Regret of batched mixtures inside the tables' subgame"""
    worst = np.zeros(mixes[0].shape[0])
    for ri, table in enumerate(tables):
        vals = table.values(mixes)
        expect = np.sum(vals * mixes[ri], axis=1)
        worst = np.maximum(worst, vals.max(axis=1) - expect)
    return worst


def replicator_dynamics(subgame, game, restarts=20, max_iters=10000,
                        tol=1e-6, min_prob=MIN_SUPPORT_PROB, seed=0,
                        converge_tol=1e-13):
    """Candidate equilibria of a complete subgame via replicator dynamics

    Runs one uniform start plus ``restarts - 1`` random simplex starts.
    Fitness is shifted per role by the smallest payoff in the subgame so
    updates stay positive. Converged mixtures are pruned below ``min_prob``,
    renormalized, and kept if their regret inside the subgame is at most
    ``tol``. The method is incomplete and may return nothing.
    """
    sets = subgame.strategy_sets
    names = game.role_names
    cache = getattr(game, 'analysis_cache', None)
    if cache is not None:
        counts = tuple(game.count(p) for p in game.all_profiles(sets))
        key = (subgame, counts, restarts, max_iters, tol, min_prob, seed,
               converge_tol)
        if key in cache:
            return list(cache[key])
    tables = [DeviationTable(game, r, sets, sets[r]) for r in names]
    if any(t.missing.any() for t in tables):
        raise IncompleteDataError(None, 'subgame is not complete: {}'.format(
            subgame))
    rng = np.random.default_rng(seed)
    starts = []
    for r in names:
        k = len(sets[r])
        batch = np.vstack([np.full((1, k), 1 / k),
                           rng.dirichlet(np.ones(k), max(restarts - 1, 0))])
        starts.append(batch[:max(restarts, 1)])
    lows = []
    offsets = []
    for t in tables:
        lo, hi = t.payoffs.min(), t.payoffs.max()
        lows.append(lo)
        offsets.append(max((hi - lo) * 1e-3, 1e-12))
    mixes = starts
    active = [ri for ri, r in enumerate(names) if len(sets[r]) > 1]
    for _ in range(max_iters if active else 0):
        new = list(mixes)
        for ri in active:
            fit = tables[ri].expected(mixes) - lows[ri] + offsets[ri]
            upd = mixes[ri] * fit
            new[ri] = upd / upd.sum(axis=1, keepdims=True)
        delta = max(np.abs(new[ri] - mixes[ri]).max() for ri in active)
        mixes = new
        if delta < converge_tol:
            break

    pruned = []
    for mix in mixes:
        mix = np.where(mix < min_prob, 0.0, mix)
        mix[mix.sum(axis=1) == 0] = 1.0
        pruned.append(mix / mix.sum(axis=1, keepdims=True))
    regrets = _within_regret(tables, pruned)
    results = []
    for b in np.argsort(regrets, kind='stable'):
        if not regrets[b] <= tol:
            continue
        prof = MixedProfile.from_arrays(
            names, [sets[r] for r in names], [m[b] for m in pruned])
        if all(prof.distance(p) > MERGE_TOL for p in results):
            results.append(prof)
    if cache is not None:
        cache[key] = tuple(results)
    return results


CONFIRMED = 'confirmed'
UNCONFIRMED = 'unconfirmed'
REFUTED = 'refuted'


@dataclass
class Candidate:
    profile: MixedProfile
    regret: float
    status: str
    best_response: tuple = None
    subgame: Subgame = None
    fully_evaluated: bool = True

    def to_json(self):
        return {'mixture': self.profile.to_json(), 'regret': self.regret,
                'status': self.status,
                'best_response': (None if self.best_response is None else
                                  {'role': self.best_response[0],
                                   'strategy': self.best_response[1]})}


@dataclass
class CandidateSet:
    confirmed: list = field(default_factory=list)
    unconfirmed: list = field(default_factory=list)
    refuted: list = field(default_factory=list)
    subgames: list = field(default_factory=list)

    def all(self):
        return self.confirmed + self.unconfirmed + self.refuted

    def counts(self):
        return {CONFIRMED: len(self.confirmed),
                UNCONFIRMED: len(self.unconfirmed),
                REFUTED: len(self.refuted)}

    def to_json(self):
        return [c.to_json() for c in self.all()]


def classify(game, q, tau, subgame=None):
    """Confirm, leave unconfirmed, or refute ``q`` against the candidate sets"""
    res = regret(game, q)
    if res.max_gain > tau:
        return Candidate(q, res.regret, REFUTED, res.deviation, subgame,
                         res.fully_evaluated)
    status = CONFIRMED if res.fully_evaluated else UNCONFIRMED
    return Candidate(q, res.regret, status, res.deviation, subgame,
                     res.fully_evaluated)


def game_analysis(game, tau, restarts=20, max_iters=10000, seed=0,
                  min_prob=MIN_SUPPORT_PROB):
    """Equilibria of every maximal complete subgame, classified in the full game

    Near-duplicate mixtures (L-infinity within 1e-3) are merged, keeping the
    lower-regret one.
    """
    subgames = maximal_complete_subgames(game)
    found = []
    for sub in subgames:
        for q in replicator_dynamics(sub, game, restarts, max_iters, tau,
                                     min_prob, seed):
            cand = classify(game, q, tau, sub)
            for i, other in enumerate(found):
                if other.profile.distance(q) <= MERGE_TOL:
                    if cand.regret < other.regret:
                        found[i] = cand
                    break
            else:
                found.append(cand)
    result = CandidateSet(subgames=subgames)
    for cand in sorted(found, key=lambda c: (c.regret, repr(c.profile))):
        getattr(result, cand.status).append(cand)
    return result
