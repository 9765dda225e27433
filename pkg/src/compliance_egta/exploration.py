"""Compliance-directed strategy exploration

Strategies carry a graded compliance score that is positive exactly when the
strategy is compliant. The outer loop alternates between searching for
non-compliant deviations from the most compliant open solution and
compliant deviations from the least compliant one, adding any beneficial
deviation it finds to the candidate sets and re-running the inner loop.
"""
import logging
import math
import time
from dataclasses import dataclass, field

from compliance_egta import analysis
from compliance_egta.errors import (ConfigurationError, RegionExhausted,
                                    SearchComplete)
from compliance_egta.game import Strategy, param_id
from compliance_egta.inner_loop import run_inner_loop

log = logging.getLogger(__name__)

COMPLIANT = 'compliant'
NON_COMPLIANT = 'non-compliant'
MODES = (NON_COMPLIANT, COMPLIANT)
SCHEMES = ('role', 'player', 'node')
OPEN = 'open'
CLOSED = 'closed'


@dataclass(frozen=True)
class ComplianceSpec:
    """Compliant region as one interval per parameter

    Interval ends may be infinite for one-sided constraints. With the
    ``min_margin`` aggregation the score is the smallest distance to an
    interval end, as a fraction of that parameter's domain width; with
    ``binary`` it is 1 inside the region and -1 outside.
    """
    domains: tuple
    intervals: tuple
    aggregation: str = 'min_margin'

    def __post_init__(self):
        if len(self.domains) != len(self.intervals):
            raise ConfigurationError('one compliant interval per parameter')
        if self.aggregation not in ('min_margin', 'binary'):
            raise ConfigurationError('unknown aggregation: {}'.format(
                self.aggregation))
        for dom, (lo, hi) in zip(self.domains, self.intervals):
            if lo > hi:
                raise ConfigurationError(
                    'empty compliant interval for {}'.format(dom.name))

    def margin(self, params):
        worst = math.inf
        for dom, (lo, hi), val in zip(self.domains, self.intervals, params):
            width = dom.width or 1.0
            worst = min(worst, (val - lo) / width, (hi - val) / width)
        return worst

    def score(self, params):
        marg = self.margin(params)
        if self.aggregation == 'binary':
            return 1.0 if marg > 0 else -1.0
        return marg

    def is_compliant(self, params):
        return self.score(params) > 0

    def to_json(self):
        return {'aggregation': self.aggregation,
                'parameters': [dict(d.to_json(), compliant=[
                    None if math.isinf(lo) else lo,
                    None if math.isinf(hi) else hi])
                    for d, (lo, hi) in zip(self.domains, self.intervals)]}

    @classmethod
    def from_json(cls, data):
        from compliance_egta.game import ParamDomain
        doms, ivals = [], []
        for p in data['parameters']:
            doms.append(ParamDomain(p['name'], p['lo'], p['hi'], p['step']))
            lo, hi = p.get('compliant', (None, None))
            ivals.append((-math.inf if lo is None else lo,
                          math.inf if hi is None else hi))
        return cls(tuple(doms), tuple(ivals),
                   data.get('aggregation', 'min_margin'))


def strategy_compliance(strategy, spec):
    return spec.score(strategy.params)


def compliance_scores(game, spec):
    """role -> strategy id -> score, over the whole catalog"""
    return {r: {sid: spec.score(s.params) for sid, s in cat.items()}
            for r, cat in game.catalog.items()}


def role_weights(roles, scheme='player', normalize=False):
    """Per-role weights: 1 each, player counts, or node counts"""
    if scheme not in SCHEMES:
        raise ConfigurationError('unknown weighting scheme: {}'.format(scheme))
    weights = {}
    for r in roles:
        if scheme in r.weight_overrides:
            weights[r.name] = float(r.weight_overrides[scheme])
        else:
            weights[r.name] = {'role': 1.0, 'player': float(r.player_count),
                               'node': float(r.node_count)}[scheme]
    if normalize:
        total = sum(weights.values())
        weights = {r: w / total for r, w in weights.items()}
    return weights


def profile_compliance(q, scores, weights):
    """Weighted sum over roles of expected strategy compliance"""
    if any(w < 0 for w in weights.values()):
        raise ValueError('weights must be nonnegative')
    return sum(weights[r] * sum(p * scores[r][s] for s, p in probs.items())
               for r, probs in q.mixture.items())


def compliant_fraction(q, scores, roles, scheme):
    """Percentage of weight on compliant strategies"""
    weights = role_weights(roles, scheme)
    total = sum(weights.values())
    comp = sum(weights[r] * sum(p for s, p in q.mixture[r].items()
                                if scores[r][s] > 0) for r in weights)
    return 100.0 * comp / total


def compliance_fractions(q, scores, roles):
    return {sch: compliant_fraction(q, scores, roles, sch) for sch in SCHEMES}


@dataclass
class SolutionRecord:
    profile: object
    regret: float = 0.0
    status: str = OPEN
    tried: set = field(default_factory=set)
    # (role, mode) -> param ids explored on behalf of this solution
    explored: dict = field(default_factory=dict)

    @property
    def is_open(self):
        return self.status == OPEN

    def mark_tried(self, role, mode, roles):
        self.tried.add((role, mode))
        if all((r, m) in self.tried for r in roles for m in MODES):
            self.status = CLOSED


@dataclass
class OuterLoopConfig:
    m: int = 5
    m_prime: int = 2
    minsamp: int = 15
    mincsamp: int = 40
    role_rotation: tuple = None
    weights: str = 'player'
    max_rounds: int = 1000

    def __post_init__(self):
        if not self.m >= self.m_prime >= 1:
            raise ConfigurationError("need m >= m' >= 1")
        if not self.mincsamp >= self.minsamp >= 1:
            raise ConfigurationError('need mincsamp >= minsamp >= 1')
        if self.weights not in SCHEMES:
            raise ConfigurationError('unknown weighting scheme: {}'.format(
                self.weights))


def select_target(solutions, mode, scores, weights):
    """Most compliant open solution in non-compliant mode, least in compliant

    Ties go to lower regret, then to the lexicographically smaller profile.
    """
    open_sols = [s for s in solutions if s.is_open]
    if not open_sols:
        raise SearchComplete('all solutions are closed')
    sign = -1.0 if mode == NON_COMPLIANT else 1.0
    return min(open_sols, key=lambda s: (
        sign * profile_compliance(s.profile, scores, weights), s.regret,
        repr(s.profile)))


def _polarity_ok(spec, params, mode):
    return spec.is_compliant(params) == (mode == COMPLIANT)


def local_search(seeds, explored, mode, spec, role=None):
    """Nearest unexplored grid variations of the requested polarity

    At level k every seed has each parameter moved by +-k grid steps (one
    parameter at a time, clipped to its domain). The first level yielding
    any unexplored strategy of the right polarity is returned.
    ``explored`` may hold strategies or param ids.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError('local search needs at least one seed')
    seen = {e if isinstance(e, str) else param_id(e.params) for e in explored}
    role = role if role is not None else seeds[0].role
    widest = max(d.num_steps for d in spec.domains)
    for level in range(1, widest + 1):
        found = {}
        for seed in seeds:
            for i, dom in enumerate(spec.domains):
                base = dom.index(seed.params[i])
                for step in (-level, level):
                    params = list(seed.params)
                    params[i] = dom.value(base + step)
                    if params[i] == seed.params[i]:
                        continue  # clipped back onto the seed
                    pid = param_id(params)
                    if pid in seen or pid in found:
                        continue
                    if _polarity_ok(spec, params, mode):
                        found[pid] = Strategy.from_params(role, params)
        if found:
            return [found[k] for k in sorted(found)]
    raise RegionExhausted('no unexplored {} strategy reachable for role {}'
                          .format(mode, role))


def select_best_deviators(game, q, role, strategies, m):
    """Up to ``m`` strategies with the highest deviation payoff against ``q``"""
    scored = sorted(((analysis.expected_payoff(game, q, role, s), s)
                     for s in strategies), key=lambda t: (-t[0], t[1]))
    return [s for _, s in scored[:m]]


@dataclass
class ExploreOutcome:
    kind: str  # 'added', 'failed', or 'closed'
    role: str
    mode: str
    strategy: str = None
    gain: float = None
    explored: int = 0


def explore(game, solution, role, mode, config, scheduler, spec, label=None):
    """Hill-climb for a beneficial deviation of polarity ``mode`` in ``role``

    The best explored strategy is added to the candidate set when it gains
    strictly over the target profile's payoff for the role; otherwise the
    (role, mode) pair is marked tried on ``solution``, closing it once every
    pair has failed.
    """
    q = solution.profile
    support_profiles = q.support_profiles(game.players)
    # normally a no-op: the inner loop already sampled the support
    scheduler.top_up(support_profiles, config.minsamp)
    cands = game.strategy_sets[role]
    explored = {param_id(game.strategy(role, s).params) for s in cands}
    prior = solution.explored.setdefault((role, mode), set())
    explored |= prior
    newly = set()
    for strat in game.catalog[role].values():
        if param_id(strat.params) in prior and strat.id not in cands:
            newly.add(strat.id)
    seeds = [game.strategy(role, s) for s in q.support(role)]
    new_pay = -math.inf
    for _ in range(config.max_rounds):
        best_pay = new_pay
        try:
            cand = local_search(seeds, explored, mode, spec, role)
        except RegionExhausted:
            if newly:
                break
            solution.mark_tried(role, mode, game.role_names)
            return ExploreOutcome(CLOSED if not solution.is_open else 'failed',
                                  role, mode)
        cand = [game.add_strategy(s) for s in cand]
        ids = [s.id for s in cand]
        scheduler.schedule_deviation(support_profiles, {role: ids},
                                     config.minsamp)
        for s in cand:
            explored.add(param_id(s.params))
            prior.add(param_id(s.params))
            newly.add(s.id)
        top = select_best_deviators(game, q, role, ids, config.m)
        scheduler.schedule_deviation(support_profiles, {role: top},
                                     config.mincsamp)
        seed_ids = select_best_deviators(game, q, role, ids, config.m_prime)
        seeds = [game.strategy(role, s) for s in seed_ids]
        new_pay = max(analysis.expected_payoff(game, q, role, s)
                      for s in seed_ids)
        if new_pay <= best_pay:
            break
    newly -= set(cands)
    best = select_best_deviators(game, q, role, sorted(newly), 1)[0]
    base = sum(p * analysis.expected_payoff(game, q, role, s)
               for s, p in q.mixture[role].items())
    gain = analysis.expected_payoff(game, q, role, best) - base
    if gain > 0:
        if label:
            game.relabel(role, best, label)
        game.add_candidate(role, best)
        game.auto_generated.add((role, best))
        log.info('adding %s to %s (gain %.4g)', best, role, gain)
        return ExploreOutcome('added', role, mode, best, gain, len(newly))
    solution.mark_tried(role, mode, game.role_names)
    kind = 'failed' if solution.is_open else CLOSED
    return ExploreOutcome(kind, role, mode, best, gain, len(newly))


@dataclass
class SearchResult:
    solutions: list
    status: str
    iterations: int
    outcomes: list
    candidates: object = None


def _merge_records(old, confirmed):
    records = []
    for cand in confirmed:
        rec = SolutionRecord(cand.profile, cand.regret)
        for prev in old:
            if prev.profile.distance(cand.profile) <= analysis.MERGE_TOL:
                rec.status = prev.status
                rec.tried = set(prev.tried)
                rec.explored = prev.explored
                break
        records.append(rec)
    return records


def _next_pair(rotation, position, last_mode):
    role = rotation[position % len(rotation)]
    prev = last_mode.get(role)
    mode = NON_COMPLIANT if prev in (None, COMPLIANT) else COMPLIANT
    return role, mode


def compliance_search(game, inner_config, outer_config, scheduler, spec,
                      budget_iters=None, budget_wall=None, progress=None,
                      outer_log=None):
    """Alternate inner loops and directed deviation searches

    Stops when every solution is closed or a budget runs out. Closed
    solutions stay closed when the candidate sets grow.
    """
    start = time.monotonic()
    rotation = outer_config.role_rotation or tuple(
        r.name for r in sorted(game.roles, key=lambda r: -r.node_count))
    weights = role_weights(game.roles, outer_config.weights)
    cands = run_inner_loop(game, inner_config, scheduler, progress)
    records = _merge_records([], cands.confirmed)
    last_mode = {}
    outcomes = []
    iteration = 0
    position = 0

    def out_of_budget():
        if budget_iters is not None and iteration >= budget_iters:
            return True
        return (budget_wall is not None
                and time.monotonic() - start >= budget_wall)

    while not out_of_budget():
        if not any(r.is_open for r in records):
            break
        scores = compliance_scores(game, spec)
        choice = None
        for offset in range(2 * len(rotation)):
            role, mode = _next_pair(rotation, position + offset // 2,
                                    last_mode)
            if offset % 2:
                mode = COMPLIANT if mode == NON_COMPLIANT else NON_COMPLIANT
            eligible = [r for r in records
                        if r.is_open and (role, mode) not in r.tried]
            if eligible:
                choice = role, mode, select_target(eligible, mode, scores,
                                                   weights)
                position += offset // 2
                break
        if choice is None:
            break
        role, mode, target = choice
        position += 1
        last_mode[role] = mode
        iteration += 1
        label = '{}{}'.format('C' if mode == COMPLIANT else 'N', iteration)
        log.info('iteration %d: %s search for role %s from %r', iteration,
                 mode, role, target.profile)
        outcome = explore(game, target, role, mode, outer_config, scheduler,
                          spec, label)
        outcomes.append(outcome)
        if outer_log is not None:
            outer_log.write(iteration=iteration, kind=outcome.kind, role=role,
                            mode=mode, strategy=outcome.strategy,
                            gain=outcome.gain, explored=outcome.explored,
                            sims_run=scheduler.sims_run)
        if outcome.kind == 'added':
            cands = run_inner_loop(game, inner_config, scheduler, progress)
            records = _merge_records(records, cands.confirmed)
    status = ('complete' if not any(r.is_open for r in records)
              else 'open solutions remain')
    return SearchResult(records, status, iteration, outcomes, cands)
