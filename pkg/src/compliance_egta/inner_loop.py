"""Simulate-analyze cycle that confirms equilibria over a fixed strategy space"""
import itertools
import json
import logging
from dataclasses import dataclass

import numpy as np

from compliance_egta import analysis
from compliance_egta.analysis import Subgame
from compliance_egta.errors import (BudgetExhausted, ConfigurationError,
                                    NoSolutionFound)

log = logging.getLogger(__name__)


@dataclass
class InnerLoopConfig:
    tau: float
    minsamp: int = 40
    mincsamp: int = 80
    max_profile_budget: int = 50000
    restarts: int = 20
    max_iters: int = 10000
    analysis_seed: int = 0
    # randomizes incr_subgame tie-breaks when set
    subgame_seed: int = None

    def __post_init__(self):
        if self.tau < 0:
            raise ConfigurationError('tau must be nonnegative')
        if not self.mincsamp > self.minsamp >= 1:
            raise ConfigurationError('need mincsamp > minsamp >= 1')


def incr_subgame(game, explored=(), maximal=None, rng=None):
    """Smallest incomplete subgame extending a maximal complete subgame

    Ties go to the lexicographically first role/strategy signature unless
    ``rng`` is given, in which case one is drawn at random. With no complete
    subgames at all, the candidates are single-strategy-per-role subgames.
    """
    if maximal is None:
        maximal = analysis.maximal_complete_subgames(game)
    names = game.role_names
    sets = game.strategy_sets
    if maximal:
        options = set()
        for sub in maximal:
            for r, have in zip(names, sub.sets):
                for s in sets[r]:
                    if s not in have:
                        options.add(sub.add(r, s))
    else:
        options = {Subgame.make(dict(zip(names, ([s] for s in combo))), names)
                   for combo in _product(sets[r] for r in names)}
        options = {o for o in options if not game.is_complete(o.strategy_sets)}
    if not options:
        raise NoSolutionFound('every profile over the candidate sets is '
                              'evaluated but no equilibrium was found')
    fresh = {o for o in options if o not in explored}
    options = fresh or options
    smallest = min(o.size for o in options)
    ties = sorted((o for o in options if o.size == smallest),
                  key=lambda o: o.sets)
    if rng is not None:
        return ties[rng.integers(len(ties))]
    return ties[0]


def _product(iterables):
    return itertools.product(*[sorted(i) for i in iterables])


def _min_samples(game, q):
    return min(game.count(p) for p in q.support_profiles(game.players))


class ProgressLog:
    """Line-delimited JSON progress records"""

    def __init__(self, path=None):
        self.path = path
        self.records = []

    def write(self, **record):
        self.records.append(record)
        log.info('inner loop: %s', record)
        if self.path is not None:
            with open(self.path, 'a') as f:
                f.write(json.dumps(record) + '\n')


def run_inner_loop(game, config, scheduler, progress=None):
    """Iterate analysis and scheduling until confirmed equilibria exist

    Returns the final :class:`CandidateSet`; its ``confirmed`` list holds
    candidates with regret at most tau, every deviation in the candidate
    sets evaluated, and at least ``mincsamp`` samples on each support
    profile. Its ``unconfirmed`` list is empty.
    """
    progress = progress if progress is not None else ProgressLog()
    rng = (None if config.subgame_seed is None
           else np.random.default_rng(config.subgame_seed))
    players = game.players
    explored = set()
    saved_limit = scheduler.run_limit
    scheduler.run_limit = scheduler.sims_run + config.max_profile_budget
    iteration = 0
    cands = None

    def analyze():
        nonlocal iteration
        iteration += 1
        res = analysis.game_analysis(game, config.tau, config.restarts,
                                     config.max_iters, config.analysis_seed)
        progress.write(iteration=iteration,
                       num_candidates_by_status=res.counts(),
                       profiles_evaluated=len(game.evaluated_profiles()),
                       sims_run=scheduler.sims_run)
        return res

    try:
        while True:
            cands = analyze()
            while cands.unconfirmed:
                for cand in cands.unconfirmed:
                    q = cand.profile
                    devs = {r: [s for s in game.strategy_sets[r]
                                if s not in q.mixture[r]]
                            for r in game.role_names}
                    scheduler.schedule_deviation(
                        q.support_profiles(players), devs, config.minsamp)
                cands = analyze()

            if cands.confirmed:
                done = True
                for cand in cands.confirmed:
                    if _min_samples(game, cand.profile) < config.mincsamp:
                        scheduler.schedule_subgame(
                            cand.profile.strategies_in(), config.mincsamp)
                        done = False
                if done:
                    return cands
                continue

            scheduled = False
            for cand in sorted(cands.refuted, key=lambda c: c.regret):
                role, strat = cand.best_response
                sub = Subgame.make(cand.profile.strategies_in(),
                                   game.role_names).add(role, strat)
                if sub in explored or game.is_complete(sub.strategy_sets):
                    continue
                explored.add(sub)
                log.info('exploring best-response subgame %s', sub)
                scheduler.schedule_subgame(sub.strategy_sets, config.mincsamp)
                scheduled = True
                break
            if not scheduled:
                sub = incr_subgame(game, explored, cands.subgames, rng)
                explored.add(sub)
                log.info('extending to subgame %s', sub)
                scheduler.schedule_subgame(sub.strategy_sets, config.minsamp)
    except BudgetExhausted as exc:
        raise BudgetExhausted(str(exc), cands) from exc
    finally:
        scheduler.run_limit = saved_limit
