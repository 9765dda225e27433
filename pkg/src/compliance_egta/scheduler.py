"""Sample scheduling against the cumulative payoff database

An oracle is any callable ``oracle(profile, seed)`` returning one payoff per
player slot of ``profile`` (role by role, in canonical order). Oracles used
with ``workers > 1`` must be picklable.
"""
import logging
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from compliance_egta.errors import BudgetExhausted, SimulationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SampleRequest:
    profiles: frozenset
    target_count: int

    def __post_init__(self):
        if self.target_count < 1:
            raise ValueError('target_count must be at least 1')


def deviation_targets(game, base_profiles, strategies):
    """Profiles formed by one player switching to a listed strategy

    ``strategies`` maps role to the strategies deviators may switch to.
    """
    result = set()
    for prof in base_profiles:
        for role, strats in strategies.items():
            ri = game.role_index(role)
            own = prof.strategies[ri]
            for old in set(own):
                rest = list(own)
                rest.remove(old)
                for new in strats:
                    if new == old:
                        continue
                    key = list(prof.strategies)
                    key[ri] = tuple(sorted(rest + [new]))
                    result.add(type(prof)(prof.roles, tuple(key)))
    return result


def _simulate(oracle, profile, seed):
    try:
        return np.asarray(oracle(profile, seed), float), None
    except Exception as exc:  # retried by the caller
        return None, exc


class Scheduler:
    """Tops profiles up to requested sample counts

    Seeds mix the master seed, a global run counter, and a hash of the
    profile id, so a whole search is reproducible from one master seed.
    """

    def __init__(self, game, oracle, master_seed=0, workers=1):
        self.game = game
        self.oracle = oracle
        self.master_seed = int(master_seed)
        self.workers = workers or os.cpu_count() or 1
        self.sims_run = 0
        self.run_limit = None
        self._counter = 0
        self._pool = None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _seed(self, profile):
        self._counter += 1
        seq = np.random.SeedSequence(
            [self.master_seed, self._counter,
             zlib.crc32(profile.id.encode())])
        return int(seq.generate_state(1, np.uint32)[0])

    def _execute(self, jobs):
        if self.workers > 1 and len(jobs) > 1:
            if self._pool is None:
                self._pool = ProcessPoolExecutor(self.workers)
            results = list(self._pool.map(
                _simulate, [self.oracle] * len(jobs), *zip(*jobs),
                chunksize=max(1, len(jobs) // (4 * self.workers))))
        else:
            results = [_simulate(self.oracle, p, s) for p, s in jobs]
        for (prof, seed), (payoffs, exc) in zip(jobs, results):
            if exc is not None:
                log.warning('retrying %s after %r', prof, exc)
                payoffs, exc = _simulate(self.oracle, prof, seed)
                if exc is not None:
                    raise SimulationError(prof, exc)
            self.game.payoffs.record(prof, payoffs, seed)
            self.sims_run += 1

    def top_up(self, profiles, n):
        """Run ``max(0, n - count)`` simulations per profile; return runs"""
        db = self.game.payoffs
        jobs = []
        for prof in sorted(set(profiles), key=lambda p: p.key):
            for _ in range(max(0, n - db.count(prof))):
                jobs.append((prof, self._seed(prof)))
        if not jobs:
            return 0
        if self.run_limit is not None and \
                self.sims_run + len(jobs) > self.run_limit:
            raise BudgetExhausted('simulation budget of {} runs exhausted'
                                  .format(self.run_limit))
        log.debug('scheduling %d runs over %d profiles', len(jobs),
                  len({p for p, _ in jobs}))
        self._execute(jobs)
        return len(jobs)

    def request(self, req):
        return self.top_up(req.profiles, req.target_count)

    def schedule_deviation(self, base_profiles, strategies, n):
        """Top up deviations from ``base_profiles`` to ``strategies``"""
        return self.top_up(deviation_targets(
            self.game, base_profiles, strategies), n)

    def schedule_subgame(self, strategies, n):
        """Top up every profile over the per-role ``strategies``"""
        return self.top_up(self.game.all_profiles(strategies), n)

    def status(self):
        return coverage(self.game)


def coverage(game):
    """Profile counts and coverage of the candidate profile space"""
    profiles = game.evaluated_profiles()
    total = game.num_profiles()
    counts = [game.count(p) for p in profiles]
    return {'profiles_evaluated': len(profiles),
            'profile_space': total,
            'coverage_pct': 100.0 * len(profiles) / total if total else 0.0,
            'observations': len(game.payoffs),
            'strategies': sum(len(s) for s in game.strategy_sets.values()),
            'min_samples': min(counts) if counts else 0,
            'max_samples': max(counts) if counts else 0}
