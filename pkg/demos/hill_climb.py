"""Directed local search on a one-parameter game

Payoff is a noisy concave quadratic peaking at 0.3; strategies above 0.55
are compliant. Starting from a compliant strategy, the non-compliant search
walks down to the peak, while the compliant search from a non-compliant
strategy stops at the best compliant point it can reach.

    python3 demos/hill_climb.py
"""
import math

from compliance_egta import MixedProfile, Scheduler
from compliance_egta.exploration import (COMPLIANT, NON_COMPLIANT,
                                         OuterLoopConfig, SolutionRecord,
                                         explore)
from compliance_egta.synthetic import QuadraticOracle, line_game


def search(start, mode):
    game, spec = line_game([start], compliant=(0.55, math.inf))
    oracle = QuadraticOracle(game.catalog, {'agent': [0.3]}, curvature=100,
                             noise=0.5)
    sched = Scheduler(game, oracle, master_seed=1, workers=1)
    q = MixedProfile.pure({'agent': game.strategy_sets['agent'][0]})
    out = explore(game, SolutionRecord(q), 'agent', mode, OuterLoopConfig(),
                  sched, spec, label='X')
    best = game.strategy('agent', out.strategy)
    print('{:>13} search from {:.2f}: best {:.2f} (compliance {:+.2f}), '
          'gain {:+.2f}, {}; {} strategies tried, {} simulations'.format(
              mode, start, best.params[0], spec.score(best.params), out.gain,
              out.kind, out.explored, sched.sims_run))


if __name__ == '__main__':
    search(0.9, NON_COMPLIANT)
    search(0.1, COMPLIANT)
