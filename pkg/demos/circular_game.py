"""Three players, three strategies, circular best responses

Every profile except the one where all three strategies are played has been
simulated. Each pure profile is beaten by the next strategy round the
circle, and the only equilibrium needs the missing profile. The inner loop
finds this by extending a maximal complete subgame.

    python3 demos/circular_game.py
"""
import itertools

from compliance_egta import (EmpiricalGame, InnerLoopConfig, RoleSpec,
                             Scheduler, Strategy, game_analysis,
                             run_inner_loop)

BEATS = {'A': {'A': 0, 'B': 1, 'C': -1},
         'B': {'A': -1, 'B': 0, 'C': 1},
         'C': {'A': 1, 'B': -1, 'C': 0}}


def payoffs(profile, seed):
    (strats,) = profile.strategies
    return [float(sum(BEATS[a][b] for j, b in enumerate(strats) if j != i))
            for i, a in enumerate(strats)]


def main():
    game = EmpiricalGame([RoleSpec('all', 3)],
                         [Strategy('all', s) for s in 'ABC'])
    for combo in itertools.combinations_with_replacement('ABC', 3):
        if combo != ('A', 'B', 'C'):
            prof = game.profile({'all': list(combo)})
            game.payoffs.record(prof, payoffs(prof, 0), 0)

    print('before:')
    for cand in game_analysis(game, 1e-6).all():
        print('  {!r:28} {:10} regret {:.3g}  beaten by {}'.format(
            cand.profile, cand.status, cand.regret, cand.best_response[1]))

    sched = Scheduler(game, payoffs, workers=1)
    cands = run_inner_loop(game, InnerLoopConfig(1e-6, 1, 2), sched)
    print('after {} new simulations:'.format(sched.sims_run))
    for cand in cands.confirmed:
        print('  {!r} confirmed, regret {:.2g}'.format(cand.profile,
                                                       cand.regret))


if __name__ == '__main__':
    main()
