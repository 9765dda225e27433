"""Acceptance criteria, one test each

Each test prints a single ``criterion N: PASS|FAIL`` line with its measured
values and elapsed time, then asserts. Run just this file with::

    python3 -m pytest tests/test_acceptance.py -v
"""
import itertools
import json
import math
import time

import numpy as np
import pytest

from compliance_egta import cli
from compliance_egta.analysis import (Subgame, game_analysis,
                                      maximal_complete_subgames, regret,
                                      replicator_dynamics)
from compliance_egta.exploration import (COMPLIANT, NON_COMPLIANT,
                                         OuterLoopConfig, SolutionRecord,
                                         compliance_fractions, explore)
from compliance_egta.game import (EmpiricalGame, MixedProfile, RoleSpec,
                                  Strategy, load_game)
from compliance_egta.ibr import (SEED_POLICIES, load_scenario, run_simulation,
                                 uniform_policies)
from compliance_egta.inner_loop import InnerLoopConfig, run_inner_loop
from compliance_egta.scheduler import Scheduler
from compliance_egta.synthetic import QuadraticOracle, line_game

from oracles import (brute_deviation_payoff, brute_maximal_subgames,
                     brute_regret, random_game, random_mixture)

CYCLE = {'A': {'A': 0, 'B': 1, 'C': -1},
         'B': {'A': -1, 'B': 0, 'C': 1},
         'C': {'A': 1, 'B': -1, 'C': 0}}


@pytest.fixture
def verdict(capsys):
    """Print one pass/fail line past output capture"""
    start = time.monotonic()

    def report(number, ok, detail):
        elapsed = time.monotonic() - start
        with capsys.disabled():
            print('\ncriterion {}: {} ({}; {:.1f}s)'.format(
                number, 'PASS' if ok else 'FAIL', detail, elapsed))
        return elapsed
    return report


class MatrixOracle:
    def __init__(self, matrix):
        self.matrix = matrix
        self.calls = []

    def __call__(self, profile, seed):
        self.calls.append(profile.id)
        return [float(sum(self.matrix[a][b] for j, b in enumerate(strats)
                          if j != i))
                for strats in profile.strategies
                for i, a in enumerate(strats)]


def matrix_game(matrix, players, skip=()):
    labels = sorted(matrix)
    game = EmpiricalGame([RoleSpec('all', players)],
                         [Strategy('all', s) for s in labels])
    oracle = MatrixOracle(matrix)
    for combo in itertools.combinations_with_replacement(labels, players):
        if combo not in skip:
            prof = game.profile({'all': list(combo)})
            game.payoffs.record(prof, oracle(prof, 0), 0)
    oracle.calls.clear()
    return game, oracle


def test_criterion_1_regret_oracle(verdict):
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(200):
        game = random_game(rng)
        q = random_mixture(rng, game)
        res = regret(game, q)
        want, gains = brute_regret(game, q)
        ok = math.isclose(res.regret, want, abs_tol=1e-9)
        for role, role_gains in gains.items():
            best = max(role_gains.values())
            brs = {s for s, g in role_gains.items()
                   if math.isclose(g, best, abs_tol=1e-9)}
            ok &= res.best_response[role] in brs
            ok &= all(math.isclose(res.gains[role][s], g, abs_tol=1e-9)
                      for s, g in role_gains.items())
        mismatches += not ok
    elapsed = verdict(1, mismatches == 0,
                      '{} of 200 games mismatched'.format(mismatches))
    assert mismatches == 0
    assert elapsed < 60


def test_criterion_2_maximal_subgame_oracle(verdict):
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(200):
        game = random_game(rng, fill=float(rng.uniform(0.2, 0.95)))
        got = [s.sets for s in maximal_complete_subgames(game)]
        mismatches += got != brute_maximal_subgames(game)
    elapsed = verdict(2, mismatches == 0,
                      '{} of 200 games mismatched'.format(mismatches))
    assert mismatches == 0
    assert elapsed < 60


def test_criterion_3_footnote_game(verdict):
    game, oracle = matrix_game(CYCLE, 3, skip=[('A', 'B', 'C')])
    first = game_analysis(game, 1e-6)
    refuted = {next(iter(c.profile.mixture['all'])): c.best_response[1]
               for c in first.refuted}
    refutes_ok = (refuted == {'A': 'C', 'B': 'A', 'C': 'B'}
                  and not first.confirmed and not first.unconfirmed)
    sched = Scheduler(game, oracle, workers=1)
    cands = run_inner_loop(game, InnerLoopConfig(1e-6, 1, 2), sched)
    evaluated = 'all: A B C' in oracle.calls
    full = [c for c in cands.confirmed
            if c.profile.support('all') == ['A', 'B', 'C']]
    eps = brute_regret(game, full[0].profile)[0] if full else math.inf
    ok = refutes_ok and evaluated and len(full) == 1 and eps <= 1e-6
    verdict(3, ok, 'refutations {}, (A,B,C) evaluated {}, full-support '
            'regret {:.2e}'.format(refuted, evaluated, eps))
    assert ok


def test_criterion_4_replicator_sanity(verdict):
    game, _ = matrix_game(CYCLE, 2)
    (rps,) = replicator_dynamics(Subgame.make(game.strategy_sets), game)
    dist = max(abs(p - 1 / 3) for p in rps.mixture['all'].values())
    rps_eps = brute_regret(game, rps)[0]
    dom = {'D': {'D': 3, 'E': 5}, 'E': {'D': 1, 'E': 4}}
    dgame, _ = matrix_game(dom, 3)
    eqs = replicator_dynamics(Subgame.make(dgame.strategy_sets), dgame)
    dom_ok = eqs == [MixedProfile({'all': {'D': 1.0}})]
    dom_eps = brute_regret(dgame, eqs[0])[0]
    ok = dist <= 1e-4 and rps_eps <= 1e-6 and dom_ok and dom_eps <= 1e-6
    verdict(4, ok, 'RPS L-inf {:.1e} regret {:.1e}; dominant found {} '
            'regret {:.1e}'.format(dist, rps_eps, dom_ok, dom_eps))
    assert ok


def test_criterion_5_compliance_arithmetic(verdict):
    roles = load_scenario('env3').roles()
    counts = {r.name: (r.player_count, r.node_count) for r in roles}
    scores = {r.name: {'C': 1.0, 'N': -1.0} for r in roles}
    q = MixedProfile.pure({r.name: 'C' if r.name == 'client' else 'N'
                           for r in roles})
    fr = compliance_fractions(q, scores, roles)
    got = [round(fr[s], 1) for s in ('role', 'player', 'node')]
    ok = got == [25.0, 33.3, 96.8] and counts == {
        'client': (2, 1980), 'isp': (2, 30), 'root': (1, 5),
        'server': (1, 30)}
    verdict(5, ok, 'role/player/node = {}%'.format(got))
    assert ok


def _hill_climb(run, peak, seed_value, mode, noise=0.5):
    game, spec = line_game([seed_value], players=2,
                           compliant=(0.6, math.inf))
    oracle = QuadraticOracle(game.catalog, {'agent': [peak]}, curvature=100,
                             noise=noise)
    sched = Scheduler(game, oracle, master_seed=run, workers=1)
    q = MixedProfile.pure({'agent': game.strategy_sets['agent'][0]})
    out = explore(game, SolutionRecord(q), 'agent', mode, OuterLoopConfig(),
                  sched, spec)
    return game.strategy('agent', out.strategy).params[0], spec


def test_criterion_6_hill_climbing(verdict):
    rng = np.random.default_rng(6)
    step = 0.05
    hits = 0
    for run in range(100):
        # argmax inside the non-compliant region, seed inside the compliant
        peak = float(rng.uniform(0.05, 0.5))
        seed_value = round(float(rng.choice(np.arange(0.65, 1.0, step))), 2)
        found, _ = _hill_climb(run, peak, seed_value, NON_COMPLIANT)
        grid_best = round(peak / step) * step
        hits += abs(found - grid_best) <= step + 1e-9
    compliant_ok = 0
    for run in range(20):
        peak = float(rng.uniform(0.05, 0.5))
        seed_value = round(float(rng.choice(np.arange(0.0, 0.55, step))), 2)
        found, spec = _hill_climb(run, peak, seed_value, COMPLIANT)
        # payoff falls with distance from the peak, so 0.65 is the best
        # compliant grid point
        compliant_ok += spec.is_compliant([found]) and math.isclose(
            found, 0.65)
    ok = hits >= 95 and compliant_ok == 20
    elapsed = verdict(6, ok, '{}/100 within one grid step; compliant mode '
                      'best compliant point {}/20'.format(hits, compliant_ok))
    assert ok
    assert elapsed < 120


def test_criterion_7_simulator_determinism(verdict):
    cfg = load_scenario('desk').network
    assert (cfg.N_R, cfg.N_I, cfg.c_per_isp, cfg.horizon) == (3, 4, 5, 2000)
    labels = list(SEED_POLICIES)
    failures = []
    for seed in range(50):
        # vary the profile so every policy sees audited runs
        names = sorted(uniform_policies(cfg, None))
        pols = {n: SEED_POLICIES[labels[(i + seed) % len(labels)]]
                for i, n in enumerate(names)}
        a = run_simulation(cfg, pols, seed=seed, audit=True)
        b = run_simulation(cfg, pols, seed=seed, audit=True)
        try:
            assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(
                b.to_json(), sort_keys=True)
            a.check_invariants()
            lo, hi = a.audit['chain_lengths']
            assert 1 <= lo <= hi <= 4
        except AssertionError:
            failures.append(seed)
    elapsed = verdict(7, not failures, '{} of 50 runs failed {}'.format(
        len(failures), failures))
    assert not failures
    assert elapsed < 300


def test_criterion_8_directional_security(verdict):
    cfg = load_scenario('desk').network
    assert cfg.n_a == 4
    wins = losses = 0
    totals = [0, 0]
    for seed in range(30):
        comp = run_simulation(cfg, uniform_policies(cfg, SEED_POLICIES['C']),
                              seed=seed).aggregate['attacks_succeeded']
        obl = run_simulation(cfg, uniform_policies(cfg, SEED_POLICIES['N']),
                             seed=seed).aggregate['attacks_succeeded']
        totals[0] += comp
        totals[1] += obl
        wins += comp < obl
        losses += comp > obl
    n = wins + losses
    # one-sided sign test, ties dropped
    p = sum(math.comb(n, k) for k in range(wins, n + 1)) / 2 ** n if n else 1
    ok = p < 0.05 and totals[0] < totals[1]
    verdict(8, ok, 'successful attacks compliant {} vs oblivious {}; '
            '{} fewer, {} more, p = {:.2e}'.format(totals[0], totals[1], wins,
                                                   losses, p))
    assert ok


def test_criterion_9_message_calibration(verdict, tmp_path):
    out = tmp_path / 'env1.json'
    code = cli.main(['simulate', '--config', 'env1', '--profile',
                     'client=C;isp=C;root=C;server=C', '--seed', '1',
                     '--out', str(out)])
    man = json.loads((tmp_path / 'env1.manifest.json').read_text())
    res = json.loads(out.read_text())
    per_client = man['messages_per_client']
    n_clients = sum(1 for k in res['stats'] if k.startswith('client'))
    net = load_scenario('env1').network
    ok = (code == 0 and 250 <= per_client <= 450 and n_clients == 4851
          and man['calibration'] == {'messages_per_client': 330,
                                     'band': [250, 450]}
          and net.horizon == 10000 and net.sleep_max == 39)
    verdict(9, ok, '{:.1f} messages per client over {} clients; manifest '
            'calibration {}'.format(per_client, n_clients,
                                    man['calibration']))
    assert ok


def test_criterion_10_desk_search(verdict, tmp_path):
    seeds = ['C', 'N', "C'", "C''"]
    config = {
        'scenario': 'desk',
        'seed_strategies': {r: seeds for r in ('client', 'isp', 'root',
                                               'server')},
        'inner': {'tau_fraction': 0.001, 'minsamp': 5, 'mincsamp': 10},
        'outer': {'m': 5, 'm_prime': 2, 'minsamp': 5, 'mincsamp': 10},
        'budgets': {'iterations': 6},
        'output_dir': 'search',
        'master_seed': 0,
        'workers': 1,
    }
    path = tmp_path / 'desk.json'
    path.write_text(json.dumps(config))
    code = cli.main(['search', '--config', str(path)])
    out = tmp_path / 'search'
    rep = json.loads((out / 'report.json').read_text())
    man = json.loads((out / 'manifest.json').read_text())
    tau = man['tau']
    # re-verify from the archived files only
    game = load_game(out / 'game.json', out / 'payoffs.jsonl')
    problems = []
    for sol in rep['solutions']:
        q = MixedProfile(sol['mixture'])
        eps, gains = brute_regret(game, q)
        for role in game.role_names:
            for s in game.strategy_sets[role]:
                if brute_deviation_payoff(game, q, role, s) is None:
                    problems.append('missing deviation {}:{}'.format(role, s))
        if eps > tau + 1e-9:
            problems.append('regret {} above tau {}'.format(eps, tau))
        if not math.isclose(eps, sol['regret'], rel_tol=1e-9, abs_tol=1e-9):
            problems.append('reported regret {} vs {}'.format(sol['regret'],
                                                             eps))
        if min(game.count(p) for p in q.support_profiles(game.players)) < 10:
            problems.append('support under-sampled')
    auto = [c for c in rep['catalog'] if c['auto_generated']]
    ok = (code == 0 and len(rep['solutions']) >= 1 and len(auto) >= 1
          and not problems)
    labels = ['; '.join('{}={}'.format(r, ','.join(v))
                        for r, v in s['labels'].items())
              for s in rep['solutions']]
    verdict(10, ok, '{} confirmed solutions {}, {} auto-generated, {} '
            'iterations, {} simulations, status {!r}, problems {}'.format(
                len(rep['solutions']), labels, len(auto), rep['iterations'],
                man['sims_run'], rep['status'], problems))
    assert ok
