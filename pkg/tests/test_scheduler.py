import collections

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compliance_egta.errors import BudgetExhausted, SimulationError
from compliance_egta.game import EmpiricalGame, RoleSpec, Strategy
from compliance_egta.scheduler import SampleRequest, Scheduler, coverage


class CountingOracle:
    """Payoff equals the seed modulo 100; remembers every call"""

    def __init__(self, fail=()):
        self.calls = collections.Counter()
        self.fail = collections.Counter(fail)
        self.seeds = []

    def __call__(self, profile, seed):
        self.calls[profile.id] += 1
        self.seeds.append(seed)
        if self.fail[profile.id] > 0:
            self.fail[profile.id] -= 1
            raise RuntimeError('boom')
        return [float(seed % 100)] * sum(len(s) for s in profile.strategies)


def sym_game(players=3, labels=('A', 'B')):
    return EmpiricalGame([RoleSpec('r', players)],
                         [Strategy('r', s) for s in labels])


def multi_role_game():
    return EmpiricalGame([RoleSpec(n, 1) for n in ('a', 'b', 'c')],
                         [Strategy(n, 'S') for n in ('a', 'b', 'c')])


def test_sample_request_needs_positive_target():
    with pytest.raises(ValueError):
        SampleRequest(frozenset(), 0)


def test_single_profile_subgame():
    game = multi_role_game()
    oracle = CountingOracle()
    sched = Scheduler(game, oracle, workers=1)
    assert sched.schedule_subgame(game.strategy_sets, 2) == 2
    assert list(oracle.calls.values()) == [2]


def test_symmetric_subgame_has_four_profiles():
    game = sym_game()
    oracle = CountingOracle()
    sched = Scheduler(game, oracle, workers=1)
    assert sched.schedule_subgame({'r': ['A', 'B']}, 3) == 12
    assert sorted(oracle.calls) == ['r: A A A', 'r: A A B', 'r: A B B',
                                    'r: B B B']
    assert sched.schedule_subgame({'r': ['A', 'B']}, 3) == 0


def test_pure_deviation_only_one_profile():
    game = sym_game()
    oracle = CountingOracle()
    sched = Scheduler(game, oracle, workers=1)
    base = game.profile({'r': ['A', 'A', 'A']})
    assert sched.schedule_deviation([base], {'r': ['B']}, 2) == 2
    assert list(oracle.calls) == ['r: A A B']


def test_deficit_is_topped_up_exactly():
    game = sym_game()
    sched = Scheduler(game, CountingOracle(), workers=1)
    prof = game.profile({'r': ['A', 'A', 'B']})
    sched.top_up([prof], 7)
    assert sched.top_up([prof], 10) == 3
    assert game.count(prof) == 10
    assert sched.top_up([prof], 4) == 0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(1, 6)),
                min_size=1, max_size=8))
def test_runs_equal_deficits(requests):
    game = sym_game()
    profs = sorted(game.all_profiles(), key=lambda p: p.key)
    sched = Scheduler(game, CountingOracle(), workers=1)
    for idx, n in requests:
        prof = profs[idx]
        prior = game.count(prof)
        assert sched.top_up([prof], n) == max(0, n - prior)
        assert game.count(prof) == max(n, prior)
        assert sched.top_up([prof], n) == 0


def test_failed_run_retried_once():
    game = sym_game()
    oracle = CountingOracle(fail={'r: A A A': 1})
    sched = Scheduler(game, oracle, workers=1)
    prof = game.profile({'r': ['A', 'A', 'A']})
    assert sched.top_up([prof], 1) == 1
    assert oracle.calls['r: A A A'] == 2
    assert game.count(prof) == 1


def test_repeated_failure_names_profile():
    game = sym_game()
    sched = Scheduler(game, CountingOracle(fail={'r: A A B': 2}), workers=1)
    with pytest.raises(SimulationError, match='r: A A B'):
        sched.top_up([game.profile({'r': ['A', 'A', 'B']})], 1)


def test_seeds_reproducible_from_master_seed():
    runs = []
    for _ in range(2):
        game = sym_game()
        oracle = CountingOracle()
        Scheduler(game, oracle, master_seed=11, workers=1).schedule_subgame(
            game.strategy_sets, 2)
        runs.append(oracle.seeds)
    assert runs[0] == runs[1]
    assert len(set(runs[0])) == len(runs[0])
    game = sym_game()
    other = CountingOracle()
    Scheduler(game, other, master_seed=12, workers=1).schedule_subgame(
        game.strategy_sets, 2)
    assert other.seeds != runs[0]


def test_run_limit_raises_before_simulating():
    game = sym_game()
    oracle = CountingOracle()
    sched = Scheduler(game, oracle, workers=1)
    sched.run_limit = 5
    with pytest.raises(BudgetExhausted):
        sched.schedule_subgame(game.strategy_sets, 2)
    assert sum(oracle.calls.values()) == 0


def test_replayed_log_resumes_pending_request(tmp_path):
    path = str(tmp_path / 'payoffs.jsonl')
    game = sym_game()
    game.payoffs.path = path
    sched = Scheduler(game, CountingOracle(), workers=1)
    sched.schedule_subgame(game.strategy_sets, 2)
    # a restarted process sees the same counts and only fills the deficit
    fresh = sym_game()
    fresh.payoffs.load(path)
    fresh.payoffs.path = path
    again = Scheduler(fresh, CountingOracle(), workers=1)
    assert again.schedule_subgame(fresh.strategy_sets, 2) == 0
    assert again.schedule_subgame(fresh.strategy_sets, 3) == 4
    final = sym_game()
    final.payoffs.load(path)
    assert all(final.count(p) == 3 for p in final.all_profiles())


def test_parallel_pool_matches_serial():
    results = []
    for workers in (1, 2):
        game = sym_game()
        with Scheduler(game, CountingOracle(), master_seed=3,
                       workers=workers) as sched:
            sched.schedule_subgame(game.strategy_sets, 3)
        results.append({p.id: list(game.payoffs.mean(p))
                        for p in game.all_profiles()})
    assert results[0] == results[1]


def test_coverage_counts():
    game = sym_game()
    sched = Scheduler(game, CountingOracle(), workers=1)
    sched.top_up([game.profile({'r': ['A', 'A', 'A']})], 2)
    cov = coverage(game)
    assert cov['profiles_evaluated'] == 1
    assert cov['profile_space'] == 4
    assert cov['coverage_pct'] == 25.0
    assert cov['min_samples'] == cov['max_samples'] == 2
