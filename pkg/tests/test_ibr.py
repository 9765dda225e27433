import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compliance_egta.errors import ConfigurationError
from compliance_egta.game import EmpiricalGame
from compliance_egta.ibr import (NetworkConfig, PayoffWeights, PolicyParams,
                                 SEED_POLICIES, build_topology, load_scenario,
                                 node_payoff, run_simulation,
                                 uniform_policies)
from compliance_egta.ibr.network import CLIENT, ISP, ROOT, SERVER
from compliance_egta.ibr.oracle import IBROracle, Scenario
from compliance_egta.ibr.policy import DOMAINS, seed_strategy
from compliance_egta.ibr.sim import Simulation, node_names

DESK = dict(N_R=3, N_I=4, c_per_isp=5, horizon=2000)


def desk(**kw):
    return NetworkConfig(**dict(DESK, **kw))


# topology


def test_env2_node_count():
    cfg = load_scenario('env2').network
    assert (cfg.N_R, cfg.N_I, cfg.N_C, cfg.N_S) == (3, 18, 594, 18)
    assert cfg.num_nodes == 633


def test_env1_node_count():
    assert load_scenario('env1').network.num_nodes == 4956


def test_env3_node_count():
    assert load_scenario('env3').network.num_nodes == 2045


def test_minimal_topology():
    cfg = NetworkConfig(N_R=2, N_I=1, c_per_isp=1)
    topo = build_topology(cfg)
    assert cfg.num_nodes == len(topo.names) == 5
    isp = topo.by_kind(ISP)[0]
    assert set(topo.by_kind(ROOT)) <= set(topo.neighbors(isp))


def test_too_few_roots():
    with pytest.raises(ConfigurationError):
        build_topology(NetworkConfig(N_R=1, N_I=1, c_per_isp=1))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(1, 6), st.integers(1, 4),
       st.integers(0, 3), st.integers(0, 100))
def test_topology_shape(n_r, n_i, c, n_a, seed):
    cfg = NetworkConfig(N_R=n_r, N_I=n_i, c_per_isp=c, n_a=n_a, seed=seed)
    topo = build_topology(cfg)
    roots = topo.by_kind(ROOT)
    for i, a in enumerate(roots):
        for b in roots[i + 1:]:
            assert (a, b) in topo.edges
    for isp in topo.by_kind(ISP):
        ups = [n for n in topo.neighbors(isp) if n in roots]
        assert len(ups) == 2
    for leaf in topo.by_kind(CLIENT) + topo.by_kind(SERVER):
        assert len(topo.neighbors(leaf)) == 1
    for a in topo.by_kind(CLIENT):
        for b in topo.by_kind(SERVER):
            assert 1 <= len(topo.chain(a, b)) <= 4


# payoffs


def test_zero_counters_pay_nothing():
    assert node_payoff({}) == 0


def test_single_term_arithmetic():
    w = PayoffWeights(v_msg=100)
    assert node_payoff({'delivered': 10}, w) == 1000


@pytest.mark.parametrize('s', [0, 1, 7])
def test_attack_penalty(s):
    w = PayoffWeights(p_attack=5000)
    assert node_payoff({'attacks_against': s}, w) == -5000 * s


# policies


def test_policy_params_respect_domains():
    with pytest.raises(ConfigurationError):
        PolicyParams.from_vector([2.0] + [0.0] * 6)
    vec = SEED_POLICIES['C'].as_vector()
    assert PolicyParams.from_vector(vec) == SEED_POLICIES['C']
    assert len(DOMAINS) == len(PolicyParams.names())


def test_seed_strategy_labels():
    s = seed_strategy('client', 'N')
    assert s.label == 'N'
    assert s.params == SEED_POLICIES['N'].as_vector()


# simulation


def test_missing_policy_names_role():
    cfg = desk()
    pols = uniform_policies(cfg, SEED_POLICIES['C'])
    for name in node_names(cfg)['isp']:
        del pols[name]
    with pytest.raises(ConfigurationError, match='isp'):
        run_simulation(cfg, pols, seed=1)


def test_payoffs_cover_non_attacking_nodes():
    cfg = desk(n_a=2, n_ra=1)
    res = run_simulation(cfg, uniform_policies(cfg, SEED_POLICIES['C']), 3)
    assert len(res.payoffs) == cfg.num_nodes
    assert not any(n.startswith('attacker') for n in res.payoffs)


def test_replay_is_bit_identical():
    cfg = desk(n_a=4, n_ra=1, attack_targets='clients-and-servers')
    pols = uniform_policies(cfg, SEED_POLICIES['C'])
    a = run_simulation(cfg, pols, seed=9)
    b = run_simulation(cfg, pols, seed=9)
    assert a.to_json() == b.to_json()
    c = run_simulation(cfg, pols, seed=10)
    assert c.trace_digest != a.trace_digest


def test_invariants_hold_with_audit():
    cfg = desk(n_a=4, n_ra=1, attack_targets='clients-and-servers')
    for pol in ('C', 'N'):
        res = run_simulation(cfg, uniform_policies(cfg, SEED_POLICIES[pol]),
                             seed=4, audit=True)
        res.check_invariants()
        assert res.audit['asymmetries'] == 0
        assert res.aggregate['attacks_attempted'] > 0


def test_no_adversaries_everything_delivered():
    cfg = desk(probabilities={'false_positive': 0.0})
    res = run_simulation(cfg, uniform_policies(cfg, SEED_POLICIES['C']), 2)
    agg = res.aggregate
    assert agg['attacks_attempted'] == 0
    gen = sum(s['generated'] for s in res.stats.values())
    deliv = sum(s['delivered'] for s in res.stats.values())
    assert gen > 0 and deliv == gen


def test_reputation_attackers_target_servers():
    cfg = desk(n_ra=6, attack_targets='clients-and-servers')
    sim = Simulation(cfg, uniform_policies(cfg, SEED_POLICIES['C']), seed=0)
    servers = set(sim.servers)
    for node in sim.nodes:
        if node.name.startswith('rep_attacker'):
            assert node.target in servers


def test_reputations_stay_in_bounds_after_run():
    cfg = desk(n_a=4, n_ra=2, attack_targets='clients-and-servers')
    sim = Simulation(cfg, uniform_policies(cfg, SEED_POLICIES["C'"]), seed=5)
    sim.run()
    lo, hi = cfg.rep_bounds
    for node in sim.nodes:
        assert all(lo <= v <= hi for v in node.rep.values())


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), max_size=40),
       st.floats(-1, 0), st.floats(0.1, 2))
def test_reputation_bounded_under_any_feedback(amounts, lo, width):
    hi = lo + width
    cfg = NetworkConfig(N_R=2, N_I=1, c_per_isp=1, rep_bounds=(lo, hi),
                        initial_reputation=lo)
    sim = Simulation(cfg, uniform_policies(cfg, SEED_POLICIES['C']))
    node = sim.nodes[0]
    for amt in amounts:
        sim._bump(node, 1, amt)
        assert lo <= node.rep[1] <= hi


def test_per_node_streams_isolate_policy_changes():
    # one ISP switching policy leaves other nodes' rng streams untouched
    cfg = desk()
    base = uniform_policies(cfg, SEED_POLICIES['C'])
    alt = dict(base, isp0=SEED_POLICIES['N'])
    a = Simulation(cfg, base, seed=1)
    b = Simulation(cfg, alt, seed=1)
    draws = [(x.rng.random(), y.rng.random()) for x, y in zip(a.nodes,
                                                              b.nodes)]
    assert all(u == v for u, v in draws)


def test_oracle_reduces_to_player_payoffs():
    scen = load_scenario('desk')
    strats = [seed_strategy(r.name, 'C') for r in scen.roles()]
    game = EmpiricalGame(scen.roles(), strats)
    oracle = IBROracle(scen, game.catalog)
    ids = {s.role: s.id for s in strats}
    prof = game.profile({r.name: [ids[r.name]] * r.player_count
                         for r in scen.roles()})
    pays = oracle(prof, 3)
    assert len(pays) == sum(r.player_count for r in scen.roles())
    res = oracle.simulate(prof, 3)
    clients = [v for k, v in res.payoffs.items() if k.startswith('client')]
    # single strategy per role, so the player mean equals the node mean
    n_client = scen.roles()[0].player_count
    assert math.isclose(sum(pays[:n_client]) / n_client,
                        sum(clients) / len(clients))


def test_scenario_json_roundtrip():
    scen = load_scenario('env2')
    back = Scenario.from_json(scen.to_json())
    assert back.network == scen.network
    assert back.players == scen.players
