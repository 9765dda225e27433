"""Discrete-event simulation of introduction-based routing

Time is integral. Clients, attackers, and reputation attackers wake up in
(time, node number) order; each activation does all of that node's work
for one message and returns the time it spends before waking again, so the
event queue never holds more than one entry per active node.

Connections beyond the a priori tree are set up through a chain of
introducers. Each introducer checks its reputation of both endpoints
against its make threshold, and the acceptor checks the requester's
reputation, or a discounted copy of its reputation of the last introducer
for strangers, against its accept threshold. Misbehavior reports travel
back along the chain, scaled at each hop by the reporter's propagation
weight and by the recipient's trust in whoever handed the report on.
"""
import hashlib
import heapq
import random
from dataclasses import dataclass, field

from compliance_egta.errors import ConfigurationError
from compliance_egta.ibr.network import (ATTACKER, CLIENT, REP_ATTACKER,
                                         SERVER, build_topology, stream_seed)

STAT_FIELDS = ('generated', 'delivered', 'received_legit', 'attacks_against',
               'connection_time', 'introductions', 'relayed',
               'connections_made', 'connections_closed')


@dataclass(frozen=True)
class PayoffWeights:
    v_msg: float = 3000.0
    v_recv: float = 100.0
    v_relay: float = 2.0
    p_attack: float = 20000.0
    c_conn: float = 0.01
    c_intro: float = 1.0

    def to_json(self):
        return dict(self.__dict__)


def node_payoff(stats, weights=PayoffWeights()):
    """Payoff of one node from its counters"""
    get = stats.get
    return (weights.v_msg * get('delivered', 0)
            + weights.v_recv * get('received_legit', 0)
            + weights.v_relay * get('relayed', 0)
            - weights.p_attack * get('attacks_against', 0)
            - weights.c_conn * get('connection_time', 0)
            - weights.c_intro * get('introductions', 0))


class NodeState:
    __slots__ = ('name', 'kind', 'policy', 'rng', 'rep', 'conns', 'target') \
        + STAT_FIELDS

    def __init__(self, name, kind, policy, rng):
        self.name = name
        self.kind = kind
        self.policy = policy
        self.rng = rng
        # node number -> summary reputation
        self.rep = {}
        # peer -> (introducer chain, start time)
        self.conns = {}
        self.target = None
        for f in STAT_FIELDS:
            setattr(self, f, 0)

    def stats(self):
        return {f: getattr(self, f) for f in STAT_FIELDS}


@dataclass
class SimResult:
    payoffs: dict
    stats: dict
    aggregate: dict
    trace_digest: str = ''
    audit: dict = field(default_factory=dict)

    def to_json(self):
        return {'payoffs': self.payoffs, 'stats': self.stats,
                'aggregate': self.aggregate,
                'trace_digest': self.trace_digest, 'audit': self.audit}

    def check_invariants(self):
        """Raise AssertionError if a conservation law is broken"""
        agg = self.aggregate
        assert agg['attacks_attempted'] == (agg['attacks_detected']
                                            + agg['attacks_undetected'])
        assert agg['attacks_succeeded'] <= agg['attacks_undetected']
        assert agg['attacks_succeeded'] == sum(
            s['attacks_against'] for s in self.stats.values())
        if self.audit:
            assert self.audit['asymmetries'] == 0
            lo, hi = self.audit['chain_lengths']
            assert lo == 0 or 1 <= lo <= hi <= 4


class Simulation:
    def __init__(self, config, policies, seed=None, weights=None,
                 audit=False):
        self.config = config
        self.seed = config.seed if seed is None else seed
        self.weights = weights or PayoffWeights()
        self.topo = build_topology(config)
        self.audit = audit
        probs = config.probabilities
        self.p_attack = probs['attack']
        self.p_detect = probs['detect']
        self.p_success = probs['success_undetected']
        self.p_fp = probs['false_positive']
        self.lo, self.hi = config.rep_bounds
        self.init_rep = config.initial_reputation
        self.nodes = []
        missing = []
        for i, (name, kind) in enumerate(zip(self.topo.names,
                                             self.topo.kinds)):
            pol = None
            if kind not in (ATTACKER, REP_ATTACKER):
                pol = policies.get(name)
                if pol is None:
                    missing.append(name)
            rng = random.Random(stream_seed(self.seed, name))
            self.nodes.append(NodeState(name, kind, pol, rng))
        if missing:
            roles = sorted({n.rstrip('0123456789') for n in missing})
            raise ConfigurationError('no policy assigned for {} node(s) of '
                                     'role(s) {}'.format(len(missing),
                                                         ', '.join(roles)))
        self.servers = self.topo.by_kind(SERVER)
        self.clients = self.topo.by_kind(CLIENT)
        targets = list(self.servers)
        if config.attack_targets == 'clients-and-servers':
            targets = sorted(targets + self.clients)
        for n in self.nodes:
            # reputation attacks always go after servers
            pool = targets if n.kind == ATTACKER else self.servers
            if n.kind in (ATTACKER, REP_ATTACKER) and pool:
                n.target = n.rng.choice(pool)
        self.agg = dict.fromkeys(
            ('messages_sent', 'attacks_attempted', 'attacks_detected',
             'attacks_undetected', 'attacks_succeeded', 'false_positives',
             'false_reports', 'introductions_failed'), 0)
        self.chain_lengths = [0, 0]
        self.asymmetries = 0
        self._digest = hashlib.blake2b(digest_size=16)

    # reputation helpers

    def _bump(self, node, other, amount):
        rep = node.rep
        val = rep.get(other, self.init_rep) + amount
        rep[other] = self.lo if val < self.lo else (
            self.hi if val > self.hi else val)

    # connections

    def _open(self, a, b, chain, now):
        self.nodes[a].conns[b] = (chain, now)
        self.nodes[b].conns[a] = (chain, now)
        self.nodes[a].connections_made += 1
        self.nodes[b].connections_made += 1
        n = len(chain)
        lo, hi = self.chain_lengths
        self.chain_lengths = [n if lo == 0 else min(lo, n), max(hi, n)]

    def _close(self, a, b, now):
        na, nb = self.nodes[a], self.nodes[b]
        _, start = na.conns.pop(b)
        nb.conns.pop(a)
        na.connection_time += now - start
        nb.connection_time += now - start
        na.connections_closed += 1
        nb.connections_closed += 1

    def _introduce(self, src, dst, chain, now):
        nodes = self.nodes
        for k in chain:
            node = nodes[k]
            thresh = node.policy.intro_make_threshold
            rep = node.rep
            if (rep.get(src, self.init_rep) < thresh
                    or rep.get(dst, self.init_rep) < thresh):
                self.agg['introductions_failed'] += 1
                return None
            node.introductions += 1
        acceptor = nodes[dst]
        rep = acceptor.rep
        if src in rep:
            trust = rep[src]
        else:
            trust = self.config.inherit_factor * rep.get(chain[-1],
                                                         self.init_rep)
        if trust < acceptor.policy.intro_accept_threshold:
            self.agg['introductions_failed'] += 1
            return None
        rep.setdefault(src, trust)
        self._open(src, dst, chain, now)
        return chain

    # feedback

    def _report(self, chain, subject, reporter, strength):
        """Pass a misbehavior report about ``subject`` down ``chain``"""
        nodes = self.nodes
        for k in chain:
            if strength <= 0:
                break
            node = nodes[k]
            pol = node.policy
            amount = (pol.rep_decrement_report * strength
                      * node.rep.get(reporter, self.init_rep))
            if amount:
                self._bump(node, subject, -amount)
            strength *= pol.report_propagation_weight
            reporter = k

    def _negative(self, dst, src, chain, now):
        node = self.nodes[dst]
        pol = node.policy
        self._bump(node, src, -pol.rep_decrement_negative)
        self._bump(node, chain[-1], -pol.rep_decrement_report)
        self._report(chain[::-1], src, dst, pol.report_propagation_weight)
        if node.rep[src] < pol.connection_terminate_threshold:
            self._close(dst, src, now)

    def _positive(self, dst, src, chain):
        nodes = self.nodes
        node = nodes[dst]
        inc = node.policy.rep_increment_positive
        if inc:
            self._bump(node, src, inc)
            self._bump(node, chain[-1], inc)
        for k in chain:
            inter = nodes[k]
            inter.relayed += 1
            inc = inter.policy.rep_increment_positive
            if inc:
                self._bump(inter, src, inc)
                self._bump(inter, dst, inc)

    # activations

    def _send(self, n, node, dst, now, attack):
        conn = node.conns.get(dst)
        cost = 0
        if conn is None:
            chain = self.topo.chain(n, dst)
            cost = self.config.intro_latency * len(chain)
            if self._introduce(n, dst, chain, now) is None:
                return cost
        else:
            chain = conn[0]
        agg = self.agg
        agg['messages_sent'] += 1
        target = self.nodes[dst]
        rng = target.rng
        if attack:
            agg['attacks_attempted'] += 1
            if rng.random() < self.p_detect:
                agg['attacks_detected'] += 1
                self._negative(dst, n, chain, now)
            else:
                agg['attacks_undetected'] += 1
                if rng.random() < self.p_success:
                    agg['attacks_succeeded'] += 1
                    target.attacks_against += 1
            return cost
        node.delivered += 1
        if rng.random() < self.p_fp:
            agg['false_positives'] += 1
            self._negative(dst, n, chain, now)
            return cost
        target.received_legit += 1
        self._positive(dst, n, chain)
        return cost

    def _activate(self, n, now):
        node = self.nodes[n]
        rng = node.rng
        cfg = self.config
        kind = node.kind
        if kind == CLIENT:
            node.generated += 1
            dst = self.servers[rng.randrange(len(self.servers))]
            sleep = rng.randint(0, cfg.sleep_max)
            return cfg.message_latency + sleep + self._send(
                n, node, dst, now, False)
        if kind == ATTACKER:
            node.generated += 1
            attack = rng.random() < self.p_attack
            sleep = rng.randint(0, cfg.attacker_sleep_max)
            return cfg.message_latency + sleep + self._send(
                n, node, node.target, now, attack)
        # reputation attacker: false report about its target
        self.agg['false_reports'] += 1
        chain = self.topo.chain(n, node.target)
        self._report(chain, node.target, n, 1.0)
        return cfg.message_latency + rng.randint(0, cfg.sleep_max)

    def _check_symmetry(self):
        for i, node in enumerate(self.nodes):
            for peer in node.conns:
                if i not in self.nodes[peer].conns:
                    self.asymmetries += 1

    def run(self):
        horizon = self.config.horizon
        heap = []
        for i, node in enumerate(self.nodes):
            if node.target is not None or node.kind == CLIENT:
                if node.kind == CLIENT and not self.servers:
                    continue
                heap.append((node.rng.randint(0, self.config.sleep_max), i))
        heapq.heapify(heap)
        digest = self._digest
        while heap:
            now, n = heapq.heappop(heap)
            if now >= horizon:
                break
            delay = self._activate(n, now)
            digest.update(b'%d:%d:%d;' % (now, n, delay))
            if self.audit:
                self._check_symmetry()
            heapq.heappush(heap, (now + max(1, delay), n))
        for i, node in enumerate(self.nodes):
            for peer in sorted(node.conns):
                if peer > i:
                    self._close(i, peer, horizon)
        return self._result()

    def _result(self):
        payoffs, stats = {}, {}
        for node in self.nodes:
            if node.policy is None:
                continue
            st = node.stats()
            stats[node.name] = st
            payoffs[node.name] = node_payoff(st, self.weights)
        attacker_stats = {n.name: n.stats() for n in self.nodes
                          if n.policy is None}
        agg = dict(self.agg)
        agg['messages_generated'] = sum(
            self.nodes[c].generated for c in self.clients)
        agg['attacker_stats'] = attacker_stats
        audit = {}
        if self.audit:
            audit = {'asymmetries': self.asymmetries,
                     'chain_lengths': list(self.chain_lengths)}
        return SimResult(payoffs, stats, agg, self._digest.hexdigest(), audit)


def run_simulation(config, policies, seed=None, weights=None, audit=False):
    """Simulate one scenario

    ``policies`` maps every non-attacking node name (``root0``, ``isp3``,
    ``client12``, ``server2``...) to its :class:`PolicyParams`.
    With ``audit`` the run also checks connection symmetry after every event.
    """
    return Simulation(config, policies, seed, weights, audit).run()


def node_names(config):
    """role -> node names, in node-number order"""
    counts = config.node_counts()
    return {role: ['{}{}'.format(role, i) for i in range(n)]
            for role, n in counts.items()}


def uniform_policies(config, policy):
    return {name: policy for names in node_names(config).values()
            for name in names}

