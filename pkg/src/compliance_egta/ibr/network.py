"""Network scenarios and the redundant-tree topology"""
import hashlib
import random
from dataclasses import asdict, dataclass, field

from compliance_egta.errors import ConfigurationError

ROOT, ISP, CLIENT, SERVER, ATTACKER, REP_ATTACKER = range(6)
KIND_NAMES = ('root', 'isp', 'client', 'server', 'attacker', 'rep_attacker')
TARGET_MODES = ('servers-only', 'clients-and-servers')

DEFAULT_PROBS = {'attack': 0.05, 'detect': 0.9, 'success_undetected': 0.3,
                 'false_positive': 0.001}


@dataclass(frozen=True)
class NetworkConfig:
    """Scenario shape and fixed environment behavior

    ``message_latency`` and ``intro_latency`` (per introducer) are the time
    a client spends on each send, on top of its sleep; they set the message
    volume per run. ``calibration`` records the intended messages-per-client
    value and its accepted band.
    """
    N_R: int
    N_I: int
    c_per_isp: int
    n_a: int = 0
    n_ra: int = 0
    horizon: int = 10000
    attack_targets: str = 'servers-only'
    probabilities: dict = field(default_factory=lambda: dict(DEFAULT_PROBS))
    sleep_max: int = 39
    attacker_sleep_max: int = 9
    message_latency: int = 10
    intro_latency: int = 2
    inherit_factor: float = 0.6
    rep_bounds: tuple = (0.0, 1.0)
    initial_reputation: float = 1.0
    calibration: dict = field(default_factory=lambda: {
        'messages_per_client': 330, 'band': [250, 450]})
    seed: int = 0

    def __post_init__(self):
        if self.N_R < 2:
            raise ConfigurationError(
                'need at least two root introducers, got N_R={}'.format(
                    self.N_R))
        if self.N_I < 1 or self.c_per_isp < 0:
            raise ConfigurationError('need N_I >= 1 and c_per_isp >= 0')
        if self.n_a < 0 or self.n_ra < 0:
            raise ConfigurationError('attacker counts must be nonnegative')
        if self.horizon < 0:
            raise ConfigurationError('horizon must be nonnegative')
        if self.attack_targets not in TARGET_MODES:
            raise ConfigurationError('attack_targets must be one of {}'.format(
                TARGET_MODES))
        probs = dict(DEFAULT_PROBS, **self.probabilities)
        for key, val in probs.items():
            if not 0 <= val <= 1:
                raise ConfigurationError('probability {} out of range'.format(
                    key))
        object.__setattr__(self, 'probabilities', probs)
        object.__setattr__(self, 'rep_bounds', tuple(self.rep_bounds))
        lo, hi = self.rep_bounds
        if not lo <= self.initial_reputation <= hi:
            raise ConfigurationError('initial reputation outside bounds')

    @property
    def N_C(self):
        return self.c_per_isp * self.N_I

    @property
    def N_S(self):
        return self.N_I

    @property
    def num_nodes(self):
        """Non-attacking nodes"""
        return self.N_R + self.N_I + self.N_C + self.N_S

    def node_counts(self):
        return {'client': self.N_C, 'isp': self.N_I, 'root': self.N_R,
                'server': self.N_S}

    def to_json(self):
        res = asdict(self)
        res['rep_bounds'] = list(self.rep_bounds)
        return res

    @classmethod
    def from_json(cls, data):
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError('bad network config: {}'.format(exc))


def stream_seed(seed, name):
    """Stable 64-bit seed for a named random stream"""
    digest = hashlib.blake2b('{}:{}'.format(seed, name).encode(),
                             digest_size=8).digest()
    return int.from_bytes(digest, 'little')


@dataclass
class Topology:
    names: list
    kinds: list
    # leaf (client, server, attacker) -> its ISP
    isp_of: dict
    # ISP -> sorted pair of roots
    roots_of: dict
    edges: set

    def by_kind(self, kind):
        return [i for i, k in enumerate(self.kinds) if k == kind]

    def neighbors(self, node):
        return sorted({b for a, b in self.edges if a == node}
                      | {a for a, b in self.edges if b == node})

    def isp_chain(self, a, b):
        """Introducers between ISPs ``a`` and ``b`` along the tree"""
        if a == b:
            return (a,)
        shared = sorted(set(self.roots_of[a]) & set(self.roots_of[b]))
        if shared:
            return (a, shared[0], b)
        return (a, self.roots_of[a][0], self.roots_of[b][0], b)

    def chain(self, src, dst):
        """Introducers needed for a connection between two leaves"""
        return self.isp_chain(self.isp_of[src], self.isp_of[dst])


def build_topology(config, rng=None):
    """A priori connections of the redundant tree

    Nodes are numbered roots, ISPs, clients, servers, attackers, then
    reputation attackers. Client ``j`` of ISP ``i`` has number
    ``N_R + N_I + i * c_per_isp + j``.
    """
    if config.N_R < 2:
        raise ConfigurationError('need at least two root introducers')
    rng = rng or random.Random(stream_seed(config.seed, 'topology'))
    names, kinds = [], []

    def add(kind, count):
        start = len(names)
        for i in range(count):
            names.append('{}{}'.format(KIND_NAMES[kind], i))
            kinds.append(kind)
        return list(range(start, start + count))

    roots = add(ROOT, config.N_R)
    isps = add(ISP, config.N_I)
    clients = add(CLIENT, config.N_C)
    servers = add(SERVER, config.N_S)
    attackers = add(ATTACKER, config.n_a)
    rep_attackers = add(REP_ATTACKER, config.n_ra)

    edges = set()
    for i, a in enumerate(roots):
        for b in roots[i + 1:]:
            edges.add((a, b))
    roots_of = {}
    for isp in isps:
        pair = tuple(sorted(rng.sample(roots, 2)))
        roots_of[isp] = pair
        edges.update((r, isp) for r in pair)
    isp_of = {}
    for i, isp in enumerate(isps):
        for c in clients[i * config.c_per_isp:(i + 1) * config.c_per_isp]:
            isp_of[c] = isp
        isp_of[servers[i]] = isp
    for node in attackers + rep_attackers:
        isp_of[node] = rng.choice(isps)
    for leaf, isp in isp_of.items():
        edges.add((isp, leaf))
    return Topology(names, kinds, isp_of, roots_of, edges)
