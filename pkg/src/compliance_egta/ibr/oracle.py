"""Scenarios and the simulation-backed payoff oracle"""
import json
from dataclasses import dataclass, field
from importlib import resources

from compliance_egta.errors import ConfigurationError
from compliance_egta.exploration import ComplianceSpec
from compliance_egta.game import (RoleSpec, make_reduction, reduced_payoff)
from compliance_egta.ibr.network import NetworkConfig
from compliance_egta.ibr.policy import ROLES, PolicyParams, ibr_compliance_spec
from compliance_egta.ibr.sim import PayoffWeights, node_names, run_simulation

BUNDLED = ('env1', 'env2', 'env3', 'desk')


@dataclass
class Scenario:
    network: NetworkConfig
    players: dict
    weights: PayoffWeights = field(default_factory=PayoffWeights)
    compliance: ComplianceSpec = field(default_factory=ibr_compliance_spec)
    name: str = ''

    def __post_init__(self):
        unknown = set(self.players) - set(ROLES)
        if unknown:
            raise ConfigurationError('unknown roles: {}'.format(
                ', '.join(sorted(unknown))))
        missing = set(ROLES) - set(self.players)
        if missing:
            raise ConfigurationError('no player count for role(s): {}'.format(
                ', '.join(sorted(missing))))

    def roles(self):
        counts = self.network.node_counts()
        return [RoleSpec(r, self.players[r], counts[r]) for r in ROLES]

    def reduction(self):
        return make_reduction(self.network.node_counts(), self.players,
                              node_names(self.network))

    def to_json(self):
        return {'name': self.name, 'network': self.network.to_json(),
                'players': dict(self.players),
                'payoff_weights': self.weights.to_json(),
                'compliance': self.compliance.to_json()}

    @classmethod
    def from_json(cls, data):
        try:
            network = NetworkConfig.from_json(data['network'])
            players = data['players']
        except KeyError as exc:
            raise ConfigurationError('scenario lacks {}'.format(exc))
        try:
            weights = PayoffWeights(**data.get('payoff_weights', {}))
        except TypeError as exc:
            raise ConfigurationError('bad payoff weights: {}'.format(exc))
        comp = data.get('compliance')
        comp = (ComplianceSpec.from_json(comp) if comp
                else ibr_compliance_spec())
        return cls(network, players, weights, comp, data.get('name', ''))


def load_scenario(source):
    """Scenario from a bundled name, a file path, or a dict"""
    if isinstance(source, dict):
        return Scenario.from_json(source)
    if source in BUNDLED:
        text = resources.files('compliance_egta.ibr').joinpath(
            'scenarios', source + '.json').read_text()
    else:
        with open(source) as f:
            text = f.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError('{}: line {}: {}'.format(
            source, exc.lineno, exc.msg))
    return Scenario.from_json(data)


class IBROracle:
    """Payoffs of a reduced-game profile from one IBR simulation

    Every node of a player's group plays that player's policy, and the
    player receives the group's mean payoff. ``catalog`` maps role and
    strategy id to strategies whose params are policy vectors; it is read at
    call time so strategies added later are visible.
    """

    def __init__(self, scenario, catalog):
        self.scenario = scenario
        self.catalog = catalog
        self.reduction = scenario.reduction()

    def policies(self, profile):
        result = {}
        for role, strats in zip(profile.roles, profile.strategies):
            groups = self.reduction.groups[role]
            if len(groups) != len(strats):
                raise ConfigurationError(
                    'role {} has {} players, profile gives {}'.format(
                        role, len(groups), len(strats)))
            for group, sid in zip(groups, strats):
                pol = PolicyParams.from_vector(self.catalog[role][sid].params)
                for node in group:
                    result[node] = pol
        return result

    def simulate(self, profile, seed):
        return run_simulation(self.scenario.network, self.policies(profile),
                              seed, self.scenario.weights)

    def __call__(self, profile, seed):
        res = self.simulate(profile, seed)
        per_role = reduced_payoff(res.payoffs, self.reduction)
        return [v for role in profile.roles for v in per_role[role]]
