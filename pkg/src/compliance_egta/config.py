"""Run configuration files

Configs are JSON. Any object of the form ``{"$include": "path"}`` is
replaced by the parsed contents of that file (relative to the including
file), and the ``scenario`` and ``compliance`` keys also accept a bare
path. Environment variables named ``CEGTA_<KEY>`` override config keys;
nested keys are joined with double underscores, so ``CEGTA_INNER__TAU=50``
sets ``inner.tau``. Override values are parsed as JSON when possible.
"""
import copy
import hashlib
import importlib
import json
import os
from dataclasses import dataclass, field

from compliance_egta.errors import ConfigurationError

ENV_PREFIX = 'CEGTA_'
INCLUDE = '$include'
PATH_KEYS = ('scenario', 'compliance')

DEFAULTS = {
    'scenario': None,
    'game': None,
    'seed_strategies': {},
    'compliance': None,
    'inner': {'tau': None, 'tau_fraction': None, 'minsamp': 40,
              'mincsamp': 80, 'max_profile_budget': 50000, 'restarts': 20,
              'max_iters': 10000},
    'outer': {'m': 5, 'm_prime': 2, 'minsamp': 15, 'mincsamp': 40,
              'weights': 'player', 'role_rotation': None},
    'budgets': {'iterations': None, 'wall_clock': None},
    'output_dir': 'results',
    'master_seed': 0,
    'workers': None,
}


def read_json(path):
    """Parse a JSON file, reporting the line of any syntax error"""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigurationError('cannot read {}: {}'.format(
            path, exc.strerror))
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError('{}: line {} column {}: {}'.format(
            path, exc.lineno, exc.colno, exc.msg))


def resolve_includes(data, base_dir, _stack=()):
    if isinstance(data, dict):
        if set(data) == {INCLUDE}:
            path = os.path.join(base_dir, data[INCLUDE])
            real = os.path.realpath(path)
            if real in _stack:
                raise ConfigurationError('include cycle at {}'.format(path))
            return resolve_includes(read_json(path), os.path.dirname(path),
                                    _stack + (real,))
        return {k: resolve_includes(v, base_dir, _stack)
                for k, v in data.items()}
    if isinstance(data, list):
        return [resolve_includes(v, base_dir, _stack) for v in data]
    return data


def _parse_env_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_env_overrides(data, environ=None):
    environ = os.environ if environ is None else environ
    data = copy.deepcopy(data)
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX):].lower().split('__')
        node = data
        for key in path[:-1]:
            if not isinstance(node.get(key), dict):
                node[key] = {}
            node = node[key]
        node[path[-1]] = _parse_env_value(environ[name])
    return data


def _merge(defaults, data):
    out = copy.deepcopy(defaults)
    for key, val in data.items():
        if isinstance(out.get(key), dict) and isinstance(val, dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def config_hash(data):
    text = json.dumps(data, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class RunConfig:
    data: dict
    base_dir: str = '.'
    source: str = None
    scenario: object = field(default=None, repr=False)

    @classmethod
    def load(cls, path, environ=None):
        raw = read_json(path)
        return cls.from_dict(raw, os.path.dirname(os.path.abspath(path)),
                             path, environ)

    @classmethod
    def from_dict(cls, raw, base_dir='.', source=None, environ=None):
        if not isinstance(raw, dict):
            raise ConfigurationError('config must be a JSON object')
        data = resolve_includes(raw, base_dir)
        for key in PATH_KEYS:
            val = data.get(key)
            if isinstance(val, str) and val.endswith('.json'):
                data[key] = resolve_includes(
                    {INCLUDE: val}, base_dir)
        data = apply_env_overrides(_merge(DEFAULTS, data), environ)
        cfg = cls(data, base_dir, source)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.data[key]

    @property
    def hash(self):
        return config_hash(self.data)

    def validate(self):
        data = self.data
        if (data['scenario'] is None) == (data['game'] is None):
            raise ConfigurationError(
                'config needs exactly one of "scenario" or "game"')
        if data['scenario'] is not None:
            from compliance_egta.ibr.oracle import load_scenario
            self.scenario = load_scenario(data['scenario'])
        elif 'oracle' not in data['game'] or 'roles' not in data['game']:
            raise ConfigurationError('"game" needs "roles" and "oracle"')
        for key, val in data['budgets'].items():
            if val is not None and not val >= 0:
                raise ConfigurationError(
                    'budget {} must be nonnegative'.format(key))
        inner = data['inner']
        if inner['tau'] is None and inner['tau_fraction'] is None:
            raise ConfigurationError('set inner.tau or inner.tau_fraction')
        if not data['seed_strategies']:
            raise ConfigurationError('no seed strategies given')
        if data['game'] is not None and data['compliance'] is None:
            raise ConfigurationError('synthetic games need a compliance spec')
        int(data['master_seed'])

    # builders

    def roles(self):
        from compliance_egta.game import RoleSpec
        if self.scenario is not None:
            return self.scenario.roles()
        return [RoleSpec(r['name'], r['player_count'], r.get('node_count'),
                         r.get('weight_overrides', {}))
                for r in self.data['game']['roles']]

    def compliance_spec(self):
        from compliance_egta.exploration import ComplianceSpec
        comp = self.data['compliance']
        if comp is not None:
            return ComplianceSpec.from_json(comp)
        return self.scenario.compliance

    def seed_strategies(self):
        from compliance_egta.game import Strategy
        from compliance_egta.ibr.policy import seed_strategy
        result = []
        for role, entries in self.data['seed_strategies'].items():
            for entry in entries:
                if isinstance(entry, str):
                    result.append(seed_strategy(role, entry))
                else:
                    result.append(Strategy.from_params(
                        role, entry['params'], entry.get('label', '')))
        return result

    def make_oracle(self, game):
        if self.scenario is not None:
            from compliance_egta.ibr.oracle import IBROracle
            return IBROracle(self.scenario, game.catalog)
        factory = load_callable(self.data['game']['oracle'])
        return factory(game, **self.data['game'].get('oracle_args', {}))


def load_callable(spec):
    """Import ``package.module:attribute``"""
    mod, _, attr = spec.partition(':')
    try:
        return getattr(importlib.import_module(mod), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigurationError('cannot load {}: {}'.format(spec, exc))
