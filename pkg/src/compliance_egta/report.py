"""Report assembly, schema validation, and run manifests"""
import json
import math
import platform
import sys
from importlib import metadata, resources

import jsonschema
import numpy as np

from compliance_egta import exploration
from compliance_egta.config import config_hash
from compliance_egta.scheduler import coverage


def schema(name):
    text = resources.files('compliance_egta').joinpath(
        'schemas', name + '.schema.json').read_text()
    return json.loads(text)


def validate(report, name):
    jsonschema.validate(report, schema(name))
    return report


def write_json(path, data, schema_name=None):
    if schema_name is not None:
        validate(data, schema_name)
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write('\n')


def _labels(game, q):
    return {r: {game.strategy(r, s).name: p for s, p in probs.items()}
            for r, probs in q.mixture.items()}


def _compliance(game, q, spec, weights):
    if spec is None:
        return {}
    scores = exploration.compliance_scores(game, spec)
    return {'compliance_fractions': exploration.compliance_fractions(
                q, scores, game.roles),
            'profile_compliance': exploration.profile_compliance(
                q, scores, exploration.role_weights(game.roles, weights))}


def candidate_report(game, cands, tau, spec=None, weights='player'):
    """JSON-ready summary of a :class:`CandidateSet`"""
    entries = []
    for cand in cands.all():
        entry = cand.to_json()
        entry['labels'] = _labels(game, cand.profile)
        entry.update(_compliance(game, cand.profile, spec, weights))
        entries.append(entry)
    return {'tau': _finite(tau),
            'status': 'ok' if cands.subgames else 'no complete subgames',
            'counts': cands.counts(), 'candidates': entries,
            'subgames': [s.to_json() for s in cands.subgames]}


def _finite(x):
    return x if math.isfinite(x) else sys.float_info.max


def catalog_report(game, spec=None):
    rows = []
    for role in game.role_names:
        for sid, strat in sorted(game.catalog[role].items()):
            score = (spec.score(strat.params)
                     if spec is not None and strat.params else None)
            rows.append({'role': role, 'id': sid, 'label': strat.name,
                         'params': list(strat.params),
                         'auto_generated': (role, sid) in game.auto_generated,
                         'candidate': sid in game.strategy_sets[role],
                         'compliance': score})
    return rows


def search_report(game, result, tau, spec, weights='player'):
    sols = []
    for rec in result.solutions:
        entry = {'mixture': rec.profile.to_json(),
                 'labels': _labels(game, rec.profile),
                 'regret': rec.regret, 'status': rec.status,
                 'tried': sorted([list(t) for t in rec.tried])}
        entry.update(_compliance(game, rec.profile, spec, weights))
        sols.append(entry)
    outcomes = [{'kind': o.kind, 'role': o.role, 'mode': o.mode,
                 'strategy': o.strategy, 'gain': o.gain,
                 'explored': o.explored} for o in result.outcomes]
    return {'status': result.status, 'iterations': result.iterations,
            'tau': tau, 'solutions': sols, 'outcomes': outcomes,
            'catalog': catalog_report(game, spec),
            'coverage': coverage(game)}


def versions():
    from compliance_egta import __version__
    return {'python': platform.python_version(), 'numpy': np.__version__,
            'jsonschema': metadata.version('jsonschema'),
            'compliance_egta': __version__}


def manifest(command, config_data, master_seed, calibration=None, **extra):
    res = {'command': command, 'config_hash': config_hash(config_data),
           'master_seed': int(master_seed), 'versions': versions(),
           'calibration': calibration, 'config': config_data}
    res.update(extra)
    return validate(res, 'manifest')
