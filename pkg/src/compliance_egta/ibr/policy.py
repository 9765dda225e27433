"""Parametric IBR node policies and their compliant region"""
import math
from dataclasses import astuple, dataclass, fields

from compliance_egta.errors import ConfigurationError
from compliance_egta.exploration import ComplianceSpec
from compliance_egta.game import ParamDomain, Strategy

ROLES = ('client', 'isp', 'root', 'server')


@dataclass(frozen=True)
class PolicyParams:
    rep_increment_positive: float
    rep_decrement_negative: float
    rep_decrement_report: float
    intro_make_threshold: float
    intro_accept_threshold: float
    connection_terminate_threshold: float
    report_propagation_weight: float

    def __post_init__(self):
        for dom, val in zip(DOMAINS, astuple(self)):
            if not dom.contains(val):
                raise ConfigurationError('{}={} outside [{}, {}]'.format(
                    dom.name, val, dom.lo, dom.hi))

    @classmethod
    def names(cls):
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_vector(cls, vec):
        return cls(*(float(v) for v in vec))

    def as_vector(self):
        return astuple(self)

    def to_json(self):
        return dict(zip(self.names(), self.as_vector()))


DOMAINS = (
    ParamDomain('rep_increment_positive', 0.0, 0.05, 0.005),
    ParamDomain('rep_decrement_negative', 0.0, 0.5, 0.05),
    ParamDomain('rep_decrement_report', 0.0, 0.5, 0.05),
    ParamDomain('intro_make_threshold', 0.0, 1.0, 0.05),
    ParamDomain('intro_accept_threshold', 0.0, 1.0, 0.05),
    ParamDomain('connection_terminate_threshold', 0.0, 1.0, 0.05),
    ParamDomain('report_propagation_weight', 0.0, 1.0, 0.1),
)

# lower bounds are minimum magnitudes, threshold bands are designer ranges
COMPLIANT_INTERVALS = (
    (0.0, math.inf),
    (0.1, math.inf),
    (0.05, math.inf),
    (0.2, 0.9),
    (0.2, 0.9),
    (0.1, 0.7),
    (0.2, math.inf),
)

SEED_POLICIES = {
    # designer default
    'C': PolicyParams(0.005, 0.35, 0.2, 0.5, 0.5, 0.4, 0.5),
    # stricter compliant variant
    "C'": PolicyParams(0.01, 0.45, 0.3, 0.6, 0.6, 0.5, 0.7),
    # lenient compliant variant
    "C''": PolicyParams(0.005, 0.15, 0.1, 0.3, 0.3, 0.2, 0.3),
    # oblivious: no reputation updates, accepts everything
    'N': PolicyParams(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
}


def ibr_compliance_spec(aggregation='min_margin'):
    return ComplianceSpec(DOMAINS, COMPLIANT_INTERVALS, aggregation)


def seed_strategy(role, label):
    """Catalog strategy for a named seed policy"""
    try:
        params = SEED_POLICIES[label]
    except KeyError:
        raise ConfigurationError('unknown seed policy: {}'.format(label))
    return Strategy.from_params(role, params.as_vector(), label)
