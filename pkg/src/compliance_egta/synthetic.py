"""Small parametric games with known answers

Used to exercise the search machinery without a network simulation. In a
:class:`QuadraticGame` each player's payoff depends only on its own
strategy: a concave quadratic in the strategy parameters plus optional
Gaussian noise, so best responses and equilibria are known analytically.
"""
import numpy as np

from compliance_egta.exploration import ComplianceSpec
from compliance_egta.game import EmpiricalGame, ParamDomain, RoleSpec, Strategy


class QuadraticOracle:
    """``payoff = scale - curvature * |x - peak|^2 + noise``

    ``peaks`` maps role to the optimal parameter vector. Reads strategy
    params from ``catalog`` at call time.
    """

    def __init__(self, catalog, peaks, curvature=1.0, scale=10.0, noise=0.0):
        self.catalog = catalog
        self.peaks = {r: np.asarray(p, float) for r, p in peaks.items()}
        self.curvature = curvature
        self.scale = scale
        self.noise = noise

    def value(self, role, params):
        diff = np.asarray(params, float) - self.peaks[role]
        return self.scale - self.curvature * float(diff @ diff)

    def __call__(self, profile, seed):
        rng = np.random.default_rng(seed)
        out = []
        for role, strats in zip(profile.roles, profile.strategies):
            for sid in strats:
                val = self.value(role, self.catalog[role][sid].params)
                if self.noise:
                    val += rng.normal(0, self.noise)
                out.append(val)
        return out


def quadratic_oracle(game, peaks, curvature=1.0, scale=10.0, noise=0.0):
    """Config-file factory for :class:`QuadraticOracle`"""
    return QuadraticOracle(game.catalog, peaks, curvature, scale, noise)


def line_game(seeds, players=2, role='agent', lo=0.0, hi=1.0, step=0.05,
              compliant=(0.6, np.inf)):
    """One role, one parameter on a grid, and a compliant interval

    Returns ``(game, spec)`` with one candidate strategy per seed value.
    """
    dom = ParamDomain('x', lo, hi, step)
    spec = ComplianceSpec((dom,), (tuple(compliant),))
    strats = [Strategy.from_params(role, [v], 'S{}'.format(i))
              for i, v in enumerate(seeds)]
    game = EmpiricalGame([RoleSpec(role, players)], strats, domains=(dom,))
    return game, spec
