"""Exception types raised across the package"""


class ConfigurationError(ValueError):
    """Invalid game, scenario, or run configuration"""


class DataError(ValueError):
    """Payoff data is malformed or inconsistent with the game"""


class IncompleteDataError(LookupError):
    """A required profile has no payoff samples

    The missing profile is available as ``profile``.
    """

    def __init__(self, profile, message=None):
        self.profile = profile
        super().__init__(message or 'profile not evaluated: {}'.format(profile))


class BudgetExhausted(RuntimeError):
    """The profile-evaluation budget ran out before the loop finished

    ``candidates`` holds the most recent candidate set.
    """

    def __init__(self, message, candidates=None):
        self.candidates = candidates
        super().__init__(message)


class NoSolutionFound(RuntimeError):
    """Equilibrium finding failed on an exhaustively evaluated game"""


class RegionExhausted(RuntimeError):
    """Local search cannot reach any unexplored strategy of the requested polarity"""


class SearchComplete(Exception):
    """Every solution is closed, there is nothing left to target"""


class SimulationError(RuntimeError):
    """A simulation run failed twice for the same profile"""

    def __init__(self, profile, cause):
        self.profile = profile
        self.cause = cause
        super().__init__('simulation failed for {}: {!r}'.format(profile, cause))
