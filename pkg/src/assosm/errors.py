"""Exception hierarchy with pipeline stage codes.

Stage codes double as CLI exit codes: 0 success, 10 data collection,
20 rank deficiency, 30 design infeasibility, 40 simulation divergence.
"""


class AssosmError(Exception):
    stage_code = 1


class ConfigurationError(AssosmError):
    """Bad dimensions or invalid parameters supplied by the caller."""

    stage_code = 1


class UsageError(AssosmError):
    """Invalid argument values (unknown benchmark id, negative widths, ...)."""

    stage_code = 1


class CollectionError(AssosmError):
    """Data-collection experiment could not be completed."""

    stage_code = 10


class RankError(AssosmError):
    """The state-data matrix [O1; O2] is rank deficient."""

    stage_code = 20


class DesignInfeasibleError(AssosmError):
    """The design SDP admits no solution for the given data."""

    stage_code = 30

    def __init__(self, message, solver_status=None):
        super().__init__(message)
        self.solver_status = solver_status


class DivergenceError(AssosmError):
    """Simulated state became non-finite."""

    stage_code = 40

    def __init__(self, message, t_bad=None):
        super().__init__(message)
        self.t_bad = t_bad
