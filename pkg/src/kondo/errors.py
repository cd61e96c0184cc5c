"""Exception types shared across the package."""


class KondoError(Exception):
    """Base class for all kondo errors."""


class MalformedMap(KondoError):
    """Map document fails to parse (ragged rows, unknown glyph, bad room section)."""


class NotWalkable(KondoError):
    """A query endpoint lies on a blocked or out-of-bounds cell."""


class Unreachable(KondoError):
    """No traversable path exists between the requested points."""


class SamplingExhausted(KondoError):
    """Rejection sampling gave up after its attempt budget."""


class BadDifficulty(KondoError):
    """Requested object count is not category-balanced or exceeds the point pool."""


class TooLarge(KondoError):
    """Instance exceeds the exact solver's state-space guard."""


class InfeasiblePrefix(KondoError):
    """Executed visit history violates capacity, precedence, or depot rules."""


class DimensionMismatch(KondoError):
    """Route length does not match the distance matrix dimension."""


class UnknownObject(KondoError):
    """Pick/place referenced an object id that is not part of the scenario."""


class InfeasibleVisit(KondoError):
    """A visit outside the feasible set reached the planner; state-machine bug."""


class IncompleteTrace(KondoError):
    """Metric requested on a trace that never finished the task."""


class ZeroTravel(KondoError):
    """IPL undefined: the episode traveled zero distance."""


class EmptyGroup(KondoError):
    """Summary requested over an empty trace collection."""


class BadScenario(KondoError):
    """Session start referenced a scenario that cannot be loaded or validated."""


class UnknownSession(KondoError):
    """Protocol message referenced a session id that is not live."""
