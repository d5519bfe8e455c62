"""Exception hierarchy shared by every module of the package."""


class ExpoError(Exception):
    """Base class for all errors raised by expofront."""


class DimensionError(ExpoError, ValueError):
    pass


class ZeroRelevance(ExpoError, ValueError):
    pass


class InvalidInstance(ExpoError, ValueError):
    pass


# -- geometry ---------------------------------------------------------------

class NotOnSumHyperplane(ExpoError, ValueError):
    pass


class NotInPolytope(ExpoError, ValueError):
    pass


class ZeroDirection(ExpoError, ValueError):
    pass


class OffHyperplaneDirection(ExpoError, ValueError):
    pass


class DegenerateSphere(ExpoError, ValueError):
    pass


class CenterProjection(ExpoError, ValueError):
    pass


# -- decomposition ----------------------------------------------------------

class NotBistochastic(ExpoError, ValueError):
    pass


class MatchingNotFound(ExpoError, RuntimeError):
    pass


class EmptyDistribution(ExpoError, ValueError):
    pass


# -- solvers and fronts -----------------------------------------------------

class SolverStalled(ExpoError, RuntimeError):
    pass


class UtilityInfeasible(ExpoError, ValueError):
    pass


class NonTermination(ExpoError, RuntimeError):
    """Raised by the facet walk when its iteration guard trips.

    ``visited`` holds the face descriptors seen so far, for diagnosis.
    """

    def __init__(self, message, visited=()):
        super().__init__(message)
        self.visited = list(visited)


class DegenerateArc(ExpoError, ValueError):
    pass


class EmptyFront(ExpoError, ValueError):
    pass


# -- harness ----------------------------------------------------------------

class ParseError(ExpoError, ValueError):
    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class MissingFeature(ExpoError, KeyError):
    pass


class EmptyDataset(ExpoError, ValueError):
    pass


class InvalidGrid(ExpoError, ValueError):
    pass
