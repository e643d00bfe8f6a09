"""Exception hierarchy shared by all modules."""


class CoopManipError(Exception):
    """Base class for every error raised by this package."""


class InvariantError(CoopManipError, ValueError):
    """A parameter or configuration violates one of its invariants."""


class DegenerateMassMatrixError(CoopManipError):
    pass


class IntegrationDivergedError(CoopManipError):
    """The integrated state became non-finite.

    ``last_time`` holds the last simulation time with a finite state.
    """

    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time


class OutOfRangeError(CoopManipError, ValueError):
    pass


class InfeasibleEquilibriumError(CoopManipError):
    pass


class SingularEquilibriumError(CoopManipError):
    pass


class ParameterizationMismatchError(CoopManipError, ValueError):
    pass


class NoSolutionError(CoopManipError):
    pass


class InfeasibleReferenceError(CoopManipError):
    """Holding the current applied reference already violates the constraints."""


class ScenarioError(CoopManipError):
    """Scenario file could not be parsed or validated.

    ``path`` is the dotted field path that failed, when known.
    """

    def __init__(self, message, path=None):
        if path:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path
