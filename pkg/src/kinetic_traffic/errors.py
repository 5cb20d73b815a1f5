"""Exception types shared across the package.

Argument validation raises plain ValueError.  The classes below mark
failures of the numerical machinery itself, so callers (and the CLI)
can tell a bad request apart from a computation that went wrong.
"""


class KineticModelError(Exception):
    """Base class for numerical and consistency failures."""


class IntegrationDivergedError(KineticModelError):
    """A trajectory left the admissible region or produced non-finite values."""


class ConsistencyError(KineticModelError):
    """An internal identity that should hold by construction was violated."""


class MalformedDiagramError(KineticModelError):
    """A diagram does not exhibit the expected free-flow structure."""
