"""Exception hierarchy shared across scensim."""

from __future__ import annotations


class ScensimError(Exception):
    """Base class for every error raised by scensim."""


# -- scenario documents -------------------------------------------------------


class ScenarioError(ScensimError):
    """A scenario document could not be turned into a valid Scenario."""

    def __init__(self, message: str, path: str = "", findings=None):
        self.path = path
        self.findings = list(findings or [])
        super().__init__(f"{path}: {message}" if path else message)


class WellFormednessError(ScenarioError):
    pass


class SchemaViolationError(ScenarioError):
    pass


class UnknownTypeError(ScenarioError):
    pass


class ValueTypeMismatchError(ScenarioError):
    pass


class LibraryMismatchError(ScenarioError):
    pass


class UnsupportedConfigurationError(ScenarioError):
    """The scenario is valid but asks for something the runtime cannot do."""


# -- building blocks ----------------------------------------------------------


class MissingBehaviourError(ScensimError):
    pass


class BehaviourFault(ScensimError):
    """A behaviour raised, or returned updates that violate its contract."""


class EmptyRouteError(ScensimError):
    pass


# -- FOM ----------------------------------------------------------------------


class FomError(ScensimError):
    pass


class DialectViolationError(FomError):
    pass


class FomWellFormednessError(FomError):
    pass


# -- reference store / runtime -----------------------------------------------


class InconsistentInputError(ScensimError):
    pass


class UnknownClassPathError(ScensimError):
    pass


class UnknownObjectError(ScensimError):
    pass


class UnknownAttributePathError(ScensimError):
    pass


class UnknownAttributeUUIDError(ScensimError):
    pass


class DecodeError(ScensimError):
    pass


class ProtocolViolation(ScensimError):
    """A message was illegal in the coordinator's current state."""


class ProtocolFault(ScensimError):
    """The coordinator told this member that the federation has failed."""


class ConnectFailure(ScensimError):
    pass


class SinkFailure(ScensimError):
    pass


class StartupTimeout(ScensimError):
    pass
