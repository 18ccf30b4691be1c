class FlatDissError(Exception):
    """Base class for package errors."""


class EigensolverError(FlatDissError):
    pass


class SolverError(FlatDissError):
    """A steady-state or dynamics solver could not produce a valid result."""


class DegenerateSteadyState(SolverError):
    def __init__(self, multiplicity, message=None):
        self.multiplicity = multiplicity
        super().__init__(message or f"zero eigenvalue has multiplicity {multiplicity}; steady state is not unique")


class NoZeroEigenvalue(SolverError):
    pass


class SingularSystem(SolverError):
    pass


class SpectralGapError(SolverError):
    pass


class IntegrationError(SolverError):
    def __init__(self, message, last_time=None):
        self.last_time = last_time
        super().__init__(message)


class InvariantViolation(IntegrationError):
    pass


class ConfigError(FlatDissError, ValueError):
    pass
