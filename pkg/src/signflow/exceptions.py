"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A system, benchmark, or run configuration is inconsistent."""


class IntegrationDivergedError(RuntimeError):
    """A forward solve produced a non-finite state.

    ``time`` records when the first non-finite value appeared.
    """

    def __init__(self, time: float, message: str | None = None):
        self.time = float(time)
        super().__init__(message or f"state became non-finite at t={time:.6g}")


class CflViolationError(RuntimeError):
    """An advection step was requested with a time step above the CFL limit.

    This indicates a solver bug (the substepping loop owns the CFL
    condition), not bad user input.
    """


class DegenerateDensityError(RuntimeError):
    """A nonlocal field was evaluated on a density with vanishing mass."""


class DescentAbortedError(RuntimeError):
    """A descent run was aborted by a flow failure.

    ``partial_report`` holds whatever was synthesized before the failure.
    """

    def __init__(self, message: str, partial_report=None,
                 cause: Exception | None = None):
        self.partial_report = partial_report
        self.cause = cause
        super().__init__(message)
