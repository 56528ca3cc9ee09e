"""Exception hierarchy shared by every dynprice module."""


class DynPriceError(Exception):
    pass


class InputError(DynPriceError, ValueError):
    """Malformed input: wrong shapes, invalid specs, bad files."""


class InfeasibleError(InputError):
    """A scheduling or fitting problem has an empty feasible set."""


class ConfigError(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class SolverError(DynPriceError):
    """A numerical routine failed to produce a usable answer."""


class SingularFitError(SolverError):
    pass


class FitnessError(SolverError):
    def __init__(self, message: str, generation: int | None = None):
        self.generation = generation
        super().__init__(message)


class StageError(DynPriceError):
    """Wraps a failure inside run_case with the name of the stage that failed."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
