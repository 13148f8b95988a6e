"""Exception hierarchy shared by the encoders and decoders."""


class TempusError(Exception):
    """Base class for all errors raised by tempus_fri."""


class ConfigurationError(TempusError, ValueError):
    pass


class SpectrumCoverageError(TempusError, KeyError):
    """A tabulated pulse spectrum was queried outside its table."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class PreconditionError(TempusError, ValueError):
    pass


class EmptyTriggerError(TempusError):
    pass


class InsufficientTriggerError(TempusError):
    pass


class DegenerateSamplingError(TempusError):
    """Two channels produced coincident trigger times."""


class DegenerateFilterError(TempusError, ValueError):
    pass


class DegeneratePulseError(TempusError, ValueError):
    pass


class SingularSystemError(TempusError, ArithmeticError):
    pass


class CoincidentShiftError(TempusError):
    """The annihilating filter is not unique (null space of dimension > 1)."""


class InsufficientMeasurementsError(TempusError):
    """The forward system has fewer rows than unknowns."""

    def __init__(self, rows, cols):
        self.rows = rows
        self.cols = cols
        self.deficit = cols - rows
        super().__init__(
            f"underdetermined system: {rows} measurements for {cols} unknowns "
            f"(deficit {self.deficit})"
        )
