"""Exception hierarchy shared by all spinmacro modules."""


class SpinMacroError(Exception):
    """Base class for all spinmacro errors."""


class ValidationError(SpinMacroError):
    """A state, field, or descriptor violates its invariants."""


class FormatError(SpinMacroError):
    """A text/CSV/JSON payload does not match the documented format."""


class NumericalFailure(SpinMacroError):
    """A numerical procedure failed to converge or produced an unphysical
    result.  ``best_value`` carries the best estimate found, if any."""

    def __init__(self, message, best_value=None):
        super().__init__(message)
        self.best_value = best_value
