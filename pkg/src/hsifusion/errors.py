"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Array shapes are inconsistent with the requested operation."""


class ParameterError(ValueError):
    """A numeric parameter is outside its valid range."""


class FormatError(ValueError):
    """A file does not follow its declared binary/text layout."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class SolverError(RuntimeError):
    """An iterative inner solver failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        if residual is not None:
            message = f"{message} (relative residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class NonFiniteError(SolverError):
    """NaN or Inf appeared in an iterate."""

    def __init__(self, iteration, variable):
        super().__init__(f"non-finite values in {variable} at iteration {iteration}")
        self.iteration = iteration
        self.variable = variable
