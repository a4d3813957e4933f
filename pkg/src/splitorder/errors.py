"""Exception types shared across the package."""


class SplitOrderError(Exception):
    pass


class ContractError(SplitOrderError, TypeError):
    """Operands that cannot be combined (degree or scalar kind mismatch)."""


class DomainError(SplitOrderError, ValueError):
    """An argument outside the mathematical domain of an operation."""


class ConfigurationError(SplitOrderError, ValueError):
    pass


class NotLieError(DomainError):
    """Raised when a polynomial has no expansion in the Lie basis."""

    def __init__(self, residual, degree):
        self.residual = residual
        self.degree = degree
        super().__init__(f"not a Lie element (nonzero residual in degree {degree}: {residual})")


class ParseError(SplitOrderError, ValueError):
    def __init__(self, message, line=None, column=None, source=None):
        self.line = line
        self.column = column
        self.source = source
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        if source:
            where = f"{source}: " + where
        super().__init__(where + message)
