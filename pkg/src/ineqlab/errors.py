"""Exception hierarchy shared by all modules."""


class IneqLabError(Exception):
    """Base class for every error raised by ineqlab."""


class DomainError(IneqLabError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NonConvergent(IneqLabError, ArithmeticError):
    """A numerical routine exhausted its budget before meeting tolerance."""


class SizeError(IneqLabError, ValueError):
    """An enumeration would exceed a configured size limit."""


class DegenerateWitness(IneqLabError, ArithmeticError):
    """Energy vanishes while the p-variance does not: no finite constant works."""


class DegenerateInstance(IneqLabError, ArithmeticError):
    pass


class RegimeError(IneqLabError, ValueError):
    """Inputs violate the side conditions of the selected lemma regime."""


class InsufficientData(IneqLabError, ValueError):
    pass


class LipschitzViolation(IneqLabError, ValueError):
    """A probe pair shows the function is not 1-Lipschitz."""


class ParseError(IneqLabError, ValueError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class ArityError(ParseError):
    pass
