"""Exception hierarchy shared by all modules.

Anything derived from NumericalFailure maps to CLI exit code 3; ValueError
subclasses signal bad input and map to exit code 2.
"""


class CopolypinError(Exception):
    pass


class NumericalFailure(CopolypinError):
    pass


class InputError(CopolypinError, ValueError):
    pass


class DegenerateLaw(InputError):
    pass


class InvalidExponent(InputError):
    pass


class NonNormalizable(NumericalFailure):
    pass


class ZeroCoupling(InputError):
    pass


class UnsupportedGap(NumericalFailure):
    pass


class TooLarge(InputError):
    pass


class NoBracket(NumericalFailure):
    pass


class InvalidGrid(InputError):
    pass


class DomainError(InputError):
    pass


class ComplexityCap(NumericalFailure):
    pass


class TheoryWarning(UserWarning):
    """Input outside the hypotheses the bound or estimator relies on."""


class DegenerateCertificate(NumericalFailure):
    pass
