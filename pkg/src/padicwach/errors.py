"""Exception hierarchy shared by every module."""


class PadicError(Exception):
    """Base class for all library errors."""


class PrecisionExhausted(PadicError):
    pass


class DivisionByPrecisionZero(PrecisionExhausted):
    pass


class NonInvertiblePole(PadicError):
    pass


class UnsupportedCase(PadicError):
    pass


class NonSemisimplePhi(PadicError):
    pass


class NotAdmissible(PadicError):
    pass


class WeightMismatch(PadicError):
    pass


class NotFiniteHeightShape(PadicError):
    pass


class NoStabilization(PadicError):
    pass


class SingularRecursion(PrecisionExhausted):
    pass


class NoConvergence(PadicError):
    pass


class ConditionViolated(PadicError):
    pass


class UnsupportedInput(PadicError):
    pass


class UnsupportedElement(PadicError):
    pass


class GenericityRequired(PadicError):
    pass


class NeedsBothSides(PadicError):
    pass


class InvalidLabel(PadicError):
    pass


class OutOfTableRange(PadicError):
    pass
