"""Exception hierarchy shared by the algorithms package."""


class SuccinctError(Exception):
    """Base class for every structural error raised by the package."""


# exactnum
class OutOfRange(SuccinctError):
    pass


class FlagMismatch(SuccinctError):
    pass


class BadWidth(SuccinctError):
    pass


class ZeroDenominator(SuccinctError):
    pass


class DivideByZero(SuccinctError):
    pass


class IncompatibleRadicals(SuccinctError):
    pass


class UndecidableSign(SuccinctError):
    pass


# qstate
class CardinalityUnknown(SuccinctError):
    pass


class NonClassicalGate(SuccinctError):
    pass


class HadamardBudgetExceeded(SuccinctError):
    pass


class BadClockWord(SuccinctError):
    """Raised internally when a clock register is not of the form 1^k 0^(K-k)."""


class CostExceeded(SuccinctError):
    pass


class ZeroDenominatorAmplitude(SuccinctError):
    pass


# circuit
class CircuitSyntaxError(SuccinctError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class IndexOutOfRange(SuccinctError):
    pass


class NonToffoliGate(SuccinctError):
    pass


# clockham
class LocalityExceeded(SuccinctError):
    pass


# xform
class ZeroAmplitudeVisited(SuccinctError):
    pass


# oracle
class CapExceeded(SuccinctError):
    pass


class InconsistentScale(SuccinctError):
    pass


class RowSupportMismatch(SuccinctError):
    pass


class ConvergenceFailure(SuccinctError):
    pass


class ComplexEntries(SuccinctError):
    pass


# cli
class ManifestError(SuccinctError):
    pass


class StepError(SuccinctError):
    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"step {index}: {message}")


class FileFormatError(SuccinctError):
    """A circuit, state-spec or hamfile that does not follow its format."""
