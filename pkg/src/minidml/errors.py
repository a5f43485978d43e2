"""Exception hierarchy shared by every subsystem."""


class MiniDMLError(Exception):
    """Base class for all errors raised by minidml."""


class ShapeError(MiniDMLError, ValueError):
    """Operand shapes are not conformant."""


class BoundsError(MiniDMLError, IndexError):
    """An index range falls outside a matrix extent."""


class SingularMatrixError(MiniDMLError, ArithmeticError):
    """A pivot vanished during elimination."""


class FormatError(MiniDMLError, ValueError):
    """Malformed matrix file or payload."""


class DSLSyntaxError(MiniDMLError):
    """Lexical or grammatical error in a script."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f"line {line}" + (f", col {col}" if col is not None else "") + ": "
        super().__init__(where + message)
        self.message = message


class DSLRuntimeError(MiniDMLError):
    """Error raised while interpreting a script, tagged with the source line."""

    def __init__(self, message, line=None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ImportResolutionError(MiniDMLError):
    """Unknown import path or an import cycle."""


class ModelValidationError(MiniDMLError, ValueError):
    """A model description is inconsistent."""

    def __init__(self, message, layer=None):
        self.layer = layer
        super().__init__(f"layer {layer}: {message}" if layer is not None else message)


class WeightsError(MiniDMLError, ValueError):
    """Missing or mis-shaped parameter in a weights manifest."""

    def __init__(self, message, param=None):
        self.param = param
        super().__init__(message)


class CapacityError(MiniDMLError):
    """Not even a single row fits into the memory budget."""


class OptimizerStateError(MiniDMLError):
    """Optimizer used in an invalid state."""
