"""Exceptions raised by msdiffeo"""


class MsdiffeoError(Exception):
    """Base class for all msdiffeo errors"""


class GridMismatchError(MsdiffeoError, ValueError):
    """Operands live on different grids"""


class InvalidQueryError(MsdiffeoError, ValueError):
    """A query point is not finite"""


class IllConditionedKernelError(MsdiffeoError, ArithmeticError):
    """The kernel Gram system could not be factorized"""


class FlowBlowUpError(MsdiffeoError, ArithmeticError):
    """A flow integration produced non-finite values"""


class EmptyBinError(MsdiffeoError, ValueError):
    """A scale bin contains no quadrature node"""


class OrderingMismatchError(MsdiffeoError, ValueError):
    """Semidirect tuples with different orderings or lengths were combined"""


class ConfigError(MsdiffeoError, ValueError):
    """Invalid run configuration or missing input"""


class NotInvertibleError(MsdiffeoError, ArithmeticError):
    """A map or group element could not be inverted"""
