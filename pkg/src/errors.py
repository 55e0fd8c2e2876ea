"""
KAR Learner - Exception hierarchy shared by every module
"""
from typing import Optional


class KarError(Exception):
    """Base class for all library errors"""


class NonFiniteInput(KarError, ValueError):
    """A matrix handed to a solver or an activation contains NaN or Inf"""

    def __init__(self, what: str = "input"):
        super().__init__(f"{what} contains NaN or Inf entries")
        self.what = what


class DegenerateShape(KarError, ValueError):
    """A matrix with zero rows or zero columns"""


class ShapeMismatch(KarError, ValueError):
    """Operands whose shapes are not conformable"""


class DomainViolation(KarError, ValueError):
    """Inverse activation received values at or below the lower asymptote"""

    def __init__(self, extremum: float, bound: float, layer: Optional[int] = None):
        where = f" at layer {layer}" if layer is not None else ""
        super().__init__(
            f"inverse activation domain violated{where}: "
            f"min value {extremum!r} <= bound {bound!r}"
        )
        self.extremum = extremum
        self.bound = bound
        self.layer = layer


class NonFiniteIntermediate(KarError, ArithmeticError):
    """A layer produced NaN or Inf during evaluation or training"""

    def __init__(self, layer: int, stage: str = "activation"):
        super().__init__(f"non-finite {stage} at layer {layer}")
        self.layer = layer
        self.stage = stage


class AlreadyAugmented(KarError, ValueError):
    """augment() was given a batch that already carries the bias column"""


class ParseError(KarError):
    """A CSV cell could not be parsed"""

    def __init__(self, row: int, col: int, message: str):
        super().__init__(f"row {row}, column {col}: {message}")
        self.row = row
        self.col = col


class UnknownCategory(KarError):
    """A categorical cell holds a value the encoding plan does not list"""

    def __init__(self, row: int, col: int, value: str):
        super().__init__(f"row {row}, column {col}: unknown category {value!r}")
        self.row = row
        self.col = col
        self.value = value


class UnknownLabel(KarError, ValueError):
    """A class label outside the expected label set"""


class ClassTooSmall(KarError, ValueError):
    """A class has fewer members than the number of folds"""

    def __init__(self, label, count: int, k: int):
        super().__init__(
            f"class {label!r} has {count} members, fewer than the {k} folds requested"
        )
        self.label = label
        self.count = count
        self.k = k


class DimensionMismatch(KarError, ValueError):
    """A model's input dimension does not suit the requested operation"""


class ModelFormatError(KarError):
    """A model file is malformed or of an unsupported version"""
