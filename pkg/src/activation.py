"""
KAR Learner - Invertible activations (modified softplus and its inverse)
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.errors import DomainViolation, NonFiniteInput

MODIFIED_SOFTPLUS = "modified_softplus"

DEFAULT_SHIFT = 0.8
DEFAULT_CLIP_EPSILON = 1e-6


def _softplus_forward(x: np.ndarray, shift: float) -> np.ndarray:
    # ln(shift + e^x) without overflow for large x
    return np.logaddexp(np.log(shift), x)


def _softplus_inverse(y: np.ndarray, shift: float) -> np.ndarray:
    # ln(e^y - shift) = y + ln(1 - shift e^-y); expm1 keeps precision near the asymptote
    return y + np.log(-np.expm1(np.log(shift) - y))


# kind -> (f, f^-1); new invertible kinds register here
ACTIVATION_KINDS = {
    MODIFIED_SOFTPLUS: (_softplus_forward, _softplus_inverse),
}


@dataclass(frozen=True)
class Activation:
    """
    Invertible activation f with range (ln(shift), inf).

    clip_epsilon sets how far above the lower asymptote clipped inverse
    inputs are placed.
    """
    kind: str = MODIFIED_SOFTPLUS
    shift: float = DEFAULT_SHIFT
    clip_epsilon: float = DEFAULT_CLIP_EPSILON

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if not 0.0 < self.shift < 1.0:
            raise ValueError(f"shift must lie in (0, 1), got {self.shift}")
        if not self.clip_epsilon > 0:
            raise ValueError(f"clip_epsilon must be > 0, got {self.clip_epsilon}")

    @property
    def lower_bound(self) -> float:
        """Infimum of the range of f"""
        return float(np.log(self.shift))

    def forward(self, x):
        return act(self, x)

    def inverse(self, y, clip: bool = False):
        return act_inv(self, y, clip=clip)


def _as_array(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise NonFiniteInput(what)
    return arr


def _restore(arr: np.ndarray, original):
    # scalars in, scalars out
    if np.ndim(original) == 0:
        return float(arr)
    return arr


def act(a: Activation, x):
    """
    Apply f elementwise.

    Args:
        a: activation
        x: float or array, finite

    Returns:
        ln(shift + e^x) with the shape of x; every element exceeds ln(shift)
    """
    arr = _as_array(x, "activation input")
    forward, _ = ACTIVATION_KINDS[a.kind]
    return _restore(forward(arr, a.shift), x)


def clip_to_domain(a: Activation, y) -> Tuple[np.ndarray, int]:
    """
    Raise every element at or below ln(shift) + clip_epsilon to that floor.

    Returns:
        (clipped array, number of elements that were raised)
    """
    arr = _as_array(y, "inverse activation input")
    floor = a.lower_bound + a.clip_epsilon
    low = arr <= floor
    count = int(np.count_nonzero(low))
    if count:
        arr = np.where(low, floor, arr)
    return arr, count


def act_inv(a: Activation, y, clip: bool = False, layer=None):
    """
    Apply f^-1 elementwise.

    Args:
        a: activation
        y: float or array
        clip: raise out-of-domain elements to ln(shift) + clip_epsilon first
        layer: layer index reported in DomainViolation

    Returns:
        ln(e^y - shift) with the shape of y

    Raises:
        DomainViolation: clip is False and some element is <= ln(shift)
    """
    if clip:
        arr, _ = clip_to_domain(a, y)
    else:
        arr = _as_array(y, "inverse activation input")
        bound = a.lower_bound
        if arr.size and arr.min() <= bound:
            raise DomainViolation(float(arr.min()), bound, layer=layer)
    _, inverse = ACTIVATION_KINDS[a.kind]
    return _restore(inverse(arr, a.shift), y)
