"""
KAR Learner - Fully connected feedforward network model

Every layer sees its input with a leading ones column, so each weight matrix
W_k stacks the bias row on top of the sans-bias block:

    Y = f_n([1, f_{n-1}( ... [1, f_1(X W_1)] W_2 ... ) W_{n-1}] W_n)
"""
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from src.activation import Activation, act
from src.errors import AlreadyAugmented, NonFiniteInput, NonFiniteIntermediate, ShapeMismatch


@dataclass(frozen=True)
class NetworkSpec:
    """Structure h_1 ... h_n over d inputs; h_n is the output dimension q"""
    input_dim: int
    widths: Tuple[int, ...]
    activations: Tuple[Activation, ...] = field(default=())

    def __post_init__(self):
        widths = tuple(int(h) for h in self.widths)
        object.__setattr__(self, "widths", widths)
        if len(widths) < 2:
            raise ValueError(f"a network needs at least 2 layers, got widths {widths}")
        if self.input_dim < 1 or any(h < 1 for h in widths):
            raise ValueError(f"input_dim and every width must be >= 1 (d={self.input_dim}, widths={widths})")
        activations = tuple(self.activations)
        if not activations:
            activations = (Activation(),) * len(widths)
        elif len(activations) == 1:
            activations = activations * len(widths)
        if len(activations) != len(widths):
            raise ValueError(f"{len(activations)} activations given for {len(widths)} layers")
        object.__setattr__(self, "activations", activations)

    @classmethod
    def build(cls, input_dim: int, widths: Sequence[int], activation: Activation = None) -> "NetworkSpec":
        """Spec with one activation shared by every layer"""
        return cls(input_dim, tuple(widths), (activation or Activation(),))

    @property
    def n_layers(self) -> int:
        return len(self.widths)

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    def activation(self, k: int) -> Activation:
        """Activation of layer k (1-based)"""
        return self.activations[k - 1]

    def layer_shape(self, k: int) -> Tuple[int, int]:
        """Shape of W_k (1-based), bias row included"""
        fan_in = self.input_dim if k == 1 else self.widths[k - 2]
        return fan_in + 1, self.widths[k - 1]

    def layer_shapes(self) -> List[Tuple[int, int]]:
        return [self.layer_shape(k) for k in range(1, self.n_layers + 1)]


@dataclass(frozen=True)
class WeightStack:
    """Trained (or initial) weights W_1 ... W_n; arrays are made read-only"""
    layers: Tuple[np.ndarray, ...]

    def __post_init__(self):
        frozen = []
        for W in self.layers:
            W = np.array(W, dtype=np.float64, copy=True)
            W.setflags(write=False)
            frozen.append(W)
        object.__setattr__(self, "layers", tuple(frozen))

    def __len__(self) -> int:
        return len(self.layers)

    def layer(self, k: int) -> np.ndarray:
        """W_k (1-based)"""
        return self.layers[k - 1]

    def bias_row(self, k: int) -> np.ndarray:
        """w_k^T, the first row of W_k, as a 1 x h_k matrix"""
        return self.layers[k - 1][:1, :]

    def sans_bias(self, k: int) -> np.ndarray:
        """The h_{k-1} x h_k block of W_k below the bias row"""
        return self.layers[k - 1][1:, :]

    def replace(self, k: int, W: np.ndarray) -> "WeightStack":
        """New stack with W_k swapped out"""
        layers = list(self.layers)
        layers[k - 1] = W
        return WeightStack(tuple(layers))

    def validate(self, spec: NetworkSpec):
        """Raise ShapeMismatch / NonFiniteInput unless the stack fits spec"""
        if len(self.layers) != spec.n_layers:
            raise ShapeMismatch(f"stack has {len(self.layers)} layers, spec has {spec.n_layers}")
        for k, (W, expected) in enumerate(zip(self.layers, spec.layer_shapes()), start=1):
            if W.shape != expected:
                raise ShapeMismatch(f"W_{k} has shape {W.shape}, expected {expected}")
            if not np.isfinite(W).all():
                raise NonFiniteInput(f"W_{k}")


@dataclass(frozen=True)
class AugmentedBatch:
    """m x (d+1) batch whose first column is identically 1"""
    X_aug: np.ndarray

    @property
    def m(self) -> int:
        return self.X_aug.shape[0]

    @property
    def d(self) -> int:
        return self.X_aug.shape[1] - 1


def with_ones(H: np.ndarray) -> np.ndarray:
    """[1, H]"""
    return np.hstack([np.ones((H.shape[0], 1)), H])


def augment(X_raw, force: bool = False) -> AugmentedBatch:
    """
    Prepend the bias column.

    Args:
        X_raw: m x d feature matrix
        force: augment even when the first column is already all ones

    Returns:
        AugmentedBatch of shape m x (d+1)
    """
    if isinstance(X_raw, AugmentedBatch):
        raise AlreadyAugmented("batch is already augmented")
    X = np.asarray(X_raw, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ShapeMismatch(f"features must be a non-empty m x d matrix, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise NonFiniteInput("features")
    if not force and np.all(X[:, 0] == 1.0):
        raise AlreadyAugmented("first column is already all ones; pass force=True to augment anyway")
    X_aug = with_ones(X)
    X_aug.setflags(write=False)
    return AugmentedBatch(X_aug)


def _check_input(spec: NetworkSpec, X: AugmentedBatch):
    if not isinstance(X, AugmentedBatch):
        raise TypeError("forward expects an AugmentedBatch; call augment() first")
    if X.d != spec.input_dim:
        raise ShapeMismatch(f"batch has {X.d} features, spec expects {spec.input_dim}")


def _layer_output(spec: NetworkSpec, k: int, A: np.ndarray, W: np.ndarray) -> np.ndarray:
    Z = A @ W
    if not np.isfinite(Z).all():
        raise NonFiniteIntermediate(k, "pre-activation")
    H = act(spec.activation(k), Z)
    if not np.isfinite(H).all():
        raise NonFiniteIntermediate(k)
    return H


def hidden_activations(spec: NetworkSpec, W: WeightStack, X: AugmentedBatch) -> List[np.ndarray]:
    """
    Augmented outputs of every hidden layer.

    Returns:
        [A_1, ..., A_{n-1}] with A_k = [1, f_k(A_{k-1} W_k)] of shape m x (h_k + 1)
    """
    _check_input(spec, X)
    W.validate(spec)
    A = X.X_aug
    hidden = []
    for k in range(1, spec.n_layers):
        A = with_ones(_layer_output(spec, k, A, W.layer(k)))
        hidden.append(A)
    return hidden


def forward(spec: NetworkSpec, W: WeightStack, X: AugmentedBatch) -> np.ndarray:
    """Network output f_n(A_{n-1} W_n), shape m x q"""
    hidden = hidden_activations(spec, W, X)
    A = hidden[-1] if hidden else X.X_aug
    return _layer_output(spec, spec.n_layers, A, W.layer(spec.n_layers))


def predict(spec: NetworkSpec, W: WeightStack, X_raw) -> np.ndarray:
    """augment + forward for raw feature rows"""
    return forward(spec, W, augment(X_raw, force=True))


def effective_parameters(spec: NetworkSpec) -> int:
    """Output weights (h_{n-1} + 1) x q that carry the data representation"""
    return (spec.widths[-2] + 1) * spec.output_dim


def is_underdetermined(spec: NetworkSpec, m: int) -> bool:
    """
    Whether the system nearest the output has at least as many unknowns as samples.

    The matrix pseudo-inverted for the last layer is m x (h_{n-1} + 1); for
    2-layer nets this is the [1, f_1(X W_1)] rule h_1 + 1 >= m.
    """
    return spec.widths[-2] + 1 >= m
