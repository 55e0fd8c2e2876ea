"""
KAR Learner - Decision surfaces and regression curves exported as tables
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd

from src.errors import DimensionMismatch
from src.evaluation import predict_labels
from src.network import NetworkSpec, WeightStack, predict


@dataclass(frozen=True)
class GridSpec:
    """Inclusive x/y ranges sampled at `resolution` points per axis"""
    x_range: Tuple[float, float] = (0.0, 1.0)
    y_range: Tuple[float, float] = (0.0, 1.0)
    resolution: int = 101

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError(f"resolution must be >= 2, got {self.resolution}")
        for lo, hi in (self.x_range, self.y_range):
            if not hi > lo:
                raise ValueError(f"empty range [{lo}, {hi}]")

    def points(self) -> np.ndarray:
        """resolution^2 x 2, x varying fastest"""
        xs = np.linspace(*self.x_range, self.resolution)
        ys = np.linspace(*self.y_range, self.resolution)
        xx, yy = np.meshgrid(xs, ys)
        return np.column_stack([xx.ravel(), yy.ravel()])


def _output_columns(q: int):
    return [f"output_{j + 1}" for j in range(q)]


def decision_surface(spec: NetworkSpec, W: WeightStack, grid: GridSpec) -> pd.DataFrame:
    """
    Network outputs over a 2-D grid.

    Returns:
        rows (x, y, output_1..output_q, argmax); argmax thresholds a single
        output at 0.5

    Raises:
        DimensionMismatch: the model does not take 2 inputs
    """
    if spec.input_dim != 2:
        raise DimensionMismatch(f"decision surfaces need a 2-input model, this one takes {spec.input_dim}")
    points = grid.points()
    outputs = predict(spec, W, points)
    frame = pd.DataFrame(points, columns=["x", "y"])
    frame[_output_columns(spec.output_dim)] = outputs
    frame["argmax"] = predict_labels(outputs)
    return frame


def regression_curve(spec: NetworkSpec, W: WeightStack, x_range: Tuple[float, float],
                     points: int = 701) -> pd.DataFrame:
    """Rows (x, output_1..output_q) on an inclusive 1-D grid; 1-input models only"""
    if spec.input_dim != 1:
        raise DimensionMismatch(f"curves need a 1-input model, this one takes {spec.input_dim}")
    if points < 2 or not x_range[1] > x_range[0]:
        raise ValueError(f"need >= 2 points over a non-empty range, got {points} over {x_range}")
    xs = np.linspace(*x_range, points)
    frame = pd.DataFrame({"x": xs})
    frame[_output_columns(spec.output_dim)] = predict(spec, W, xs.reshape(-1, 1))
    return frame
