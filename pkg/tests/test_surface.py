import numpy as np
import pytest

from src.data import SincConfig, SpiralConfig, gen_sinc, gen_spiral, gen_xor
from src.errors import DimensionMismatch
from src.network import NetworkSpec
from src.surface import GridSpec, decision_surface, regression_curve
from src.trainer import TrainConfig, train


@pytest.fixture(scope="module")
def xor_model():
    xor = gen_xor()
    spec = NetworkSpec.build(2, [4, 1])
    W, _ = train(xor.X, xor.Y, spec, TrainConfig(seed=0))
    return spec, W


class TestDecisionSurface:
    def test_row_count_and_columns(self, xor_model):
        frame = decision_surface(*xor_model, GridSpec((0.0, 1.0), (0.0, 1.0), 101))
        assert len(frame) == 10201
        assert list(frame.columns) == ["x", "y", "output_1", "argmax"]

    def test_corners_present_once(self, xor_model):
        frame = decision_surface(*xor_model, GridSpec(resolution=11))
        for x, y in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]:
            assert ((frame["x"] == x) & (frame["y"] == y)).sum() == 1

    def test_xor_corners_classified(self, xor_model):
        frame = decision_surface(*xor_model, GridSpec(resolution=11))
        at = lambda x, y: int(frame.loc[(frame["x"] == x) & (frame["y"] == y), "argmax"].iloc[0])
        assert (at(0.0, 0.0), at(1.0, 1.0), at(1.0, 0.0)) == (0, 0, 1)

    def test_requires_two_inputs(self):
        spec = NetworkSpec.build(1, [3, 1])
        sinc = gen_sinc(SincConfig(clean_only=True))
        W, _ = train(sinc.X, sinc.Y, spec)
        with pytest.raises(DimensionMismatch):
            decision_surface(spec, W, GridSpec())

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            GridSpec(resolution=1)
        with pytest.raises(ValueError):
            GridSpec(x_range=(1.0, 0.0))

    def test_spiral_regions_follow_their_arms(self):
        spiral = gen_spiral(SpiralConfig())
        spec = NetworkSpec.build(2, [100, 3])
        W, _ = train(spiral.X, spiral.Y, spec, TrainConfig(seed=0, init_scale=1.0))
        frame = decision_surface(spec, W, GridSpec((-1.1, 1.1), (-1.1, 1.1), 121))
        regions = frame["argmax"].to_numpy().reshape(121, 121)
        assert set(np.unique(regions)) == {0, 1, 2}
        # grid cell nearest to every training point, as (column, row)
        cells = np.clip(np.rint((spiral.X + 1.1) / 2.2 * 120).astype(int), 0, 120)
        under_points = regions[cells[:, 1], cells[:, 0]]
        for c in range(3):
            assert np.mean(under_points[spiral.labels == c] == c) > 0.5


class TestRegressionCurve:
    def test_curve_rows(self):
        sinc = gen_sinc(SincConfig(clean_only=True))
        spec = NetworkSpec.build(1, [8, 1])
        W, _ = train(sinc.X, sinc.Y, spec, TrainConfig(seed=1))
        frame = regression_curve(spec, W, (1.0, 8.0), points=71)
        assert len(frame) == 71
        assert list(frame.columns) == ["x", "output_1"]
        assert frame["x"].iloc[0] == 1.0 and frame["x"].iloc[-1] == 8.0

    def test_requires_one_input(self, xor_model):
        with pytest.raises(DimensionMismatch):
            regression_curve(*xor_model, (0.0, 1.0))
