import math

import numpy as np
import pytest

from src.activation import Activation, act, act_inv, clip_to_domain
from src.errors import DomainViolation, NonFiniteInput

F = Activation()


class TestForward:
    def test_closed_form_at_zero(self):
        assert act(F, 0.0) == pytest.approx(math.log(1.8), abs=1e-12)
        assert act(F, 0.0) == pytest.approx(0.5877867, abs=1e-7)

    def test_large_input_tends_to_identity(self):
        assert act(F, 30.0) == pytest.approx(30.0, abs=1e-12)
        assert np.isfinite(act(F, 1000.0))

    def test_very_negative_input_tends_to_lower_bound(self):
        assert act(F, -40.0) == pytest.approx(math.log(0.8), abs=1e-12)
        assert act(F, -40.0) == pytest.approx(-0.2231436, abs=1e-7)

    def test_strictly_increasing(self):
        x = np.linspace(-20, 20, 2001)
        assert np.all(np.diff(act(F, x)) > 0)

    def test_shape_preserved(self):
        x = np.zeros((3, 4))
        assert act(F, x).shape == (3, 4)
        assert isinstance(act(F, 1.0), float)

    def test_rejects_nan(self):
        with pytest.raises(NonFiniteInput):
            act(F, np.array([0.0, np.nan]))


class TestInverse:
    def test_inverse_identity(self):
        assert act_inv(F, act(F, 1.7)) == pytest.approx(1.7, abs=1e-12)

    def test_indicator_targets(self):
        assert act_inv(F, 0.0) == pytest.approx(math.log(0.2), abs=1e-12)
        assert act_inv(F, 0.0) == pytest.approx(-1.6094379, abs=1e-7)
        assert act_inv(F, 1.0) == pytest.approx(math.log(math.e - 0.8), abs=1e-12)
        assert act_inv(F, 1.0) == pytest.approx(0.6514299, abs=1e-7)

    def test_round_trip_on_grid(self):
        # below about -12 the forward value sits within float64 resolution of ln(0.8),
        # so x itself is no longer recoverable
        x = np.linspace(-12.0, 30.0, 100_000)
        assert np.max(np.abs(act_inv(F, act(F, x)) - x)) < 1e-10

    def test_forward_round_trip_on_full_range(self):
        x = np.linspace(-30.0, 30.0, 100_000)
        y = act(F, x)
        assert np.max(np.abs(act(F, act_inv(F, y)) - y)) < 1e-10

    def test_domain_violation_reports_extremum(self):
        bound = math.log(0.8)
        with pytest.raises(DomainViolation) as info:
            act_inv(F, np.array([0.5, bound - 0.1]), layer=3)
        assert info.value.extremum == pytest.approx(bound - 0.1)
        assert info.value.layer == 3

    def test_value_on_the_asymptote_is_rejected(self):
        with pytest.raises(DomainViolation):
            act_inv(F, math.log(0.8))

    def test_clip_raises_to_floor(self):
        y = np.array([-5.0, 0.0, 1.0])
        out = act_inv(F, y, clip=True)
        assert np.all(np.isfinite(out))
        assert out[1] == pytest.approx(math.log(0.2))
        floor = math.log(0.8) + F.clip_epsilon
        assert out[0] == pytest.approx(act_inv(F, floor))


class TestClipToDomain:
    def test_counts_clipped_elements(self):
        y = np.array([[-1.0, 0.0], [-0.3, 2.0]])
        clipped, count = clip_to_domain(F, y)
        assert count == 2
        assert clipped.min() == pytest.approx(F.lower_bound + F.clip_epsilon)
        np.testing.assert_array_equal(clipped[0, 1], 0.0)

    def test_nothing_to_clip(self):
        _, count = clip_to_domain(F, np.ones(5))
        assert count == 0


class TestActivationConfig:
    def test_lower_bound(self):
        assert F.lower_bound == pytest.approx(math.log(0.8))

    @pytest.mark.parametrize("shift", [0.0, 1.0, -0.5])
    def test_rejects_bad_shift(self, shift):
        with pytest.raises(ValueError):
            Activation(shift=shift)

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            Activation(kind="relu")

    def test_other_shift(self):
        a = Activation(shift=0.5)
        assert a.forward(0.0) == pytest.approx(math.log(1.5))
        assert a.inverse(a.forward(2.0)) == pytest.approx(2.0, abs=1e-12)
