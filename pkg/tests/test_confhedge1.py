import math

import numpy as np
import pytest
from sklearn.base import clone

from confhedge.confhedge1 import (
    ConfHedge1,
    algorithm_loss,
    effective_losses,
    fixed_point_residual,
    loss_update,
    prediction_weights,
    run,
    step,
)
from confhedge.core import LearnerState, RoundInput
from confhedge.exceptions import DeadEnsembleError, ValidationError
from confhedge.mixing import NONE, MixingScheme

EXP_WEIGHT_0_1 = 0.73105857863000487925
# bisection root of h = 0.25 (0.5 * 2 + 0.5 h) + 0.75 * 4
FIXED_POINT_EXAMPLE = 3.7142857142857142857


def bisect_fixed_point(w, p, l, lo=-1e6, hi=1e6, iters=200):
    f = lambda h: float(np.sum(w * (p * l + (1 - p) * h)) - h)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestPrediction:
    def test_full_confidence(self):
        np.testing.assert_array_equal(prediction_weights([0.5, 0.5], [1, 1]), [0.5, 0.5])

    def test_sleeping(self):
        np.testing.assert_array_equal(prediction_weights([0.5, 0.5], [1, 0]), [1.0, 0.0])

    def test_partial(self):
        np.testing.assert_allclose(prediction_weights([0.25, 0.75], [0.5, 1.0]), [1 / 7, 6 / 7], rtol=1e-15)

    def test_dead_ensemble(self):
        with pytest.raises(DeadEnsembleError):
            prediction_weights([1.0, 0.0], [0.0, 1.0])


class TestAlgorithmLoss:
    def test_mean(self):
        assert algorithm_loss([0.5, 0.5], [1, 1], [1, 3]) == 2.0

    def test_sleeping_ignored(self):
        assert algorithm_loss([0.5, 0.5], [1, 0], [1, 99]) == 1.0

    def test_against_bisection(self):
        h = algorithm_loss([0.25, 0.75], [0.5, 1.0], [2, 4])
        w, p, l = np.array([0.25, 0.75]), np.array([0.5, 1.0]), np.array([2.0, 4.0])
        assert h == pytest.approx(FIXED_POINT_EXAMPLE, rel=1e-15)
        assert h == pytest.approx(bisect_fixed_point(w, p, l), abs=1e-10)
        assert abs(fixed_point_residual(w, p, l, h)) < 1e-14


class TestEffectiveLosses:
    def test_full_confidence(self):
        np.testing.assert_array_equal(effective_losses([1, 1], [5, -3], 123.0), [5, -3])

    def test_asleep(self):
        np.testing.assert_array_equal(effective_losses([0, 0, 0], [1, 2, 3], 7.0), [7, 7, 7])

    def test_midpoint(self):
        np.testing.assert_array_equal(effective_losses([0.5], [4], 2.0), [3.0])


class TestLossUpdate:
    def test_equal_exponents(self):
        np.testing.assert_array_equal(loss_update([0.5, 0.5], [0.5, 1.0], [4.0, 3.0], 2.0, 1.0), [0.5, 0.5])

    def test_infinite_rate(self):
        np.testing.assert_array_equal(loss_update([0.5, 0.5], [1, 1], [0, 1], 0.5, math.inf), [1.0, 0.0])

    def test_finite_rate(self):
        out = loss_update([0.5, 0.5], [1, 1], [0, 1], 0.5, 1.0)
        np.testing.assert_allclose(out, [EXP_WEIGHT_0_1, 1 - EXP_WEIGHT_0_1], rtol=1e-15)


class TestStep:
    def test_single_expert(self):
        rng = np.random.default_rng(0)
        state = LearnerState.initial(1)
        for l in rng.normal(size=50) * 100:
            out = step(state, RoundInput([l], [rng.uniform(0.1, 1)]), MixingScheme())
            assert out.record.algorithm_loss == l
            assert out.record.gap == 0.0
            state = out.next_state
            assert state.learning_rate == math.inf
            np.testing.assert_array_equal(state.posterior, [1.0])

    def test_first_round_by_hand(self):
        out = step(LearnerState.initial(2), RoundInput([0.0, 1.0], [1, 1]), MixingScheme())
        r = out.record
        assert r.algorithm_loss == 0.5
        assert r.mixloss == 0.0
        assert r.gap == 0.5
        assert r.learning_rate == math.inf
        assert out.next_state.cumulative_gap == 0.5
        assert out.next_state.learning_rate == 2.0

    def test_constant_losses(self):
        L = np.full((100, 4), 3.25)
        model = ConfHedge1(mixing=NONE).fit(L)
        assert all(r.gap == 0.0 for r in model.records_)
        assert model.learning_rate_ == math.inf
        np.testing.assert_array_equal(model.weights_, np.full(4, 0.25))

    def test_wrong_width(self):
        with pytest.raises(ValidationError):
            step(LearnerState.initial(3), RoundInput([1.0, 2.0], [1, 1]), MixingScheme())

    def test_trajectory_properties(self):
        rng = np.random.default_rng(1)
        L = rng.normal(size=(400, 6)) * 5
        P = rng.uniform(size=(400, 6))
        records, _ = run([RoundInput(l, p) for l, p in zip(L, P)], MixingScheme())
        gaps = np.array([r.gap for r in records])
        etas = np.array([r.learning_rate for r in records])
        assert np.all(gaps >= 0)
        finite = etas[np.isfinite(etas)]
        assert np.all(np.diff(finite) <= 0)
        for r in records:
            res = fixed_point_residual(r.posterior, r.confidences, r.losses, r.algorithm_loss)
            assert abs(res) <= 1e-10 * (1 + np.abs(r.losses).max())
            assert r.mixloss <= r.algorithm_loss + 1e-12 * (1 + np.abs(r.losses).max())

    def test_adahedge_reduction(self):
        # independent adaptive Hedge: weights from cumulative losses at the current rate
        rng = np.random.default_rng(2)
        L = rng.normal(size=(300, 3)) + np.array([0.0, 0.2, 0.4])
        model = ConfHedge1(mixing=NONE).fit(L)
        cum = np.zeros(3)
        delta = 0.0
        total = 0.0
        for r, l in zip(model.records_, L):
            if delta == 0:
                w = (cum == cum.min()).astype(float)
                m = l[w > 0].min()
            else:
                eta = math.log(3) / delta
                w = np.exp(-eta * (cum - cum.min()))
                w /= w.sum()
                m = l.min() - math.log(w @ np.exp(-eta * (l - l.min()))) / eta
            w /= w.sum()
            np.testing.assert_allclose(r.posterior, w, atol=1e-12)
            h = float(w @ l)
            assert r.algorithm_loss == pytest.approx(h, abs=1e-12)
            delta += max(0.0, h - m)
            total += h
            cum += l
        assert model.cumulative_loss_ == pytest.approx(total, rel=1e-12)

    def test_unmixed_learner_recovers_from_first_round(self):
        # expert 0 wins round 1 but loses every later round
        L = np.vstack([[0.0, 1.0], np.tile([1.0, 0.0], (200, 1))])
        model = ConfHedge1(mixing=NONE).fit(L)
        assert model.weights_[1] > 0.99

    def test_sleeping_specialists(self):
        # 0/1 confidences: asleep experts keep their relative weight among themselves
        rng = np.random.default_rng(6)
        L = rng.normal(size=(50, 4))
        P = (rng.uniform(size=(50, 4)) < 0.5).astype(float)
        P[:, 0] = 1.0
        model = ConfHedge1(mixing=NONE).fit(L, P)
        for r in model.records_:
            asleep = r.confidences == 0
            if asleep.sum() >= 2 and np.isfinite(r.learning_rate):
                ratio_before = r.posterior[asleep] / r.posterior[asleep].sum()
                ratio_after = r.posterior_mu[asleep] / r.posterior_mu[asleep].sum()
                np.testing.assert_allclose(ratio_before, ratio_after, rtol=1e-12)


class TestEstimator:
    def test_params_and_clone(self):
        model = ConfHedge1(mixing="uniform-past", alpha=0.1)
        assert model.get_params() == {"mixing": "uniform-past", "alpha": 0.1}
        twin = clone(model)
        assert twin.get_params() == model.get_params()
        assert not hasattr(twin, "state_")

    def test_partial_fit_matches_fit(self):
        rng = np.random.default_rng(3)
        L, P = rng.normal(size=(60, 4)), rng.uniform(0.1, 1, size=(60, 4))
        whole = ConfHedge1().fit(L, P)
        parts = ConfHedge1()
        for l, p in zip(L, P):
            parts.partial_fit(l, p)
        np.testing.assert_array_equal(whole.weights_, parts.weights_)
        assert whole.cumulative_loss_ == parts.cumulative_loss_

    def test_fit_resets(self):
        rng = np.random.default_rng(4)
        L = rng.normal(size=(30, 3))
        model = ConfHedge1().fit(L)
        first = model.weights_.copy()
        model.fit(L)
        np.testing.assert_array_equal(first, model.weights_)
        assert len(model.records_) == 30

    def test_predict(self):
        model = ConfHedge1().fit(np.array([[0.0, 1.0]]))
        np.testing.assert_allclose(model.predict(), model.weights_)
        np.testing.assert_allclose(model.predict([1, 0]), [1.0, 0.0])
        assert model.predict([[1, 1], [0, 1]]).shape == (2, 2)

    def test_width_mismatch(self):
        model = ConfHedge1().fit(np.zeros((2, 3)))
        with pytest.raises(ValidationError):
            model.partial_fit(np.zeros(4))

    def test_confidence_shape_mismatch(self):
        with pytest.raises(ValidationError):
            ConfHedge1().fit(np.zeros((2, 3)), np.ones((2, 2)))


class TestFixedPointCheck:
    def test_inconsistent_closed_form_is_caught(self, monkeypatch):
        import confhedge.confhedge1 as ch1
        from confhedge.exceptions import NumericalError

        monkeypatch.setattr(ch1, "convex_combination", lambda w, l: float(w @ l) + 1.0)
        with pytest.raises(NumericalError):
            step(LearnerState.initial(2), RoundInput([0.0, 1.0], [0.5, 1.0]), MixingScheme())
