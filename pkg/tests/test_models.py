"""Model-level oracles and invariants.

Covers the sigmoid, the closed-form ridge classifier, its streaming
recursive-least-squares variant, the sparse binary-hidden online
classifier on both numeric backends, the winner-margin loss/gradient
pair, the epoch harness, evaluation metrics, and checkpoint round trips.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splrelm import datasets, fxp, linalg, prng
from splrelm.datasets import Dataset
from splrelm.models import (
    ElmClassifier,
    OsElmClassifier,
    SplrClassifier,
    evaluate,
    load_checkpoint,
    one_hot,
    save_checkpoint,
    sigmoid,
    train_epoch,
    train_epochs,
    wta_grad,
    wta_loss,
)
from splrelm.opcount import OpCounter, count_ops


class TestSigmoid:
    def test_zero_maps_to_half(self):
        assert sigmoid(np.array([0.0]))[0] == 0.5

    def test_limits_saturate_exactly(self):
        out = sigmoid(np.array([1000.0, -1000.0]))
        assert out[0] == 1.0
        assert out[1] == 0.0

    def test_matches_direct_formula(self):
        z = np.linspace(-30, 30, 301)
        expected = np.array([1.0 / (1.0 + math.exp(-v)) for v in z])
        assert np.max(np.abs(sigmoid(z) - expected)) < 1e-12

    def test_no_overflow_warnings_on_extremes(self):
        with np.errstate(over="raise"):
            sigmoid(np.array([-750.0, 750.0]))


class TestOneHot:
    def test_rows_are_unit_indicators(self):
        t = one_hot(np.array([0, 3, 9]))
        assert t.shape == (3, 10)
        assert t[0, 0] == 1.0 and t[1, 3] == 1.0 and t[2, 9] == 1.0
        assert t.sum() == 3.0


class TestElm:
    def test_identity_hidden_solves_to_damped_targets(self):
        # With H = I the normal equations read (I + lam I) W = T.
        model = ElmClassifier(4, 2, classes=3)
        t = np.arange(12, dtype=np.float64).reshape(4, 3)
        w = model.fit_from_hidden(np.eye(4), t, lam=0.25)
        assert np.max(np.abs(w - t / 1.25)) < 1e-12

    def test_input_weights_come_from_the_shared_generator(self):
        model = ElmClassifier(3, 5)
        row = prng.gen_weight_row(model.plan, 1, 6)
        assert np.array_equal(model.w_in[1], row[:5] / fxp.ONE)
        assert model.bias[1] == row[5] / fxp.ONE

    def test_separable_blobs_reach_99_percent(self):
        pool = datasets.synthetic_blobs(600, dim=16, seed=2, noise=0.05)
        train = Dataset(pool.features[:400], pool.labels[:400])
        test = Dataset(pool.features[400:], pool.labels[400:])
        model = ElmClassifier(64, 16).fit(train)
        assert evaluate(model, test).accuracy >= 0.99

    def test_predict_before_fit_raises(self):
        model = ElmClassifier(4, 2)
        with pytest.raises(RuntimeError, match="fit"):
            model.predict_labels(np.zeros((1, 2)))

    def test_hidden_rejects_wrong_dimension(self):
        model = ElmClassifier(4, 3)
        with pytest.raises(ValueError):
            model.hidden(np.zeros(2))


class TestOsElm:
    def test_identity_init_with_zero_ridge_recovers_targets(self):
        model = OsElmClassifier(4, 2, classes=3)
        t0 = np.arange(12, dtype=np.float64).reshape(4, 3)
        model.init_from_hidden(np.eye(4), t0, lam=0.0)
        assert np.max(np.abs(model.p - np.eye(4))) < 1e-10
        assert np.max(np.abs(model.w_out - t0)) < 1e-10

    def test_zero_residual_update_is_a_no_op_on_weights(self):
        model = OsElmClassifier(4, 2, classes=3)
        model.init_from_hidden(np.eye(4), np.ones((4, 3)), lam=0.0)
        h = np.array([0.3, -0.2, 0.9, 0.1])
        target = h @ model.w_out  # residual is exactly zero
        before = model.w_out.copy()
        model.update_from_hidden(h, target)
        assert np.max(np.abs(model.w_out - before)) < 1e-12

    def test_init_matches_batch_solver(self):
        train = datasets.synthetic_blobs(120, dim=8, seed=4)
        stream = OsElmClassifier(16, 8, lam=1e-3).init_batch(train)
        batch = ElmClassifier(16, 8, lam=1e-3).fit(train)
        assert np.max(np.abs(stream.w_out - batch.w_out)) < 1e-8

    def test_streaming_matches_batch_at_reference_size(self):
        train = datasets.synthetic_blobs(512, dim=16, seed=5)
        stream = OsElmClassifier(64, 16, lam=1e-3).fit_stream(train)
        batch = ElmClassifier(64, 16, lam=1e-3).fit(train)
        assert np.max(np.abs(stream.w_out - batch.w_out)) < 1e-6

    @given(st.integers(min_value=2, max_value=10),
           st.integers(min_value=0, max_value=999))
    @settings(max_examples=15, deadline=None)
    def test_streaming_matches_batch_property(self, m, seed):
        n = 3 * m + 7
        train = datasets.synthetic_blobs(n, dim=6, seed=seed, noise=0.25)
        stream = OsElmClassifier(m, 6, lam=0.1).fit_stream(train)
        batch = ElmClassifier(m, 6, lam=0.1).fit(train)
        assert np.max(np.abs(stream.w_out - batch.w_out)) < 1e-6

    def test_covariance_stays_symmetric_positive_definite(self):
        train = datasets.synthetic_blobs(64, dim=8, seed=6)
        model = OsElmClassifier(16, 8, lam=1e-3).init_batch(train)
        rng = np.random.default_rng(0)
        for _ in range(1000):
            i = int(rng.integers(0, len(train)))
            model.update(train.features[i], int(train.labels[i]))
        assert np.max(np.abs(model.p - model.p.T)) < 1e-9
        linalg.cholesky_factor(model.p)  # raises if not positive definite

    def test_update_before_init_raises(self):
        model = OsElmClassifier(4, 2)
        with pytest.raises(RuntimeError, match="init"):
            model.update(np.zeros(2), 0)


def make_splr(m=8, d=4, backend="real", classes=3, **kw):
    kw.setdefault("threshold", 0.0)
    return SplrClassifier(m, d, backend=backend, classes=classes, **kw)


class TestSplrHidden:
    @pytest.mark.parametrize("backend", SplrClassifier.BACKENDS)
    def test_zero_input_thresholds_the_bias(self, backend):
        model = make_splr(m=32, d=6, backend=backend, threshold=0.0)
        bias_raws = np.array(
            [prng.gen_weight_row(model.plan, i, 7)[-1] for i in range(32)])
        expected = (bias_raws > 0).astype(np.uint8)
        assert np.array_equal(model.hidden(np.zeros(6)), expected)

    @pytest.mark.parametrize("backend", SplrClassifier.BACKENDS)
    def test_minus_infinite_threshold_turns_every_neuron_on(self, backend):
        model = make_splr(m=16, d=4, backend=backend, threshold=-math.inf)
        x = np.linspace(0, 1, 4)
        assert model.hidden(x).tolist() == [1] * 16

    def test_missing_threshold_raises(self):
        model = SplrClassifier(4, 2)
        with pytest.raises(RuntimeError, match="threshold"):
            model.hidden(np.zeros(2))

    def test_backends_agree_on_nearly_all_bits(self):
        data = datasets.synthetic_blobs(100, dim=32, seed=7)
        real = SplrClassifier(256, 32, threshold=0.15, backend="real")
        fx = SplrClassifier(256, 32, threshold=0.15, backend="fxp16")
        agree = (real.hidden_bits(data.features)
                 == fx.hidden_bits(data.features)).mean()
        assert agree >= 0.99

    def test_bits_are_bitwise_repeatable(self):
        data = datasets.synthetic_blobs(20, dim=8, seed=8)
        model = make_splr(m=64, d=8, threshold=0.1)
        assert np.array_equal(model.hidden_bits(data.features),
                              model.hidden_bits(data.features))

    def test_fxp_single_sample_equals_batch_row(self):
        # The fixed-point path is pure integer math, so slicing one sample
        # out of a batch changes nothing.
        data = datasets.synthetic_blobs(10, dim=8, seed=9)
        model = make_splr(m=64, d=8, backend="fxp16", threshold=0.1)
        batch = model.hidden_bits(data.features)
        for i in range(len(data)):
            assert np.array_equal(model.hidden(data.features[i]), batch[i])

    def test_calibrated_threshold_is_the_median_preactivation(self):
        data = datasets.synthetic_blobs(120, dim=8, seed=10)
        model = SplrClassifier(32, 8)
        theta = model.calibrate_threshold(data, samples=100)
        x = data.features[:100]
        pre = x @ model._row_chunk(0, 32)[0].T / fxp.ONE \
            + model._row_chunk(0, 32)[1] / fxp.ONE
        assert theta == pytest.approx(float(np.median(pre)), abs=1e-12)
        # roughly half the bits fire at the median split
        rate = model.hidden_bits(x).mean()
        assert 0.4 < rate < 0.6


class TestSplrPredict:
    def test_zero_weights_tie_breaks_to_class_zero(self):
        model = make_splr()
        scores, label = model.predict(np.ones(8, dtype=np.uint8))
        assert label == 0
        assert np.all(scores == 0)

    def test_single_active_bit_reads_one_row(self):
        model = make_splr()
        model.w_out = np.arange(24, dtype=np.float64).reshape(8, 3)
        h = np.zeros(8, dtype=np.uint8)
        h[5] = 1
        scores, label = model.predict(h)
        assert np.array_equal(scores, model.w_out[5])
        assert label == 2

    def test_scores_match_matmul_oracle(self):
        rng = np.random.default_rng(11)
        model = make_splr(m=32, d=4, classes=10)
        # exactly representable weights so the comparison is exact
        model.w_out = rng.integers(-2048, 2048, size=(32, 10)) / fxp.ONE
        h = rng.integers(0, 2, size=32).astype(np.uint8)
        scores, label = model.predict(h)
        oracle = h.astype(np.float64) @ model.w_out
        assert np.array_equal(scores, oracle)
        assert label == int(np.argmax(oracle))

    def test_tie_breaks_toward_lowest_index(self):
        model = make_splr()
        model.w_out = np.zeros((8, 3))
        model.w_out[0, 1] = model.w_out[0, 2] = 5.0
        h = np.zeros(8, dtype=np.uint8)
        h[0] = 1
        _, label = model.predict(h)
        assert label == 1

    def test_batch_prediction_matches_per_sample_path(self):
        data = datasets.synthetic_blobs(40, dim=8, seed=12)
        for backend in SplrClassifier.BACKENDS:
            model = make_splr(m=64, d=8, backend=backend, classes=10,
                              threshold=0.1)
            rng = np.random.default_rng(13)
            if backend == "fxp16":
                model.w_out = rng.integers(-300, 300,
                                           size=(64, 10)).astype(np.int16)
            else:
                model.w_out = rng.integers(-300, 300, size=(64, 10)) / fxp.ONE
            batch = model.predict_labels(data.features)
            singles = [model.predict(model.hidden(x))[1]
                       for x in data.features]
            assert batch.tolist() == singles


class TestSplrUpdate:
    def test_error_update_writes_the_two_column_pattern(self):
        # h = [1, 0, 1], true class 0, predicted class 2, step 0.5:
        # active rows gain +0.5 in column 0 and -0.5 in column 2.
        model = make_splr(m=3, d=2, eta=0.5)
        model.apply_error_update(np.array([1, 0, 1], dtype=np.uint8), 0, 2)
        expected = np.array([[0.5, 0.0, -0.5],
                             [0.0, 0.0, 0.0],
                             [0.5, 0.0, -0.5]])
        assert np.array_equal(model.w_out, expected)

    def test_error_update_fxp_writes_the_same_pattern_in_raws(self):
        model = make_splr(m=3, d=2, backend="fxp16", eta=0.5)
        model.apply_error_update(np.array([1, 0, 1], dtype=np.uint8), 0, 2)
        expected = np.array([[128, 0, -128],
                             [0, 0, 0],
                             [128, 0, -128]], dtype=np.int16)
        assert np.array_equal(model.w_out, expected)

    def test_full_step_on_a_crafted_misprediction(self):
        model = make_splr(m=3, d=2, eta=0.5)
        model.w_out[:, 2] = 0.1  # class 2 wins everywhere
        updated, y_hat = model.step_with_hidden(
            np.array([1, 0, 1], dtype=np.uint8), 0)
        assert (updated, y_hat) == (True, 2)
        assert model.w_out[0, 0] == 0.5
        assert model.w_out[0, 2] == pytest.approx(-0.4)
        assert model.w_out[1, 2] == 0.1  # inactive row untouched

    @pytest.mark.parametrize("backend", SplrClassifier.BACKENDS)
    def test_correct_prediction_changes_nothing_bitwise(self, backend):
        model = make_splr(m=4, d=2, backend=backend)
        if backend == "fxp16":
            model.w_out[:, 1] = 64
        else:
            model.w_out[:, 1] = 0.25
        before = model.w_out.tobytes()
        updated, y_hat = model.step_with_hidden(
            np.ones(4, dtype=np.uint8), 1)
        assert (updated, y_hat) == (False, 1)
        assert model.w_out.tobytes() == before

    @pytest.mark.parametrize("backend", SplrClassifier.BACKENDS)
    def test_update_clips_at_the_weight_bound(self, backend):
        model = make_splr(m=2, d=2, backend=backend, eta=0.5, w_max=1.0)
        h = np.ones(2, dtype=np.uint8)
        if backend == "fxp16":
            model.w_out[:, 0] = model.w_max_raw
            model.w_out[:, 1] = -model.w_max_raw
        else:
            model.w_out[:, 0] = 1.0
            model.w_out[:, 1] = -1.0
        model.apply_error_update(h, 0, 1)
        if backend == "fxp16":
            assert np.all(model.w_out[:, 0] == model.w_max_raw)
            assert np.all(model.w_out[:, 1] == -model.w_max_raw)
        else:
            assert np.all(model.w_out[:, 0] == 1.0)
            assert np.all(model.w_out[:, 1] == -1.0)

    def test_update_cost_is_twice_the_active_bit_count(self):
        model = make_splr(m=16, d=4)
        h = np.zeros(16, dtype=np.uint8)
        h[[1, 5, 6, 12, 15]] = 1
        with count_ops(OpCounter()) as counter:
            model.apply_error_update(h, 0, 2)
        update = counter.stage("update")
        assert update.weight_writes == 10 == update.adds
        assert update.mults == 0

    def test_correct_prediction_costs_no_writes(self):
        model = make_splr(m=4, d=2)
        with count_ops(OpCounter()) as counter:
            model.step_with_hidden(np.ones(4, dtype=np.uint8), 0)
        assert counter.stage("update").weight_writes == 0
        assert counter.weight_writes == 0

    @given(st.integers(min_value=0, max_value=10**6),
           st.sampled_from(SplrClassifier.BACKENDS))
    @settings(max_examples=60, deadline=None)
    def test_weights_never_leave_the_clip_box(self, seed, backend):
        rng = np.random.default_rng(seed)
        m, c = 10, 5
        model = SplrClassifier(m, 4, threshold=0.0, eta=0.5, w_max=1.0,
                               backend=backend, classes=c)
        if backend == "fxp16":
            model.w_out = rng.integers(-256, 257, size=(m, c)).astype(np.int16)
            bound = model.w_max_raw
        else:
            model.w_out = rng.uniform(-1.0, 1.0, size=(m, c))
            bound = model.w_max
        for _ in range(25):
            h = rng.integers(0, 2, size=m).astype(np.uint8)
            y, y_hat = rng.integers(0, c, size=2)
            if y == y_hat:
                continue
            model.apply_error_update(h, int(y), int(y_hat))
            assert np.all(np.abs(model.w_out) <= bound)

    @given(st.integers(min_value=0, max_value=10**6))
    @settings(max_examples=100, deadline=None)
    def test_update_never_moves_up_the_loss_gradient(self, seed):
        rng = np.random.default_rng(seed)
        m, c = 12, 4
        model = SplrClassifier(m, 4, threshold=0.0, eta=0.125, w_max=8.0,
                               backend="real", classes=c)
        model.w_out = rng.uniform(-1.0, 1.0, size=(m, c))
        h = rng.integers(0, 2, size=m).astype(np.uint8)
        y = int(rng.integers(0, c))
        before = model.w_out.copy()
        scores, y_hat = model.predict(h)
        model.step_with_hidden(h, y)
        if y_hat == y:
            assert np.array_equal(model.w_out, before)
            return
        grad = wta_grad(h, scores, y, y_hat)
        delta = model.w_out - before
        assert np.all(delta * grad <= 1e-12)
        nz = grad != 0
        assert np.all(delta[nz] * grad[nz] < 0)

    def test_backends_take_identical_trajectories_on_shared_bits(self):
        # With a step size that is exactly representable in Q8.8 the two
        # backends are the same dynamical system; drive both through one
        # bit/label stream and demand bitwise-equal weights throughout.
        m, c, steps = 32, 10, 400
        rng = np.random.default_rng(5)
        bits = rng.integers(0, 2, size=(steps, m)).astype(np.uint8)
        labels = rng.integers(0, c, size=steps)
        real = SplrClassifier(m, 8, threshold=0.0, eta=0.25, w_max=0.5,
                              backend="real", classes=c)
        fx = SplrClassifier(m, 8, threshold=0.0, eta=0.25, w_max=0.5,
                            backend="fxp16", classes=c)
        assert fx.eta_raw == 64  # the step is exact in fixed point
        for h, y in zip(bits, labels):
            res_real = real.step_with_hidden(h, int(y))
            res_fx = fx.step_with_hidden(h, int(y))
            assert res_real == res_fx
        assert np.array_equal(real.w_out, fx.w_out.astype(np.float64) / fxp.ONE)
        assert np.abs(real.w_out).max() == 0.5  # clipping was exercised


class TestWtaLoss:
    def test_zero_scores_give_zero_loss(self):
        assert wta_loss(np.zeros(3), 0, 2) == 0.0

    def test_hand_value(self):
        assert wta_loss(np.array([1.0, 3.0]), 0, 1) == 2.0

    def test_correct_prediction_gives_zero_loss(self):
        assert wta_loss(np.array([5.0, 1.0]), 0, 0) == 0.0

    def test_gradient_rows_vanish_for_inactive_neurons(self):
        h = np.array([1, 0, 1, 0], dtype=np.uint8)
        g = wta_grad(h, np.array([0.0, 2.0, 1.0]), 0, 1)
        assert np.all(g[1] == 0) and np.all(g[3] == 0)
        assert np.all(g[:, 2] == 0)  # untouched class column

    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(21)
        m, c = 5, 4
        h = np.array([1, 1, 0, 1, 0], dtype=np.float64)
        w = rng.normal(size=(m, c))
        y, y_hat = 0, 2
        grad = wta_grad(h, h @ w, y, y_hat)
        eps = 1e-6
        for i in range(m):
            for k in range(c):
                wp, wm = w.copy(), w.copy()
                wp[i, k] += eps
                wm[i, k] -= eps
                num = (wta_loss(h @ wp, y, y_hat)
                       - wta_loss(h @ wm, y, y_hat)) / (2 * eps)
                assert num == pytest.approx(grad[i, k], rel=1e-7, abs=1e-7)

    def test_gradient_integrates_back_to_the_loss_difference(self):
        # The loss is quadratic in the weights, so its directional
        # derivative is linear along a segment and the two-endpoint
        # trapezoid integral of <grad, direction> is exact.
        rng = np.random.default_rng(22)
        m, c = 6, 3
        h = rng.integers(0, 2, size=m).astype(np.float64)
        w0 = rng.normal(size=(m, c))
        w1 = rng.normal(size=(m, c))
        y, y_hat = 1, 2
        d = w1 - w0
        g0 = float(np.sum(wta_grad(h, h @ w0, y, y_hat) * d))
        g1 = float(np.sum(wta_grad(h, h @ w1, y, y_hat) * d))
        diff = wta_loss(h @ w1, y, y_hat) - wta_loss(h @ w0, y, y_hat)
        assert diff == pytest.approx((g0 + g1) / 2, rel=1e-9, abs=1e-9)


class TestTrainingHarness:
    @pytest.mark.parametrize("backend", SplrClassifier.BACKENDS)
    def test_perfect_model_makes_zero_updates(self, backend):
        model = SplrClassifier(8, 4, threshold=-math.inf, backend=backend)
        model.w_out[:, 0] = 256 if backend == "fxp16" else 1.0
        data = Dataset(np.random.default_rng(1).uniform(0, 1, (30, 4)),
                       np.zeros(30, dtype=np.int64))
        before = model.w_out.tobytes()
        stats = train_epoch(model, data, shuffle_seed=0)
        assert stats.updates == 0
        assert stats.correct == 30
        assert stats.accuracy == 1.0
        assert model.w_out.tobytes() == before

    def test_epoch_is_deterministic(self):
        data = datasets.synthetic_blobs(100, dim=8, seed=14)
        runs = []
        for _ in range(2):
            model = SplrClassifier(32, 8, threshold=0.1)
            train_epoch(model, data, shuffle_seed=7)
            runs.append(model.w_out.copy())
        assert np.array_equal(runs[0], runs[1])

    def test_two_sample_hand_trace(self):
        # Both samples fire every neuron; weights start at zero so the
        # first step predicts class 0 and is wrong either way. Which final
        # matrix results depends only on the visit order.
        data = Dataset(np.zeros((2, 2)), np.array([1, 2]))
        model = SplrClassifier(2, 2, threshold=-math.inf, eta=0.25,
                               backend="real", classes=3)
        stats = train_epoch(model, data, shuffle_seed=0)
        assert stats.updates == 2
        assert stats.correct == 0
        order = np.random.default_rng(0).permutation(2).tolist()
        if order == [0, 1]:  # saw label 1, then label 2 (predicted 1)
            expected = np.array([[-0.25, 0.0, 0.25],
                                 [-0.25, 0.0, 0.25]])
        else:                # saw label 2, then label 1 (predicted 2)
            expected = np.array([[-0.25, 0.25, 0.0],
                                 [-0.25, 0.25, 0.0]])
        assert np.array_equal(model.w_out, expected)

    def test_updates_shrink_as_epochs_accumulate(self):
        train = datasets.synthetic_blobs(300, dim=16, seed=15, noise=0.2)
        model = SplrClassifier(128, 16)
        history = train_epochs(model, train, epochs=4, shuffle_seed=3)
        assert model.threshold is not None  # calibrated on entry
        assert history[-1].updates < history[0].updates
        assert history[-1].accuracy > history[0].accuracy

    def test_train_epochs_matches_manual_epoch_loop(self):
        train = datasets.synthetic_blobs(80, dim=8, seed=16)
        auto = SplrClassifier(32, 8, threshold=0.05)
        manual = SplrClassifier(32, 8, threshold=0.05)
        auto_hist = train_epochs(auto, train, epochs=3, shuffle_seed=9)
        manual_hist = [train_epoch(manual, train, shuffle_seed=9 + e)
                       for e in range(3)]
        assert np.array_equal(auto.w_out, manual.w_out)
        assert [s.updates for s in auto_hist] == \
               [s.updates for s in manual_hist]

    def test_streaming_least_squares_runs_through_the_epoch_harness(self):
        train = datasets.synthetic_blobs(60, dim=8, seed=17)
        model = OsElmClassifier(16, 8).init_batch(train)
        stats = train_epoch(model, train, shuffle_seed=1)
        assert stats.updates == len(train)  # every sample folds in
        assert 0 <= stats.correct <= len(train)


class _ConstantPredictor:
    classes = 10

    def predict_labels(self, features):
        return np.zeros(len(features), dtype=np.int64)


class TestEvaluate:
    def test_constant_predictor_scores_ten_percent_on_balanced_data(self):
        data = datasets.synthetic_blobs(200, dim=4, seed=18)  # 20 per class
        metrics = evaluate(_ConstantPredictor(), data)
        assert metrics.accuracy == pytest.approx(0.10)
        assert metrics.confusion[:, 0].sum() == 200
        assert metrics.per_class_recall[0] == 1.0
        assert np.all(metrics.per_class_recall[1:] == 0.0)

    def test_perfect_predictor_yields_diagonal_confusion(self):
        train = datasets.synthetic_blobs(300, dim=16, seed=19, noise=0.02)
        model = ElmClassifier(64, 16).fit(train)
        metrics = evaluate(model, train)
        assert metrics.accuracy == 1.0
        assert np.array_equal(metrics.confusion,
                              np.diag(train.class_counts()))
        assert np.all(metrics.per_class_recall == 1.0)

    def test_accuracy_equals_mean_recall_on_balanced_data(self):
        data = datasets.synthetic_blobs(200, dim=8, seed=20, noise=0.4)
        model = ElmClassifier(32, 8).fit(data)
        metrics = evaluate(model, data)
        assert metrics.accuracy == pytest.approx(
            float(metrics.per_class_recall.mean()), abs=1e-12)

    def test_confusion_rows_sum_to_class_counts(self):
        data = datasets.synthetic_blobs(150, dim=8, seed=21, noise=0.5)
        model = ElmClassifier(16, 8).fit(data)
        metrics = evaluate(model, data)
        assert np.array_equal(metrics.confusion.sum(axis=1),
                              data.class_counts())


class TestCheckpoints:
    def _trained_models(self, tmp_path):
        train = datasets.synthetic_blobs(120, dim=8, seed=23, noise=0.2)
        real = SplrClassifier(32, 8, backend="real")
        train_epochs(real, train, epochs=1, shuffle_seed=0)
        fx = SplrClassifier(32, 8, backend="fxp16")
        train_epochs(fx, train, epochs=1, shuffle_seed=0)
        elm = ElmClassifier(32, 8).fit(train)
        oselm = OsElmClassifier(32, 8).fit_stream(train)
        return train, {"real": real, "fxp16": fx, "elm": elm, "oselm": oselm}

    def test_round_trip_preserves_weights_and_predictions(self, tmp_path):
        train, models = self._trained_models(tmp_path)
        for name, model in models.items():
            path = tmp_path / f"{name}.ckpt"
            save_checkpoint(model, path)
            back = load_checkpoint(path)
            assert np.array_equal(back.w_out, model.w_out)
            assert back.w_out.dtype == model.w_out.dtype
            assert np.array_equal(back.predict_labels(train.features),
                                  model.predict_labels(train.features))

    def test_round_trip_preserves_hyperparameters(self, tmp_path):
        model = SplrClassifier(8, 4, threshold=0.125, eta=0.5, w_max=2.0,
                               base_seed=0xBEEF, backend="fxp16", classes=7)
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        back = load_checkpoint(path)
        assert (back.threshold, back.eta, back.w_max) == (0.125, 0.5, 2.0)
        assert back.plan.base_seed == 0xBEEF
        assert back.classes == 7
        assert back.backend == "fxp16"
        assert np.array_equal(back.w_in_rows() if hasattr(back, "w_in_rows")
                              else back._row_chunk(0, 8)[0],
                              model._row_chunk(0, 8)[0])

    def test_saving_twice_is_byte_identical(self, tmp_path):
        model = make_splr()
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(model, a)
        save_checkpoint(model, b)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        model = make_splr()
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        raw = bytearray(path.read_bytes())
        raw[0] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(ValueError, match="magic"):
            load_checkpoint(path)

    def test_truncated_body_rejected(self, tmp_path):
        model = make_splr()
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(ValueError):
            load_checkpoint(path)

    def test_unknown_backend_tag_rejected(self, tmp_path):
        model = make_splr()
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        raw = bytearray(path.read_bytes())
        raw[8] = 200  # tag byte sits right after the 8-byte magic
        path.write_bytes(bytes(raw))
        with pytest.raises(ValueError, match="tag"):
            load_checkpoint(path)

    def test_unfitted_models_refuse_to_save(self, tmp_path):
        with pytest.raises(RuntimeError):
            save_checkpoint(ElmClassifier(4, 2), tmp_path / "x.ckpt")
        with pytest.raises(RuntimeError):
            save_checkpoint(SplrClassifier(4, 2), tmp_path / "y.ckpt")
