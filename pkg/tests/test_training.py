import numpy as np
import pytest

from lngd.data import generate_dataset
from lngd.decomposition import reconstruct_weights
from lngd.experiments import axis_aligned_spec
from lngd.network import full_batch_gradient, init_network
from lngd.streams import stream
from lngd.training import (
    LabelNoiseSpec,
    RunAborted,
    TrainConfig,
    run_training,
    sample_multipliers,
    train_run,
    train_step,
)


class TestLabelNoiseSpec:
    def test_flip_range_validation(self):
        with pytest.raises(ValueError):
            LabelNoiseSpec.flip(1.5)

    def test_uniform_bounds_validation(self):
        with pytest.raises(ValueError):
            LabelNoiseSpec.uniform(2.0, 2.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            LabelNoiseSpec(kind="laplace")


class TestSampleMultipliers:
    def test_none_is_all_ones(self):
        eps = sample_multipliers(LabelNoiseSpec.none(), 5, None)
        assert np.array_equal(eps, np.ones(5))

    def test_flip_zero_and_one(self):
        rng = np.random.default_rng(0)
        assert np.array_equal(sample_multipliers(LabelNoiseSpec.flip(0.0), 7, rng), np.ones(7))
        assert np.array_equal(sample_multipliers(LabelNoiseSpec.flip(1.0), 7, rng), -np.ones(7))

    def test_flip_count_hoeffding_band(self):
        # |S_- - pn| <= sqrt((n/2) log(4/delta)) in >= 95% of trials at
        # p = 0.1, n = 200, delta = 0.05.
        noise = LabelNoiseSpec.flip(0.1)
        rng = np.random.default_rng(1)
        tau = np.sqrt(100 * np.log(4 / 0.05))
        passes = 0
        trials = 1000
        for _ in range(trials):
            eps = sample_multipliers(noise, 200, rng)
            passes += abs(np.sum(eps == -1.0) - 20) <= tau
        assert passes / trials >= 0.95

    def test_degenerate_gaussian_is_identity(self):
        eps = sample_multipliers(LabelNoiseSpec.gaussian(1.0, 0.0), 4,
                                 np.random.default_rng(2))
        assert np.array_equal(eps, np.ones(4))

    def test_uniform_range(self):
        eps = sample_multipliers(LabelNoiseSpec.uniform(-1.0, 2.0), 1000,
                                 np.random.default_rng(3))
        assert eps.min() >= -1.0 and eps.max() < 2.0


class TestTrainStep:
    def test_matches_gradient_update(self, small_spec, small_dataset):
        net = init_network(small_spec.d, 3, 2, 0.2, np.random.default_rng(1))
        expected = net.weights - 0.3 * full_batch_gradient(
            net, small_dataset, np.ones(len(small_dataset)))
        train_step(net, small_dataset, np.ones(len(small_dataset)), 0.3)
        assert np.array_equal(net.weights, expected)

    def test_zero_learning_rate_is_identity(self, small_spec, small_dataset):
        net = init_network(small_spec.d, 3, 2, 0.2, np.random.default_rng(2))
        before = net.weights.copy()
        train_step(net, small_dataset, np.ones(len(small_dataset)), 0.0)
        assert np.array_equal(net.weights, before)

    def test_one_step_reconstruction_at_scale(self):
        # Post-step weights equal w0 + decomposition reconstruction to 1e-10
        # relative Frobenius error at the reference scale.
        from lngd.decomposition import CoefficientState, update_coefficients

        spec = axis_aligned_spec(2.0, 0.5, 2000)
        ds = generate_dataset(spec, 200, np.random.default_rng(5))
        net = init_network(spec.d, 20, 2, 0.01, np.random.default_rng(6))
        state = CoefficientState.zeros(ds, net)
        eps = sample_multipliers(LabelNoiseSpec.flip(0.1), 200, np.random.default_rng(7))
        ctx = train_step(net, ds, eps, 0.5, step=0)
        update_coefficients(state, ctx, 0.5)
        wp, wm = reconstruct_weights(state, ds)
        rel = np.linalg.norm(np.hstack([wp, wm]) - net.weights) / np.linalg.norm(net.weights)
        assert rel <= 1e-10

    def test_non_finite_abort(self, small_spec, small_dataset):
        net = init_network(small_spec.d, 3, 2, 0.2, np.random.default_rng(3))
        net.weights[0, 0] = np.inf
        with pytest.raises(RunAborted):
            train_step(net, small_dataset, np.ones(len(small_dataset)), 0.1)


class TestTrainConfig:
    def test_validation(self):
        noise = LabelNoiseSpec.none()
        with pytest.raises(ValueError):
            TrainConfig(eta=0.0, steps=10, noise=noise, seed=0)
        with pytest.raises(ValueError):
            TrainConfig(eta=0.1, steps=10, noise=noise, seed=0, log_stride=11)
        with pytest.raises(ValueError):
            TrainConfig(eta=0.1, steps=10, noise=noise, seed=0, n_test=0)


class TestRunTraining:
    def small_run(self, spec, ds, *, steps=30, noise=None, seed=4, eta=0.05):
        noise = noise or LabelNoiseSpec.none()
        net = init_network(spec.d, 3, 2, 0.2, np.random.default_rng(9))
        trace, state = run_training(net, ds, ds, eta=eta, steps=steps, noise=noise,
                                    log_stride=10,
                                    noise_rng=np.random.default_rng(seed))
        return net, trace, state

    def test_zero_steps_logs_initial_row_only(self, small_spec, small_dataset):
        net, trace, state = self.small_run(small_spec, small_dataset, steps=0)
        assert [r.step for r in trace.rows] == [0]
        fresh = init_network(small_spec.d, 3, 2, 0.2, np.random.default_rng(9))
        assert np.array_equal(net.weights, fresh.weights)
        assert state.step == 0

    def test_logged_steps_include_final(self, small_spec, small_dataset):
        _, trace, _ = self.small_run(small_spec, small_dataset, steps=25)
        assert [r.step for r in trace.rows] == [0, 10, 20, 25]

    def test_noisy_equals_clean_without_noise(self, small_spec, small_dataset):
        _, trace, _ = self.small_run(small_spec, small_dataset, steps=20)
        for row in trace.rows:
            assert row.noisy_train_loss == row.clean_train_loss
            assert row.flip_count == 0

    def test_rho_bar_monotone_under_standard_gd(self, small_spec, small_dataset):
        _, trace, _ = self.small_run(small_spec, small_dataset, steps=50)
        assert trace.rho_bar_monotone_violations == 0

    def test_abort_records_step_and_raises(self, small_spec, small_dataset):
        # q = 4 with an absurd step size overflows the forward pass quickly.
        net = init_network(small_spec.d, 3, 4, 0.2, np.random.default_rng(9))
        with pytest.raises(RunAborted) as info:
            run_training(net, small_dataset, small_dataset, eta=1e80, steps=50,
                         noise=LabelNoiseSpec.none(), log_stride=10)
        assert info.value.trace.aborted_at == info.value.step
        assert info.value.trace.aborted_at is not None

    def test_noise_rng_required_for_stochastic_noise(self, small_spec, small_dataset):
        net = init_network(small_spec.d, 3, 2, 0.2, np.random.default_rng(9))
        with pytest.raises(ValueError):
            run_training(net, small_dataset, small_dataset, eta=0.1, steps=5,
                         noise=LabelNoiseSpec.flip(0.5), log_stride=5)


class TestTrainRun:
    def config(self, steps=20, noise=None, seed=11):
        return TrainConfig(eta=0.1, steps=steps, noise=noise or LabelNoiseSpec.flip(0.2),
                           seed=seed, log_stride=10, n_test=50)

    def test_deterministic_traces(self, small_spec):
        a = train_run(self.config(), small_spec, n=10, m=3, q=2, sigma_0=0.1)
        b = train_run(self.config(), small_spec, n=10, m=3, q=2, sigma_0=0.1)
        assert np.array_equal(a[0].weights, b[0].weights)
        assert a[1].rows == b[1].rows

    def test_changing_steps_preserves_dataset_stream(self, small_spec):
        # The data stream is independent of T: more steps, same dataset.
        short = train_run(self.config(steps=10), small_spec, n=10, m=3, q=2, sigma_0=0.1)
        long = train_run(self.config(steps=30), small_spec, n=10, m=3, q=2, sigma_0=0.1)
        ds_short = generate_dataset(small_spec, 10, stream(11, "data"))
        assert np.array_equal(ds_short.labels, ds_short.labels)
        assert short[1].rows[0].clean_train_loss == long[1].rows[0].clean_train_loss

    def test_standard_gd_run_with_ones_noise_matches_none(self, small_spec):
        a = train_run(self.config(noise=LabelNoiseSpec.flip(0.0)), small_spec,
                      n=10, m=3, q=2, sigma_0=0.1)
        b = train_run(self.config(noise=LabelNoiseSpec.none()), small_spec,
                      n=10, m=3, q=2, sigma_0=0.1)
        assert np.array_equal(a[0].weights, b[0].weights)
        for ra, rb in zip(a[1].rows, b[1].rows):
            assert ra.clean_train_loss == rb.clean_train_loss
            assert ra.test_error_01 == rb.test_error_01
