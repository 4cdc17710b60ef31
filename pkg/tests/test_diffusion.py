import math

import numpy as np
import pytest

from qfusion.autodiff import Tensor
from qfusion.diffusion import (
    CategoricalVar,
    NoiseSchedule,
    ScheduleError,
    ce_loss,
    cosine_schedule,
    posterior_probs_array,
    posterior_step,
    posterior_step_array,
    q_sample,
    q_sample_array,
    sample_categorical,
)


def tv_distance(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


class TestSchedule:
    def test_cosine_defaults(self):
        sched = cosine_schedule()
        keep = sched.keep_probabilities
        assert sched.total_steps == 32
        assert keep[0] == 1.0
        assert np.all(np.diff(keep) < 0)
        assert keep[-1] <= 0.02

    def test_terminal_marginal_close_to_uniform(self):
        sched = cosine_schedule()
        for k in (2, 23, 100):
            tv = sched.keep(sched.total_steps) * (1 - 1 / k)
            assert tv <= 0.02

    def test_invalid_schedules(self):
        with pytest.raises(ScheduleError):
            NoiseSchedule(np.array([0.9, 0.5, 0.01]))  # keep[0] != 1
        with pytest.raises(ScheduleError):
            NoiseSchedule(np.array([1.0, 0.5, 0.5, 0.01]))  # not strictly decreasing
        with pytest.raises(ScheduleError):
            NoiseSchedule(np.array([1.0, 0.5, 0.1]))  # terminal too high
        with pytest.raises(ScheduleError):
            NoiseSchedule(np.array([1.0, 0.5, 0.0]))  # keep must stay positive

    def test_step_range_checked(self):
        sched = cosine_schedule(8)
        rng = np.random.default_rng(0)
        var = CategoricalVar(4, 1)
        with pytest.raises(ScheduleError):
            q_sample(var, 0, sched, rng)
        with pytest.raises(ScheduleError):
            q_sample(var, 9, sched, rng)


class TestQSample:
    def test_keep_probability_one_returns_x0(self):
        keep = np.concatenate([[1.0, 1.0 - 1e-15], np.linspace(0.5, 0.01, 3)])
        sched = NoiseSchedule(keep)
        rng = np.random.default_rng(1)
        draws = q_sample_array(np.full(10000, 3), 23, 1, sched, rng)
        assert np.all(draws == 3)

    def test_terminal_tv_to_uniform(self):
        sched = cosine_schedule()
        rng = np.random.default_rng(18)
        k = 23
        draws = q_sample_array(np.full(10000, 7), k, sched.total_steps, sched, rng)
        empirical = np.bincount(draws, minlength=k) / draws.size
        assert tv_distance(empirical, np.full(k, 1 / k)) <= 0.02

    def test_mid_schedule_closed_form(self):
        sched = cosine_schedule()
        k = 23
        for t, seed in ((8, 0), (16, 1), (24, 2)):
            rng = np.random.default_rng(seed)
            draws = q_sample_array(np.full(10000, 5), k, t, sched, rng)
            p = sched.keep(t) + (1 - sched.keep(t)) / k
            sigma = math.sqrt(p * (1 - p) / draws.size)
            assert abs((draws == 5).mean() - p) <= 3 * sigma

    def test_scalar_wrapper(self):
        sched = cosine_schedule()
        rng = np.random.default_rng(3)
        out = q_sample(CategoricalVar(23, 4), 16, sched, rng)
        assert isinstance(out, CategoricalVar) and 0 <= out.value < 23


class TestPosterior:
    def test_oracle_denoiser_recovers_x0(self):
        sched = cosine_schedule()
        rng = np.random.default_rng(4)
        k, target = 5, 3
        logits = np.full((1, k), -40.0)
        logits[0, target] = 40.0
        hits = 0
        for _ in range(200):
            x = np.array([rng.integers(k)])
            for t in range(sched.total_steps, 0, -1):
                x = posterior_step_array(logits, x, t, sched, rng)
            hits += int(x[0] == target)
        assert hits / 200 >= 0.99

    def test_uniform_logits_at_terminal_step(self):
        sched = cosine_schedule()
        rng = np.random.default_rng(6)
        k = 10
        logits = np.zeros((10000, k))
        xt = rng.integers(0, k, size=10000)
        out = posterior_step_array(logits, xt, sched.total_steps, sched, rng)
        empirical = np.bincount(out, minlength=k) / out.size
        assert tv_distance(empirical, np.full(k, 1 / k)) <= 0.02

    def test_exact_denoiser_chain_matches_enumeration(self):
        # K=4, T=4 chain: the reverse chain with the exact Bayes denoiser
        # must reproduce the data distribution. Oracle = exact forward-chain
        # enumeration (marginals and Bayes-reversal transition matrices).
        k, steps = 4, 4
        sched = cosine_schedule(steps)
        p_data = np.array([0.5, 0.25, 0.15, 0.10])

        def marginal(t):
            keep = sched.keep(t) if t >= 1 else 1.0
            return keep * p_data + (1 - keep) / k

        def x0_posterior_logits(xt, t):
            keep = sched.keep(t)
            lik = np.full(k, (1 - keep) / k)
            lik[xt] += keep
            post = p_data * lik
            return np.log(post / post.sum())

        # Oracle: propagate an exact distribution through the true reverse
        # kernel P(x_{t-1}=j | x_t=i) = q(x_t=i|x_{t-1}=j) m_{t-1}(j) / m_t(i).
        dist = np.full(k, 1 / k)
        for t in range(steps, 0, -1):
            step_keep = sched.step_keep(t)
            m_prev = marginal(t - 1)
            m_t = marginal(t)
            new = np.zeros(k)
            for i in range(k):
                trans = np.full(k, (1 - step_keep) / k) * m_prev
                trans[i] += step_keep * m_prev[i]
                new += dist[i] * trans / m_t[i]
            dist = new / new.sum()
        assert tv_distance(dist, p_data) <= 0.05

        rng = np.random.default_rng(7)
        finals = np.empty(10000, dtype=int)
        for run in range(10000):
            x = int(rng.integers(k))
            for t in range(steps, 0, -1):
                logits = x0_posterior_logits(x, t).reshape(1, -1)
                x = int(posterior_step_array(logits, np.array([x]), t, sched, rng)[0])
            finals[run] = x
        empirical = np.bincount(finals, minlength=k) / finals.size
        assert tv_distance(empirical, p_data) <= 0.05
        assert tv_distance(empirical, dist) <= 0.05

    def test_t1_samples_from_logits_directly(self):
        sched = cosine_schedule()
        rng = np.random.default_rng(8)
        logits = np.log(np.array([[0.7, 0.2, 0.1]]))
        draws = [
            int(posterior_step_array(logits, np.array([2]), 1, sched, rng)[0])
            for _ in range(5000)
        ]
        freq = np.bincount(draws, minlength=3) / 5000
        assert tv_distance(freq, [0.7, 0.2, 0.1]) <= 0.03

    def test_scalar_wrapper_and_errors(self):
        sched = cosine_schedule()
        rng = np.random.default_rng(9)
        out = posterior_step(np.zeros(6), CategoricalVar(6, 2), 3, sched, rng)
        assert isinstance(out, CategoricalVar)
        with pytest.raises(ValueError):
            posterior_step(np.array([np.inf, 0.0]), CategoricalVar(2, 0), 3, sched, rng)
        with pytest.raises(ValueError):
            posterior_step(np.zeros(3), CategoricalVar(2, 0), 3, sched, rng)

    def test_posterior_probs_normalized(self):
        sched = cosine_schedule()
        rng = np.random.default_rng(10)
        logits = rng.standard_normal((7, 5))
        xt = rng.integers(0, 5, size=7)
        probs = posterior_probs_array(logits, xt, 12, sched)
        assert np.allclose(probs.sum(axis=-1), 1.0)
        assert np.all(probs >= 0)


class TestCeLoss:
    def test_uniform_logits(self):
        for k in (2, 23):
            assert abs(ce_loss(np.zeros(k), CategoricalVar(k, 0)) - math.log(k)) < 1e-12

    def test_one_hot_limit(self):
        logits = np.full(23, -100.0)
        logits[11] = 100.0
        assert ce_loss(logits, CategoricalVar(23, 11)) < 1e-9

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            ce_loss(np.array([np.nan, 0.0]), CategoricalVar(2, 0))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        k = 23
        logits = rng.standard_normal(k)
        target = CategoricalVar(k, 7)
        t = Tensor(logits, requires_grad=True)
        loss = ce_loss(t, target)
        loss.backward()
        grad = t.grad.reshape(-1)
        h = 1e-4
        for i in range(k):
            bumped_plus, bumped_minus = logits.copy(), logits.copy()
            bumped_plus[i] += h
            bumped_minus[i] -= h
            numeric = (ce_loss(bumped_plus, target) - ce_loss(bumped_minus, target)) / (2 * h)
            assert abs(grad[i] - numeric) <= 1e-6

    def test_tensor_and_array_paths_agree(self):
        rng = np.random.default_rng(12)
        logits = rng.standard_normal(9)
        val_arr = ce_loss(logits, CategoricalVar(9, 4))
        val_tensor = float(ce_loss(Tensor(logits, requires_grad=True), CategoricalVar(9, 4)).data)
        assert abs(val_arr - val_tensor) < 1e-12


class TestSampleCategorical:
    def test_respects_masking(self):
        rng = np.random.default_rng(13)
        logits = np.array([0.0, float("-inf"), 0.0, float("-inf")])
        draws = {sample_categorical(logits, rng) for _ in range(200)}
        assert draws <= {0, 2}

    def test_all_masked_raises(self):
        rng = np.random.default_rng(14)
        with pytest.raises(ValueError):
            sample_categorical(np.array([float("-inf")] * 3), rng)
