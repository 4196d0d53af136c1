"""Softmax policy: log-probs, sampling, gradients, entropy.

Scalar expectations are recomputed with mpmath at 50 digits; gradient checks
use central finite differences with step 1e-5.
"""

import math

import mpmath as mp
import numpy as np
import pytest

from preflab import (
    ContractError,
    Policy,
    PromptRecord,
    UniverseConfig,
    exact_entropy,
    generate_universe,
    grad_log_prob,
    log_prob,
    log_prob_vector,
    logits,
    response_probabilities,
    sample_response,
)


def record_from_features(features):
    features = np.asarray(features, dtype=np.float64)
    return PromptRecord(
        prompt_id=0,
        role="train",
        features=features,
        true_reward=np.zeros(features.shape[0]),
    )


TWO_LOGIT_RECORD = record_from_features(np.eye(2))
TWO_LOGIT_POLICY = Policy(np.array([0.7, -0.1]))


def mp_log_softmax(values, index):
    with mp.workdps(50):
        exps = [mp.e ** mp.mpf(v) for v in values]
        return float(mp.mpf(values[index]) - mp.log(mp.fsum(exps)))


class TestLogits:
    def test_zero_theta_gives_zero_logits(self, small_universe):
        p = Policy(np.zeros(small_universe.config.feature_dim))
        np.testing.assert_array_equal(logits(p, small_universe.prompts[0]), 0.0)

    def test_one_hot_features_select_coordinates(self):
        np.testing.assert_array_equal(
            logits(TWO_LOGIT_POLICY, TWO_LOGIT_RECORD), [0.7, -0.1]
        )

    def test_matches_high_precision_dot_product(self, rng):
        features = rng.normal(size=(5, 7))
        theta = rng.normal(size=7)
        got = logits(Policy(theta), record_from_features(features))
        with mp.workdps(50):
            for y in range(5):
                want = mp.fsum(mp.mpf(a) * mp.mpf(b) for a, b in zip(theta, features[y]))
                assert abs(got[y] - float(want)) < 1e-12

    def test_dimension_mismatch_rejected(self, small_universe):
        with pytest.raises(ContractError, match="dim"):
            logits(Policy(np.zeros(3)), small_universe.prompts[0])


class TestLogProb:
    def test_uniform_is_minus_log_v(self):
        record = record_from_features(np.eye(4))
        p = Policy(np.zeros(4))
        for y in range(4):
            assert log_prob(p, record, y) == pytest.approx(-math.log(4), abs=1e-15)

    def test_two_logit_oracle_value(self):
        # mpmath oracle: 0.7 - log(e^0.7 + e^-0.1)
        want = mp_log_softmax([0.7, -0.1], 0)
        assert want == pytest.approx(-0.3711006659477777, abs=1e-15)
        assert log_prob(TWO_LOGIT_POLICY, TWO_LOGIT_RECORD, 0) == pytest.approx(
            want, abs=1e-12
        )

    def test_normalization_to_1e12(self, small_universe, rng):
        for record in small_universe.prompts:
            p = Policy(rng.normal(scale=3.0, size=small_universe.config.feature_dim))
            total = np.sum(np.exp(log_prob_vector(p, record)))
            assert abs(total - 1.0) < 1e-12

    def test_out_of_range_response_rejected(self):
        with pytest.raises(ContractError, match="out of range"):
            log_prob(TWO_LOGIT_POLICY, TWO_LOGIT_RECORD, 2)


class TestSampling:
    def test_point_mass_always_sampled(self, rng):
        record = record_from_features(np.eye(3))
        p = Policy(np.array([0.0, 1e6, 0.0]))
        assert all(sample_response(p, record, rng) == 1 for _ in range(50))

    def test_uniform_frequencies_within_5_se(self):
        record = record_from_features(np.eye(4))
        p = Policy(np.zeros(4))
        rng = np.random.default_rng(99)
        n = 100_000
        counts = np.bincount([sample_response(p, record, rng) for _ in range(n)], minlength=4)
        se = math.sqrt(0.25 * 0.75 / n)
        np.testing.assert_allclose(counts / n, 0.25, atol=5 * se)

    def test_fixed_seed_reproduces_sequence(self, small_universe):
        p = Policy(np.linspace(-1, 1, small_universe.config.feature_dim))
        record = small_universe.prompts[0]
        rng1, rng2 = np.random.default_rng(12), np.random.default_rng(12)
        a = [sample_response(p, record, rng1) for _ in range(20)]
        b = [sample_response(p, record, rng2) for _ in range(20)]
        assert a == b


class TestGradient:
    def test_uniform_two_response_gradient(self):
        record = record_from_features(np.eye(2))
        p = Policy(np.zeros(2))
        np.testing.assert_allclose(grad_log_prob(p, record, 0), [0.5, -0.5], atol=1e-15)

    def test_point_mass_gradient_vanishes(self):
        record = record_from_features(np.eye(3))
        p = Policy(np.array([200.0, 0.0, 0.0]))
        np.testing.assert_allclose(grad_log_prob(p, record, 0), 0.0, atol=1e-12)

    def test_finite_difference_agreement_100_instances(self):
        gen = np.random.default_rng(31)
        step = 1e-5
        for _ in range(100):
            d = int(gen.integers(2, 17))
            v = int(gen.integers(2, 9))
            features = gen.normal(size=(v, d))
            theta = gen.normal(size=d)
            y = int(gen.integers(v))
            record = record_from_features(features)
            analytic = grad_log_prob(Policy(theta), record, y)
            fd = np.zeros(d)
            for i in range(d):
                e = np.zeros(d)
                e[i] = step
                fd[i] = (
                    log_prob(Policy(theta + e), record, y)
                    - log_prob(Policy(theta - e), record, y)
                ) / (2 * step)
            # floor guards saturated instances whose gradient norm is below
            # the finite-difference noise floor
            denom = max(np.linalg.norm(fd), 1e-3)
            assert np.linalg.norm(analytic - fd) / denom <= 1e-6

    def test_expected_gradient_is_zero(self, small_universe, rng):
        # sum_y pi(y|x) grad_log_prob(y) = 0
        p = Policy(rng.normal(size=small_universe.config.feature_dim))
        for record in small_universe.prompts[:6]:
            probs = response_probabilities(p, record)
            total = sum(
                probs[y] * grad_log_prob(p, record, y)
                for y in range(record.features.shape[0])
            )
            np.testing.assert_allclose(total, 0.0, atol=1e-9)


class TestEntropy:
    def test_uniform_entropy_is_log_v(self):
        record = record_from_features(np.eye(4))
        assert exact_entropy(Policy(np.zeros(4)), record) == pytest.approx(
            math.log(4), abs=1e-15
        )

    def test_point_mass_entropy_is_zero(self):
        record = record_from_features(np.eye(3))
        assert exact_entropy(Policy(np.array([500.0, 0.0, 0.0])), record) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_two_logit_oracle_value(self):
        with mp.workdps(50):
            z = [mp.mpf("0.7"), mp.mpf("-0.1")]
            total = mp.fsum(mp.e**v for v in z)
            probs = [mp.e**v / total for v in z]
            want = float(-mp.fsum(p * mp.log(p) for p in probs))
        assert want == pytest.approx(0.6191210810456878, abs=1e-15)
        assert exact_entropy(TWO_LOGIT_POLICY, TWO_LOGIT_RECORD) == pytest.approx(
            want, abs=1e-12
        )

    def test_range(self, small_universe, rng):
        v = small_universe.config.responses_per_prompt
        for record in small_universe.prompts[:8]:
            p = Policy(rng.normal(scale=5.0, size=small_universe.config.feature_dim))
            h = exact_entropy(p, record)
            assert -1e-12 <= h <= math.log(v) + 1e-12


class TestShiftInvariance:
    def test_uniform_logit_shift_changes_nothing(self, tabular_universe):
        # shifting one prompt's theta block shifts all its logits by the same
        # constant; distribution, entropy, and samples must be unchanged
        cfg = tabular_universe.config
        v = cfg.responses_per_prompt
        record = tabular_universe.prompts[1]
        gen = np.random.default_rng(8)
        theta = gen.normal(size=cfg.feature_dim)
        shifted = theta.copy()
        shifted[1 * v : 2 * v] += 3.7
        a, b = Policy(theta), Policy(shifted)
        np.testing.assert_allclose(
            log_prob_vector(a, record), log_prob_vector(b, record), atol=1e-12
        )
        assert abs(exact_entropy(a, record) - exact_entropy(b, record)) < 1e-12
        rng1, rng2 = np.random.default_rng(3), np.random.default_rng(3)
        assert [sample_response(a, record, rng1) for _ in range(30)] == [
            sample_response(b, record, rng2) for _ in range(30)
        ]


class TestPolicyValue:
    def test_non_finite_theta_rejected(self):
        with pytest.raises(ContractError, match="finite"):
            Policy(np.array([1.0, np.nan]))

    def test_checkpoint_roundtrip(self):
        p = Policy(np.array([0.25, -1.5, 3.0]), label="step-7")
        restored = Policy.from_json_dict(p.to_json_dict())
        assert restored.label == "step-7"
        np.testing.assert_array_equal(restored.theta, p.theta)
