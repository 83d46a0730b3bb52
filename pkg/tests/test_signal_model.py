import numpy as np
import pytest
from scipy import stats

from csbp.errors import ParameterError
from csbp.signal_model import (
    MixturePrior,
    MultiLevelPrior,
    add_noise,
    derive_sigma2,
    sample_multilevel_signal,
    sample_signal,
)

PRIOR = MixturePrior(s=0.1, sigma0=1.0, sigma1=10.0)


class TestMixturePrior:
    def test_invariants_enforced(self):
        with pytest.raises(ParameterError):
            MixturePrior(s=0.0, sigma0=1.0, sigma1=10.0)
        with pytest.raises(ParameterError):
            MixturePrior(s=1.0, sigma0=1.0, sigma1=10.0)
        with pytest.raises(ParameterError):
            MixturePrior(s=0.1, sigma0=2.0, sigma1=1.0)

    def test_second_moment_value(self):
        # s*sigma1^2 + (1-s)*sigma0^2 = 0.1*100 + 0.9*1
        assert PRIOR.second_moment == pytest.approx(10.9, abs=1e-12)


class TestSampleSignal:
    def test_energy_matches_analytic_second_moment(self):
        # mean of ||x||^2 over many seeds vs N * E[X^2] = 10900
        n, n_seeds = 1000, 10_000
        total = 0.0
        for seed in range(n_seeds):
            total += float((sample_signal(PRIOR, n, seed).x ** 2).sum())
        mean_energy = total / n_seeds
        assert abs(mean_energy - 10900.0) / 10900.0 < 0.01

    def test_empty_signal_rejected(self):
        with pytest.raises(ParameterError):
            sample_signal(PRIOR, 0, 1)

    def test_deterministic_in_seed(self):
        a = sample_signal(PRIOR, 1000, 7)
        b = sample_signal(PRIOR, 1000, 7)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.q, b.q)
        c = sample_signal(PRIOR, 1000, 8)
        assert not np.array_equal(a.x, c.x)

    def test_state_frequency_within_three_standard_errors(self):
        n = 200_000
        sig = sample_signal(PRIOR, n, 3)
        se = np.sqrt(PRIOR.s * (1 - PRIOR.s) / n)
        assert abs(sig.q.mean() - PRIOR.s) < 3 * se

    def test_per_coordinate_second_moment(self):
        # sd of X^2 is ~53.7, so 4e6 draws put 3 standard errors inside 1%
        sig = sample_signal(PRIOR, 4_000_000, 5)
        assert abs((sig.x**2).mean() - 10.9) / 10.9 < 0.01


class TestDeriveSigma2:
    def test_two_component_value(self):
        # sqrt((100 - 1) / 1)
        assert derive_sigma2(PRIOR, 2) == pytest.approx(np.sqrt(99.0), rel=1e-12)

    def test_three_component_value(self):
        # sqrt((100 - 1) / (1 + 4))
        assert derive_sigma2(PRIOR, 3) == pytest.approx(np.sqrt(99.0 / 5.0), rel=1e-12)

    def test_vanishing_gap_gives_zero_amplitude(self):
        # the sigma1 -> sigma0 limit leaves no energy above background
        near = MixturePrior(s=0.1, sigma0=1.0, sigma1=1.0 + 1e-12)
        assert derive_sigma2(near, 3) < 1e-5

    def test_component_count_validated(self):
        with pytest.raises(ParameterError):
            derive_sigma2(PRIOR, 1)


class TestMultiLevelSignal:
    def test_two_component_matches_two_state_distribution(self):
        # C=2 with sigma1^2 = sigma0^2 + sigma2^2 must match in distribution
        sigma2 = derive_sigma2(PRIOR, 2)
        ml = MultiLevelPrior(s=0.1, c=2, sigma0=1.0, sigma2=sigma2)
        n = 100_000
        a = sample_multilevel_signal(ml, n, 11).x
        b = sample_signal(PRIOR, n, 12).x
        stat = stats.ks_2samp(a, b).statistic
        crit = 1.6276 * np.sqrt(2.0 / n)  # two-sample 1% critical value
        assert stat < crit

    def test_active_fraction_three_components(self):
        # P(any level active) = 1 - (1 - 0.1)^2 = 0.19
        ml = MultiLevelPrior(s=0.1, c=3, sigma0=1.0, sigma2=derive_sigma2(PRIOR, 3))
        sig = sample_multilevel_signal(ml, 100_000, 21)
        assert abs((sig.q > 0).mean() - 0.19) < 0.01

    def test_energy_preserved_by_derived_amplitude(self):
        # 4e6 draws keep 3 standard errors of the mean inside the 1% band
        for c in (2, 3, 5):
            ml = MultiLevelPrior(s=0.1, c=c, sigma0=1.0, sigma2=derive_sigma2(PRIOR, c))
            sig = sample_multilevel_signal(ml, 4_000_000, 31 + c)
            assert abs((sig.x**2).mean() - 10.9) / 10.9 < 0.01

    def test_effective_rate_cap_enforced(self):
        with pytest.raises(ParameterError):
            MultiLevelPrior(s=0.25, c=5, sigma0=1.0, sigma2=1.0)

    def test_deterministic_in_seed(self):
        ml = MultiLevelPrior(s=0.1, c=3, sigma0=1.0, sigma2=4.0)
        assert np.array_equal(
            sample_multilevel_signal(ml, 500, 9).x, sample_multilevel_signal(ml, 500, 9).x
        )


class TestAddNoise:
    def test_zero_variance_is_identity(self):
        y = np.arange(10.0)
        assert add_noise(y, 0.0, 4) is y

    def test_noise_variance_reference_scale(self):
        # reference level: a row of weight 20 picks up variance 18 from the
        # small coefficients; the sampled noise must match its variance to 1%
        y = np.zeros(1_000_000)
        z = add_noise(y, 18.0, 13)
        assert abs(z.var() - 18.0) / 18.0 < 0.01

    def test_deterministic_in_seed(self):
        y = np.zeros(100)
        assert np.array_equal(add_noise(y, 2.0, 5), add_noise(y, 2.0, 5))

    def test_negative_variance_rejected(self):
        with pytest.raises(ParameterError):
            add_noise(np.zeros(3), -1.0, 0)
