import numpy as np
import pytest

from csbp.errors import DegenerateMessageError, ParameterError, RangeError
from csbp.grid_pdf import (
    Grid,
    clamped,
    convolve,
    convolve_direct,
    default_grid,
    from_gaussian,
    from_prior,
    from_values,
    l1_distance,
    moments,
    multiply,
    paper_grid,
    reflect,
    shift,
    spike,
    uniform,
)
from csbp.rng import make_rng
from csbp.signal_model import MixturePrior

PRIOR = MixturePrior(s=0.1, sigma0=1.0, sigma1=10.0)


def truncated_gaussian_moments(mean, var, half_width, fine_steps=200_001):
    """Quadrature oracle on a much finer grid (truncated-Gaussian semantics)."""
    t = np.linspace(-half_width, half_width, fine_steps)
    w = np.exp(-((t - mean) ** 2) / (2 * var))
    w /= w.sum()
    mu = float(t @ w)
    return mu, float(((t - mu) ** 2) @ w)


class TestGrid:
    def test_validation(self):
        with pytest.raises(ParameterError):
            Grid(p=4, delta=0.5)
        with pytest.raises(ParameterError):
            Grid(p=5, delta=0.0)

    def test_paper_preset(self):
        g = paper_grid(PRIOR)
        assert g.p == 525 and g.delta == 0.5

    def test_default_grid_covers_six_sigma(self):
        g = default_grid(PRIOR)
        assert g.delta == 0.5
        assert g.half_width >= 6 * PRIOR.sigma1 - g.delta
        # odd and 7-smooth
        assert g.p % 2 == 1
        k = g.p
        for f in (3, 5, 7):
            while k % f == 0:
                k //= f
        assert k == 1

    def test_spacing_below_sigma0_enforced(self):
        with pytest.raises(ParameterError):
            default_grid(PRIOR, delta=1.0)


class TestFromGaussian:
    def test_moments_match_quadrature_oracle(self):
        g = Grid(p=525, delta=0.5)
        f = from_gaussian(g, 0.0, 1.0)
        mean, var, _ = moments(f)
        oracle_mean, oracle_var = truncated_gaussian_moments(0.0, 1.0, g.half_width)
        assert abs(mean - oracle_mean) < 1e-12
        assert abs(var - 1.0) / 1.0 < 0.005
        assert abs(var - oracle_var) < 5e-4

    def test_mean_outside_range_rejected(self):
        g = Grid(p=11, delta=0.5)
        with pytest.raises(RangeError):
            from_gaussian(g, 10.0, 1.0)

    def test_wide_variance_still_normalized(self):
        g = Grid(p=101, delta=0.5)
        f = from_gaussian(g, 0.0, 1e6)
        assert abs(f.values.sum() * g.delta - 1.0) < 1e-9

    def test_refinement_converges(self):
        # same spacing, growing support: variance approaches the untruncated value
        errs = []
        for p in (101, 201, 401):
            f = from_gaussian(Grid(p=p, delta=0.1), 0.0, 4.0)
            errs.append(abs(moments(f)[1] - 4.0))
        assert errs[0] > errs[1] > errs[2] or errs[2] < 1e-9


class TestFromPrior:
    def test_degenerate_sparsity_limits(self):
        g = Grid(p=243, delta=0.5)
        lo = from_prior(g, MixturePrior(s=1e-12, sigma0=1.0, sigma1=10.0))
        assert l1_distance(lo, from_gaussian(g, 0.0, 1.0)) < 1e-9
        hi = from_prior(g, MixturePrior(s=1.0 - 1e-12, sigma0=1.0, sigma1=10.0))
        assert l1_distance(hi, from_gaussian(g, 0.0, 100.0)) < 1e-9

    def test_mixture_variance(self):
        f = from_prior(Grid(p=525, delta=0.5), PRIOR)
        assert abs(moments(f)[1] - 10.9) / 10.9 < 0.01


class TestMultiply:
    def test_uniform_is_identity(self):
        g = Grid(p=129, delta=0.25)
        f = from_gaussian(g, 0.5, 2.0)
        np.testing.assert_allclose(multiply(f, uniform(g)).values, f.values, atol=1e-12)

    def test_gaussian_product_halves_variance(self):
        v = 4.0
        g = Grid(p=257, delta=np.sqrt(v) / 4)
        f = from_gaussian(g, 0.0, v)
        _, var, _ = moments(multiply(f, f))
        assert abs(var - v / 2) / (v / 2) < 0.01

    def test_argmax_preserved(self):
        g = Grid(p=129, delta=0.25)
        f = from_gaussian(g, 3.0, 1.0)
        assert moments(multiply(f, f))[2] == moments(f)[2]

    def test_disjoint_supports_degenerate(self):
        g = Grid(p=65, delta=0.5)
        a = np.zeros(65)
        a[:5] = 1.0
        b = np.zeros(65)
        b[-5:] = 1.0
        with pytest.raises(DegenerateMessageError):
            multiply(from_values(g, a), from_values(g, b))

    def test_commutative_associative(self):
        g = Grid(p=129, delta=0.25)
        rng = make_rng(3)
        f1 = from_values(g, rng.random(129))
        f2 = from_values(g, rng.random(129))
        f3 = from_values(g, rng.random(129))
        np.testing.assert_allclose(
            multiply(f1, f2).values, multiply(f2, f1).values, atol=1e-12
        )
        np.testing.assert_allclose(
            multiply(multiply(f1, f2), f3).values,
            multiply(f1, multiply(f2, f3)).values,
            atol=1e-9,
        )


class TestConvolve:
    def test_gaussian_variances_add(self):
        a2, b2 = 1.0, 2.25
        g = Grid(p=401, delta=0.25)  # 3*sqrt(a2+b2) well inside the range
        f = convolve(from_gaussian(g, 0.0, a2), from_gaussian(g, 0.0, b2))
        assert abs(moments(f)[1] - (a2 + b2)) / (a2 + b2) < 0.01

    def test_spike_is_identity(self):
        g = Grid(p=129, delta=0.5)
        f = from_gaussian(g, 1.0, 2.0)
        out = convolve(f, spike(g, 0.0))
        assert l1_distance(out, f) < 1e-9

    def test_fft_matches_direct_reference(self):
        g = Grid(p=129, delta=0.25)
        rng = make_rng(17)
        for _ in range(100):
            a = from_values(g, rng.random(129))
            b = from_values(g, rng.random(129))
            fa, fb = convolve(a, b), convolve_direct(a, b)
            scale = fb.values.max()
            assert np.abs(fa.values - fb.values).max() <= 1e-9 * scale

    def test_spike_convolution_is_index_addition(self):
        g = Grid(p=64 * 2 + 1, delta=0.5)
        out = convolve(spike(g, 3 * 0.5), spike(g, -1 * 0.5))
        expect = spike(g, 2 * 0.5)
        assert np.argmax(out.values) == np.argmax(expect.values)

    def test_commutative(self):
        g = Grid(p=129, delta=0.25)
        rng = make_rng(23)
        a = from_values(g, rng.random(129))
        b = from_values(g, rng.random(129))
        np.testing.assert_allclose(convolve(a, b).values, convolve(b, a).values, atol=1e-12)

    def test_clipped_mass_reported(self):
        # mass pushed past the boundary by a wide convolution is accounted
        g = Grid(p=65, delta=0.5)
        wide = from_gaussian(g, 0.0, 200.0)
        out = convolve(wide, wide)
        assert out.clipped_mass > 0.01


class TestReflectShift:
    def test_reflect_symmetric_unchanged(self):
        g = Grid(p=129, delta=0.5)
        f = from_gaussian(g, 0.0, 4.0)
        np.testing.assert_array_equal(reflect(f).values, f.values)

    def test_reflect_moves_spike(self):
        g = Grid(p=65, delta=0.5)
        assert np.argmax(reflect(spike(g, 3 * 0.5)).values) == np.argmax(
            spike(g, -3 * 0.5).values
        )

    def test_reflect_negates_mean(self):
        g = Grid(p=257, delta=0.25)
        f = from_gaussian(g, 1.75, 2.0)
        assert moments(reflect(f))[0] == pytest.approx(-moments(f)[0], abs=1e-12)

    def test_reflect_involution(self):
        g = Grid(p=65, delta=0.5)
        f = from_gaussian(g, 2.0, 1.0)
        np.testing.assert_array_equal(reflect(reflect(f)).values, f.values)

    def test_shift_zero_identity(self):
        g = Grid(p=65, delta=0.5)
        f = from_gaussian(g, 0.0, 1.0)
        assert shift(f, 0.0) is f

    def test_shift_spike_whole_bins(self):
        g = Grid(p=65, delta=0.5)
        out = shift(spike(g, 0.0), 3 * 0.5)
        assert np.argmax(out.values) == np.argmax(spike(g, 3 * 0.5).values)

    def test_shift_round_trip_whole_bins(self):
        g = Grid(p=257, delta=0.25)
        f = from_gaussian(g, 0.0, 2.0)
        back = shift(shift(f, 5 * 0.25), -5 * 0.25)
        assert l1_distance(back, f) <= 1e-6

    def test_shift_round_trip_fractional_fine_grid(self):
        # interpolation error shrinks with spacing; measured bound at delta=0.05
        g = Grid(p=2401, delta=0.05)
        f = from_gaussian(g, 0.0, 1.0)
        back = shift(shift(f, 0.1235), -0.1235)
        assert l1_distance(back, f) < 1e-3

    def test_shift_clips_offgrid_mass(self):
        g = Grid(p=65, delta=0.5)
        f = from_gaussian(g, 0.0, 4.0)
        out = shift(f, 12.0)
        assert out.clipped_mass > 0.01


class TestMoments:
    def test_symmetric_zero_mean(self):
        g = Grid(p=129, delta=0.5)
        assert abs(moments(from_gaussian(g, 0.0, 9.0))[0]) < 1e-12

    def test_spike_zero_variance(self):
        g = Grid(p=65, delta=0.5)
        _, var, arg = moments(spike(g, 2 * 0.5))
        assert var == 0.0
        assert arg == 1.0

    def test_mean_tracks_offset(self):
        g = Grid(p=401, delta=0.25)
        mean, _, _ = moments(from_gaussian(g, 1.3, 1.0))
        assert abs(mean - 1.3) < 0.025  # delta/10

    def test_argmax_tie_break_smallest_magnitude_negative_first(self):
        g = Grid(p=9, delta=1.0)
        v = np.zeros(9)
        v[g.center_index - 2] = 1.0  # t = -2
        v[g.center_index + 2] = 1.0  # t = +2
        assert moments(from_values(g, v))[2] == -2.0


class TestInvariants:
    def test_all_ops_preserve_normalization_and_positivity(self):
        g = Grid(p=129, delta=0.25)
        rng = make_rng(31)
        for _ in range(20):
            a = from_values(g, rng.random(129))
            b = from_values(g, rng.random(129))
            for out in (
                multiply(a, b),
                convolve(a, b),
                reflect(a),
                shift(a, 0.6),
                clamped(a),
            ):
                assert abs(out.values.sum() * g.delta - 1.0) < 1e-9
                assert (out.values >= 0.0).all()
                assert np.isfinite(out.values).all()
