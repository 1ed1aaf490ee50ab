import math

import numpy as np
import pytest

from nonneg_dp.bias import bias_bit, bias_restricted, bias_translated_ramp, optimal_alpha
from nonneg_dp.distributions import LaplaceDist, laplace_pdf, log_laplace_mgf
from nonneg_dp.mechanisms import (
    PostProcessor,
    PrivacyParams,
    make_laplace_mechanism,
    make_multiplicative_mechanism,
    make_postprocessed_mechanism,
    make_restricted_mechanism,
    restricted_pdf,
)
from nonneg_dp.verify import (
    certify_dp_densities,
    check_divergence_log_laplace,
    check_stochastic_dominance,
    coupling_bias_lower_bound,
    mc_bias,
)


class TestCertifyDpDensities:
    def test_laplace_extremal_pair_meets_epsilon_exactly(self):
        a, b = LaplaceDist(0.0, 1.0), LaplaceDist(1.0, 1.0)
        grid = np.linspace(-10, 11, 2000)
        cert = certify_dp_densities(lambda x: laplace_pdf(a, x),
                                    lambda x: laplace_pdf(b, x), 1.0, grid)
        assert cert.passed
        assert cert.max_log_ratio_observed == pytest.approx(1.0, abs=1e-9)

    def test_identical_densities(self):
        dist = LaplaceDist(2.0, 1.0)
        grid = np.linspace(-5, 9, 500)
        cert = certify_dp_densities(lambda x: laplace_pdf(dist, x),
                                    lambda x: laplace_pdf(dist, x), 1e-6, grid)
        assert cert.passed
        assert cert.max_log_ratio_observed == 0.0

    def test_restricted_pair_passes_doubled_and_fails_single(self):
        a, b = LaplaceDist(0.0, 1.0), LaplaceDist(1.0, 1.0)
        grid = np.linspace(0.0, 11, 2000)
        da = lambda x: restricted_pdf(a, x)
        db = lambda x: restricted_pdf(b, x)
        assert certify_dp_densities(da, db, 2.0, grid).passed
        failed = certify_dp_densities(da, db, 1.0, grid)
        assert not failed.passed
        # the renormalizer contributes log((1 - F_b(0)) / (1 - F_a(0))) on top of epsilon
        extra = math.log((1 - 0.5 * math.exp(-1)) / 0.5)
        assert failed.max_log_ratio_observed == pytest.approx(1.0 + extra, abs=1e-9)

    def test_rejects_vanishing_density(self):
        a = LaplaceDist(1.0, 1.0)
        grid = np.linspace(-2, 5, 100)  # restricted density is zero below 0
        with pytest.raises(ValueError, match="strictly positive"):
            certify_dp_densities(lambda x: restricted_pdf(a, x),
                                 lambda x: laplace_pdf(a, x), 1.0, grid)

    def test_rejects_empty_grid(self):
        with pytest.raises(ValueError):
            certify_dp_densities(lambda x: 1.0, lambda x: 1.0, 1.0, [])


class TestMcBias:
    def test_clamped_at_zero(self):
        spec = make_postprocessed_mechanism(PrivacyParams(1.0, 1.0), PostProcessor.ramp())
        est = mc_bias(spec, 0.0, 10**6, seed=42)
        assert abs(est.mean - 0.5) <= 3 * est.stderr
        assert est.warning is None

    def test_restricted_at_one(self):
        spec = make_restricted_mechanism(PrivacyParams(1.0, 1.0))
        est = mc_bias(spec, 1.0, 10**6, seed=43)
        assert abs(est.mean - bias_restricted(1.0, 1.0)) <= 3 * est.stderr

    def test_plain_is_unbiased(self):
        spec = make_laplace_mechanism(PrivacyParams(1.0, 1.0))
        est = mc_bias(spec, 5.0, 10**6, seed=44)
        assert abs(est.mean) <= 3 * est.stderr

    def test_deterministic_given_seed(self):
        spec = make_laplace_mechanism(PrivacyParams(1.0, 1.0))
        assert mc_bias(spec, 1.0, 1000, seed=7) == mc_bias(spec, 1.0, 1000, seed=7)

    def test_divergent_multiplicative_attaches_warning(self):
        with pytest.warns(UserWarning):
            spec = make_multiplicative_mechanism(1.0, 1.5)
        est = mc_bias(spec, 1.0, 1000, seed=1)
        assert est.warning is not None
        assert "infinite" in est.warning

    def test_requires_enough_draws(self):
        spec = make_laplace_mechanism(PrivacyParams(1.0, 1.0))
        with pytest.raises(ValueError):
            mc_bias(spec, 0.0, 99, seed=0)

    @pytest.mark.parametrize("q_factor", [0.0, 0.5, 1.0, 5.0])
    def test_agrees_with_closed_forms(self, q_factor):
        b = 1.0
        q = q_factor * b
        alpha_star = optimal_alpha(b)
        cases = [
            (make_postprocessed_mechanism(PrivacyParams(1.0, 1.0), PostProcessor.ramp()),
             bias_bit(q, b)),
            (make_postprocessed_mechanism(PrivacyParams(1.0, 1.0),
                                          PostProcessor.translated_ramp(alpha_star)),
             bias_translated_ramp(q, alpha_star, b)),
            (make_postprocessed_mechanism(PrivacyParams(1.0, 1.0),
                                          PostProcessor.translated_ramp(2 * alpha_star)),
             bias_translated_ramp(q, 2 * alpha_star, b)),
            (make_restricted_mechanism(PrivacyParams(1.0, 1.0)), bias_restricted(q, b)),
        ]
        for index, (spec, expected) in enumerate(cases):
            est = mc_bias(spec, q, 10**6, seed=1000 + index)
            assert abs(est.mean - expected) <= 4 * est.stderr

    def test_convergent_multiplicative_matches_moment(self):
        with pytest.warns(UserWarning):
            spec = make_multiplicative_mechanism(1.0, 0.5)
        est = mc_bias(spec, 1.0, 10**6, seed=42)
        expected = log_laplace_mgf(0.5, 1.0) - 1.0
        assert abs(est.mean - expected) <= 4 * est.stderr


class TestStochasticDominance:
    def test_strict_dominance_at_origin(self):
        base = LaplaceDist(0.0, 1.0)
        grid = np.arange(-5.0, 10.0, 0.01)
        result = check_stochastic_dominance(base, grid)
        assert result.dominates
        assert result.min_gap > 0

    def test_far_location_keeps_tiny_positive_gap(self):
        base = LaplaceDist(10.0, 0.5)
        grid = np.linspace(-5.0, 15.0, 3000)
        result = check_stochastic_dominance(base, grid)
        assert result.dominates
        assert 0 < result.min_gap < 1e-9

    def test_negative_axis_gap_is_full_cdf(self):
        base = LaplaceDist(0.0, 1.0)
        result = check_stochastic_dominance(base, np.linspace(-8, -0.1, 200))
        assert result.dominates

    def test_rejects_empty_grid(self):
        with pytest.raises(ValueError):
            check_stochastic_dominance(LaplaceDist(0.0, 1.0), [])


class TestCouplingBias:
    def test_estimates_restriction_bias_at_origin(self):
        estimate = coupling_bias_lower_bound(LaplaceDist(0.0, 1.0), 10**5)
        assert estimate > 0
        assert estimate == pytest.approx(bias_restricted(0.0, 1.0), abs=1e-3)

    def test_estimates_restriction_bias_at_two(self):
        estimate = coupling_bias_lower_bound(LaplaceDist(2.0, 1.0), 10**5)
        assert estimate == pytest.approx(bias_restricted(2.0, 1.0), abs=1e-3)

    @pytest.mark.parametrize("q", [0.0, 1.0, 5.0])
    @pytest.mark.parametrize("b", [0.5, 1.0, 2.0])
    def test_positive_for_all_parameters(self, q, b):
        assert coupling_bias_lower_bound(LaplaceDist(q, b), 10**4) > 0

    def test_rejects_coarse_grid(self):
        with pytest.raises(ValueError):
            coupling_bias_lower_bound(LaplaceDist(0.0, 1.0), 99)


class TestDivergenceCheck:
    def test_boundary_scale_grows_linearly(self):
        report = check_divergence_log_laplace(1.0, (10, 20, 40, 80))
        assert report.strictly_increasing
        # analytic truncated value is (1/2)((1 - e^{-2T})/2 + T)
        for radius, value in zip(report.radii, report.values):
            expected = 0.5 * ((1 - math.exp(-2 * radius)) / 2 + radius)
            assert value == pytest.approx(expected, rel=1e-9)
        assert report.growth_factor == pytest.approx(40.25 / 5.25, rel=1e-9)
        assert not report.converged

    def test_wide_radii_witness_divergence_at_boundary_scale(self):
        report = check_divergence_log_laplace(1.0, (5, 10, 20, 40, 80, 160))
        assert report.diverges

    def test_above_boundary_grows_exponentially(self):
        report = check_divergence_log_laplace(2.0, (10, 20))
        assert report.strictly_increasing
        assert report.values[1] / report.values[0] > math.exp(5)
        assert report.diverges

    def test_below_boundary_converges_to_moment(self):
        report = check_divergence_log_laplace(0.5, (10, 20, 40))
        assert report.converged
        assert abs(report.values[-1] - 4.0 / 3.0) <= 1e-6
        assert report.limit == pytest.approx(4.0 / 3.0, abs=1e-15)
        assert not report.diverges

    def test_rejects_unordered_radii(self):
        with pytest.raises(ValueError):
            check_divergence_log_laplace(1.0, (10, 10))
        with pytest.raises(ValueError):
            check_divergence_log_laplace(1.0, (10,))
