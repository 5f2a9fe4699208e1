"""Tests for condtau.inference."""

import itertools

import numpy as np
import pytest

from condtau import bandwidth, estimators, inference, simulation
from condtau import weights as nw
from condtau.errors import DegenerateWindow, InvalidParameter
from condtau.estimators import ConcordanceKind, EstimatorKind, TauEstimate
from condtau.inference import VarianceEstimate
from condtau.sample import Sample


def triple_loop(k, sample, z, spec, h):
    w = nw.nw_weights(sample, z, spec, h).weights
    x = sample.x
    num = denom = 0.0
    for a, b, c in itertools.permutations(range(sample.n), 3):
        www = w[a] * w[b] * w[c]
        num += www * estimators.g(k, x[b], x[a]) * estimators.g(k, x[c], x[a])
        denom += www
    return num / denom


def monotone_sample(n, sign=1.0):
    t = np.linspace(-1.0, 1.0, n)
    return Sample(x=np.column_stack([t, sign * t]), z=np.linspace(0.0, 1.0, n))


def fixed_estimate(value):
    return TauEstimate(kind=EstimatorKind.TILDE, z=np.array([0.5]), value=value, s_n=0.1, h=1.0, n_effective=10)


def fixed_variance(h_entry):
    return VarianceEstimate(
        z=np.array([0.5]), k=ConcordanceKind.G2, kind=EstimatorKind.TILDE, h_entry=h_entry,
        clamped=False, f_hat=1.0, gg_moment=0.0, tau=0.0, raw=h_entry,
    )


class TestGGMoment:

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_triple_loop_oracle(self, rng, make_sample, epa, k):
        for _ in range(5):
            n = int(rng.integers(5, 16))
            sample = make_sample(rng, n, ties=bool(rng.integers(2)))
            z = float(sample.z[0, 0])
            expected = triple_loop(k, sample, z, epa, 0.9)
            np.testing.assert_allclose(inference.estimate_gg_moment(k, sample, z, epa, 0.9), expected, atol=1e-12)

    def test_concordant(self, epa):
        np.testing.assert_allclose(inference.estimate_gg_moment(2, monotone_sample(30), 0.5, epa, 0.3), 1.0, atol=1e-12)

    def test_discordant(self, epa):
        np.testing.assert_allclose(
            inference.estimate_gg_moment(2, monotone_sample(30, -1.0), 0.5, epa, 0.3), 1.0, atol=1e-12
        )

    def test_ranges(self, rng, make_sample, epa):
        sample = make_sample(rng, 60)
        for k in (1, 2, 3):
            bound = 1.0 if k == 2 else 9.0
            for z in (0.2, 0.5, 0.8):
                assert -bound <= inference.estimate_gg_moment(k, sample, z, epa, 0.3) <= bound

    def test_block_rows(self, rng, make_sample, epa, monkeypatch):
        sample = make_sample(rng, 50)
        whole = inference.estimate_gg_moment(1, sample, 0.5, epa, 0.4)
        monkeypatch.setattr(estimators, "BLOCK_ROWS", 6)
        np.testing.assert_allclose(inference.estimate_gg_moment(1, sample, 0.5, epa, 0.4), whole, atol=1e-13)

    def test_needs_three_active(self, epa):
        sample = Sample(x=np.arange(8.0).reshape(4, 2), z=[0.0, 0.01, 3.0, 4.0])
        with pytest.raises(DegenerateWindow, match="need 3"):
            inference.estimate_gg_moment(2, sample, 0.0, epa, 0.1)


class TestVariance:

    def test_full_formula(self, rng, make_sample, epa):
        sample = make_sample(rng, 15)
        z, h = float(sample.z[3, 0]), 0.5
        var = inference.estimate_variance("tau3", sample, z, epa, h)
        f_hat = np.mean([max(0.0, 0.75 * (1 - ((zi - z) / h) ** 2)) / h for zi in sample.z[:, 0]])
        tau = estimators.tau_hat("tau3", sample, z, epa, h).value
        expected = 4 * 0.6 / f_hat * (triple_loop(3, sample, z, epa, h) - tau ** 2)
        np.testing.assert_allclose(var.raw, expected, atol=1e-12)
        assert var.k is ConcordanceKind.G3

    def test_degenerate_dependence(self, epa):
        var = inference.estimate_variance("tilde", monotone_sample(40), 0.5, epa, 0.3)
        assert var.h_entry >= 0
        assert var.h_entry < 1e-10
        assert var.clamped == (var.raw < 0)

    def test_integer_kind(self, small_sample, epa):
        var = inference.estimate_variance(1, small_sample, 0.5, epa, 0.4)
        assert var.kind is EstimatorKind.TAU1

    def test_rank_invariance(self, small_sample, epa):
        moved = Sample(x=np.exp(small_sample.x) ** 3, z=small_sample.z)
        a = inference.estimate_variance("tilde", small_sample, 0.5, epa, 0.3)
        b = inference.estimate_variance("tilde", moved, 0.5, epa, 0.3)
        assert a.h_entry == b.h_entry

    def test_grid_skips_undefined(self, small_sample, epa):
        results = estimators.tau_hat_grid("tilde", small_sample, [0.5, 9.0], epa, 0.3)
        variances = inference.estimate_variance_grid("tilde", small_sample, results, epa, 0.3, threads=2)
        assert variances[0] is not None
        assert variances[1] is None


class TestConfidenceInterval:

    def test_half_width(self):
        ci = inference.confidence_interval(fixed_estimate(0.2), fixed_variance(1.0), n=100, h=1.0, p=1)
        np.testing.assert_allclose(ci.upper - ci.center, 0.196, atol=5e-5)
        np.testing.assert_allclose(ci.width, 2 * 1.959964 * ci.standard_error, rtol=1e-6)

    def test_zero_variance(self):
        ci = inference.confidence_interval(fixed_estimate(0.2), fixed_variance(0.0), n=100, h=0.5, p=1)
        assert ci.lower == ci.center == ci.upper == 0.2

    def test_level_widens(self):
        narrow = inference.confidence_interval(fixed_estimate(0.0), fixed_variance(1.0), 50, 0.3, 1, level=0.95)
        wide = inference.confidence_interval(fixed_estimate(0.0), fixed_variance(1.0), 50, 0.3, 1, level=0.99)
        assert wide.width > narrow.width

    def test_truncate(self):
        ci = inference.confidence_interval(fixed_estimate(0.9), fixed_variance(4.0), 10, 0.5, 1, truncate=True)
        assert ci.upper == 1.0
        assert ci.lower <= ci.center <= ci.upper

    @pytest.mark.parametrize("level", [0.0, 1.0, 1.5])
    def test_bad_level(self, level):
        with pytest.raises(InvalidParameter):
            inference.confidence_interval(fixed_estimate(0.0), fixed_variance(1.0), 10, 0.5, 1, level=level)


def coverage_run(n, reps, epa):
    hits = []
    standardized = []
    for seed in simulation.replication_seeds(7, reps):
        sample = simulation.generate(simulation.SettingSpec(1, n, seed))
        h = bandwidth.rule_of_thumb(sample, 1.5)
        est = estimators.tau_tilde(sample, 0.5, epa, h)
        var = inference.estimate_variance("tilde", sample, 0.5, epa, h, estimate=est)
        ci = inference.confidence_interval(est, var, n, h, 1)
        hits.append(ci.lower <= 0.0 <= ci.upper)
        standardized.append(est.value / ci.standard_error)
    return np.mean(hits), np.var(standardized, ddof=1)


class TestCoverage:

    def test_coverage_reduced(self, epa):
        coverage, _ = coverage_run(1000, 100, epa)
        assert 0.85 <= coverage <= 1.0

    @pytest.mark.slow
    def test_coverage_full(self, epa):
        coverage, variance = coverage_run(2000, 500, epa)
        assert 0.91 <= coverage <= 0.98
        assert 0.8 <= variance <= 1.25
