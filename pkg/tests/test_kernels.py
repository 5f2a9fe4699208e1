"""Tests for condtau.kernels."""

import math

import numpy as np
import pytest
from scipy import integrate

from condtau import kernels
from condtau.errors import DimensionMismatch, InvalidParameter
from condtau.kernels import KernelFamily, KernelSpec


class TestEvaluate:

    def test_epanechnikov_peak(self):
        assert kernels.evaluate(KernelSpec(), [0.0]) == 0.75

    def test_epanechnikov_outside_support(self):
        assert kernels.evaluate(KernelSpec(), [1.5]) == 0.0

    def test_support_is_open(self):
        assert kernels.evaluate(KernelSpec(), [1.0]) == 0.0
        assert kernels.evaluate(KernelSpec("uniform"), [-1.0]) == 0.0

    def test_gaussian_peak(self):
        np.testing.assert_allclose(kernels.evaluate(KernelSpec("gaussian"), [0.0]), 0.398942, atol=1e-6)

    def test_product_kernel(self):
        spec = KernelSpec(dimension=2)
        assert kernels.evaluate(spec, [0.0, 0.0]) == 0.75 ** 2
        assert kernels.evaluate(spec, [0.0, 1.2]) == 0.0

    def test_rows_match_points(self):
        spec = KernelSpec(dimension=2)
        u = np.array([[0.1, -0.3], [0.9, 0.2], [1.1, 0.0]])
        expected = [kernels.evaluate(spec, row) for row in u]
        np.testing.assert_array_equal(kernels.evaluate_rows(spec, u), expected)

    @pytest.mark.parametrize("family", list(KernelFamily))
    def test_symmetric(self, rng, family):
        for dimension in (1, 2):
            spec = KernelSpec(family, dimension=dimension)
            u = rng.uniform(-1.5, 1.5, size=(1000, dimension))
            np.testing.assert_array_equal(kernels.evaluate_rows(spec, u), kernels.evaluate_rows(spec, -u))

    @pytest.mark.parametrize("family", list(KernelFamily))
    def test_scaling_identity(self, rng, family):
        for dimension in (1, 2):
            spec = KernelSpec(family, dimension=dimension)
            for h in (0.05, 0.3, 2.0):
                v = rng.uniform(-2 * h, 2 * h, size=dimension)
                np.testing.assert_allclose(
                    kernels.scaled_evaluate(spec, h, v) * h ** dimension, kernels.evaluate(spec, v / h), rtol=1e-14
                )

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            kernels.evaluate(KernelSpec(), [0.0, 0.0])
        with pytest.raises(DimensionMismatch):
            kernels.evaluate_rows(KernelSpec(dimension=2), np.zeros((3, 3)))


class TestScaled:

    def test_epanechnikov_center(self):
        assert kernels.scaled_evaluate(KernelSpec(), 0.5, [0.0]) == 1.5

    def test_epanechnikov_outside(self):
        assert kernels.scaled_evaluate(KernelSpec(), 0.5, [0.6]) == 0.0

    def test_gaussian_bivariate(self):
        value = kernels.scaled_evaluate(KernelSpec("gaussian", dimension=2), 1.0, [0.0, 0.0])
        np.testing.assert_allclose(value, 0.159155, atol=1e-6)

    def test_integrates_to_one(self):
        spec = KernelSpec()
        value, _ = integrate.quad(lambda v: kernels.scaled_evaluate(spec, 0.3, [v]), -0.3, 0.3)
        np.testing.assert_allclose(value, 1.0, rtol=1e-8)

    @pytest.mark.parametrize("h", [0.0, -1.0, math.inf, math.nan])
    def test_bad_bandwidth(self, h):
        with pytest.raises(InvalidParameter):
            kernels.scaled_evaluate(KernelSpec(), h, [0.0])


class TestSpec:

    def test_from_name(self):
        assert KernelSpec.from_name("Gaussian").family is KernelFamily.GAUSSIAN

    def test_unknown_name(self):
        with pytest.raises(InvalidParameter, match="unknown kernel"):
            KernelSpec.from_name("triweight")

    def test_only_second_order(self):
        with pytest.raises(InvalidParameter):
            KernelSpec(order=4)
        with pytest.raises(InvalidParameter):
            KernelSpec(order=1)

    def test_dimension_positive(self):
        with pytest.raises(InvalidParameter):
            KernelSpec(dimension=0)

    def test_compact(self):
        assert KernelSpec().compact
        assert not KernelSpec("gaussian").compact


class TestConstants:

    def test_epanechnikov(self):
        kc = kernels.constants(KernelSpec())
        assert kc.c_k == 0.75
        np.testing.assert_allclose(kc.int_k2, 0.6)
        np.testing.assert_allclose(kc.c_ktilde, 0.9375)
        np.testing.assert_allclose(kc.int_ktilde2, 5.0 / 7.0)

    def test_gaussian(self):
        np.testing.assert_allclose(kernels.constants(KernelSpec("gaussian")).int_k2, 0.282095, atol=1e-6)

    @pytest.mark.parametrize("family", list(KernelFamily))
    def test_closed_forms_match_quadrature(self, family):
        spec = KernelSpec(family)
        kc = kernels.constants(spec)
        lo, hi = (-1.0, 1.0) if spec.compact else (-np.inf, np.inf)
        k2, _ = integrate.quad(lambda u: kernels.evaluate(spec, [u]) ** 2, lo, hi)
        k4, _ = integrate.quad(lambda u: kernels.evaluate(spec, [u]) ** 4, lo, hi)
        np.testing.assert_allclose(kc.int_k2, k2, rtol=1e-7)
        np.testing.assert_allclose(kc.int_ktilde2, k4 / k2 ** 2, rtol=1e-7)

    def test_product_powers(self):
        one = kernels.constants(KernelSpec())
        two = kernels.constants(KernelSpec(dimension=2))
        np.testing.assert_allclose(two.c_k, one.c_k ** 2)
        np.testing.assert_allclose(two.int_k2, one.int_k2 ** 2)
        np.testing.assert_allclose(two.int_ktilde2, one.int_ktilde2 ** 2)


class TestMoments:

    def test_epanechnikov_abs_moments(self):
        spec = KernelSpec()
        np.testing.assert_allclose(kernels.abs_moment(spec, 0), 1.0, rtol=1e-8)
        np.testing.assert_allclose(kernels.abs_moment(spec, 2), 0.2, rtol=1e-8)

    def test_gaussian_second_moment(self):
        np.testing.assert_allclose(kernels.abs_moment(KernelSpec("gaussian"), 2), 1.0, rtol=1e-8)

    def test_odd_signed_moment_vanishes(self):
        assert abs(kernels.signed_moment(KernelSpec(), 1)) < 1e-12

    def test_tilde_moment_normalised(self):
        np.testing.assert_allclose(kernels.tilde_moment(KernelSpec(), 0), 1.0, rtol=1e-8)

    def test_univariate_only(self):
        with pytest.raises(DimensionMismatch):
            kernels.abs_moment(KernelSpec(dimension=2), 2)
