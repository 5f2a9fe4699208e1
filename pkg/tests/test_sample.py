"""Tests for condtau.sample (the Sample type and its CSV codec)."""

import numpy as np
import pytest

from condtau import estimators
from condtau.errors import InvalidParameter, SampleFormatError
from condtau.kernels import KernelSpec
from condtau.sample import Sample, read_sample_csv, write_sample_csv


class TestSample:

    def test_read_only(self, small_sample):
        with pytest.raises(ValueError):
            small_sample.x[0, 0] = 1.0

    def test_caller_arrays_untouched(self, rng):
        x = rng.standard_normal((5, 2))
        z = rng.uniform(size=5)
        before = x.copy()
        sample = Sample(x=x, z=z)
        x[0, 0] = before[0, 0] + 1.0
        z[0] = 0.5
        assert x.flags.writeable and z.flags.writeable
        np.testing.assert_array_equal(sample.x, before)

    def test_needs_two_rows(self):
        with pytest.raises(InvalidParameter):
            Sample(x=[[0.0, 0.0]], z=[0.0])

    def test_shape_checks(self):
        with pytest.raises(InvalidParameter):
            Sample(x=np.zeros((3, 3)), z=np.zeros(3))
        with pytest.raises(InvalidParameter):
            Sample(x=np.zeros((3, 2)), z=np.zeros(4))

    def test_without(self, small_sample):
        reduced = small_sample.without(3, 7)
        assert reduced.n == small_sample.n - 2
        np.testing.assert_array_equal(reduced.x[3], small_sample.x[4])


class TestCSV:

    def test_minimal_round_trip(self, tmp_path):
        sample = Sample(x=[[0.1, -2.5], [1e-300, 3.0]], z=[0.3, 1 / 3])
        path = tmp_path / "s.csv"
        write_sample_csv(sample, path)
        back = read_sample_csv(path)
        np.testing.assert_array_equal(back.x, sample.x)
        np.testing.assert_array_equal(back.z, sample.z)

    def test_exact_round_trip(self, tmp_path, rng, make_sample):
        sample = make_sample(rng, 50, p=2)
        path = tmp_path / "s.csv"
        write_sample_csv(sample, path)
        back = read_sample_csv(path)
        assert back.p == 2
        assert np.array_equal(back.x, sample.x) and np.array_equal(back.z, sample.z)

    def test_layout(self, tmp_path):
        path = tmp_path / "s.csv"
        write_sample_csv(Sample(x=[[0.5, 1.0], [2.0, 0.1]], z=[0.0, 1.0]), path)
        assert path.read_bytes() == b"x1,x2,z1\n0.5,1.0,0.0\n2.0,0.1,1.0\n"

    def test_two_covariates(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("x1,x2,z1,z2\n0,1,0.5,0.5\n1,0,0.4,0.6\n")
        assert read_sample_csv(path).p == 2

    def test_tie_reported_on_estimation(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("x1,x2,z1\n0,0,0.5\n0,1,0.5\n1,2,0.5\n")
        est = estimators.tau_hat("tau2", read_sample_csv(path), 0.5, KernelSpec(), 0.2)
        assert est.tied_pairs == 1

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("x1,x2,z1\n0,1,0.5\n1,abc,0.2\n")
        with pytest.raises(SampleFormatError, match="line 3|:3:") as info:
            read_sample_csv(path)
        assert info.value.line == 3

    def test_missing_field(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("x1,x2,z1\n0,1,0.5\n1,0.2\n")
        with pytest.raises(SampleFormatError) as info:
            read_sample_csv(path)
        assert info.value.line == 3

    def test_bad_header(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("a,b,c\n0,1,0.5\n1,0,0.2\n")
        with pytest.raises(SampleFormatError, match="header"):
            read_sample_csv(path)

    def test_single_row(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("x1,x2,z1\n0,1,0.5\n")
        with pytest.raises(SampleFormatError, match="at least 2"):
            read_sample_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("")
        with pytest.raises(SampleFormatError):
            read_sample_csv(path)
