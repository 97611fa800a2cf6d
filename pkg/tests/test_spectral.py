import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from semibeam import (
    SpectralError,
    SpectralField,
    derivative_matrix,
    eigenvalue,
    eigenvalues,
    fractional_power_diag,
    interpolation_ratio,
    synthesize,
)


def basis(n, l, x):
    return math.sqrt(2.0 / l) * np.sin(n * math.pi * x / l)


def basis_dx(n, l, x):
    return math.sqrt(2.0 / l) * (n * math.pi / l) * np.cos(n * math.pi * x / l)


class TestEigenvalues:
    @pytest.mark.parametrize("n,l,expected", [(1, math.pi, 1.0), (3, math.pi, 9.0),
                                              (2, 1.0, 4 * math.pi**2)])
    def test_formula(self, n, l, expected):
        assert eigenvalue(n, l) == pytest.approx(expected, rel=1e-15)

    def test_increasing(self):
        mu = eigenvalues(50, 2.3)
        assert np.all(np.diff(mu) > 0)

    @pytest.mark.parametrize("n,l", [(0, 1.0), (-1, 1.0), (1, 0.0), (1, -2.0)])
    def test_rejects_bad_input(self, n, l):
        with pytest.raises(SpectralError):
            eigenvalue(n, l)


class TestFractionalPower:
    def test_identity_power(self):
        np.testing.assert_array_equal(fractional_power_diag(3, math.pi, 0.0), np.ones(3))

    def test_examples(self):
        assert fractional_power_diag(1, math.pi, 1.0)[0] == pytest.approx(1.0)
        assert fractional_power_diag(4, math.pi, 0.5)[3] == pytest.approx(4.0, rel=1e-15)

    @pytest.mark.parametrize("sigma", [-1.0, -0.5, 0.3, 1.0, 2.0])
    def test_monotone(self, sigma):
        d = np.diff(fractional_power_diag(20, 1.7, sigma))
        assert np.all(d > 0) if sigma > 0 else np.all(d < 0)

    def test_half_power_norm_identity(self, rng):
        c = rng.standard_normal(30)
        f = SpectralField(c, 2.0)
        direct = np.sum(eigenvalues(30, 2.0) * c**2)
        assert f.power_norm(0.5) ** 2 == pytest.approx(direct, rel=1e-13)


class TestDerivativeMatrix:
    def test_quadrature_oracle(self):
        l, N = math.pi, 8
        x = np.linspace(0.0, l, 2 * 10**4 + 1)  # 10^4 Simpson panels
        D = derivative_matrix(N, l)
        for m in range(1, N + 1):
            for n in range(1, N + 1):
                ref = simpson(basis_dx(n, l, x) * basis(m, l, x), x=x)
                assert abs(D[m - 1, n - 1] - ref) <= 1e-8, (m, n)

    def test_reference_entries(self):
        D = derivative_matrix(2, math.pi)
        assert D[0, 1] == pytest.approx(-8.0 / (3.0 * math.pi), rel=1e-14)
        assert D[1, 0] == pytest.approx(8.0 / (3.0 * math.pi), rel=1e-14)
        assert derivative_matrix(3, 0.7)[0, 2] == 0.0

    @pytest.mark.parametrize("N,l", [(1, 1.0), (7, math.pi), (40, 3.3)])
    def test_exact_antisymmetry_and_parity(self, N, l):
        D = derivative_matrix(N, l)
        assert np.array_equal(D, -D.T)
        m, n = np.indices(D.shape)
        assert np.all(D[(m + n) % 2 == 0] == 0.0)

    def test_integration_by_parts(self, rng):
        l, N = 2.5, 12
        D = derivative_matrix(N, l)
        f, g = rng.standard_normal(N), rng.standard_normal(N)
        # <f_x, g> = g . D f and <f, g_x> = f . D g
        assert g @ D @ f == pytest.approx(-(f @ D @ g), abs=1e-13)


class TestSynthesize:
    def test_basis_midpoint(self):
        val = synthesize(SpectralField([1.0, 0.0], math.pi), [math.pi / 2])
        assert val[0] == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)

    def test_zero_field(self):
        np.testing.assert_array_equal(synthesize(SpectralField(np.zeros(5)), [0.3, 1.0, 2.0]), 0.0)

    def test_dirichlet_endpoints(self, rng):
        f = SpectralField(rng.standard_normal(9), 1.3)
        assert np.all(synthesize(f, [0.0, 1.3]) == 0.0)

    def test_matches_series(self, rng):
        l = 2.0
        c = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        x = np.linspace(0.1, 1.9, 7)
        ref = sum(c[n - 1] * basis(n, l, x) for n in range(1, 7))
        np.testing.assert_allclose(synthesize(SpectralField(c, l), x), ref, rtol=1e-13)

    @pytest.mark.parametrize("x", [-1e-9, math.pi + 1e-6, float("nan")])
    def test_rejects_outside(self, x):
        with pytest.raises(SpectralError):
            synthesize(SpectralField([1.0]), [x])


class TestSpectralField:
    def test_norm_is_coefficient_norm(self):
        assert SpectralField([3.0, 4.0j]).norm() == pytest.approx(5.0)

    @pytest.mark.parametrize("coeffs", [[], [1.0, float("inf")], [[1.0, 2.0]]])
    def test_invalid_coefficients(self, coeffs):
        with pytest.raises(SpectralError):
            SpectralField(coeffs)

    def test_invalid_length(self):
        with pytest.raises(SpectralError):
            SpectralField([1.0], length=0.0)


class TestInterpolation:
    def test_single_mode_is_one(self):
        f = SpectralField([0.0, 0.0, 2.5])
        assert interpolation_ratio(f, -0.3, 0.4, 1.7) == pytest.approx(1.0, rel=1e-14)

    def test_random_field_in_unit_interval(self, rng):
        f = SpectralField(rng.standard_normal(8))
        r = interpolation_ratio(f, -0.5, 0.0, 0.5)
        assert 0.0 < r <= 1.0 + 1e-12

    @pytest.mark.parametrize("a,b,c", [(0.0, 0.0, 1.0), (0.0, 1.0, 1.0), (1.0, 0.5, 0.0)])
    def test_rejects_unordered(self, a, b, c):
        with pytest.raises(SpectralError):
            interpolation_ratio(SpectralField([1.0, 1.0]), a, b, c)

    def test_rejects_zero_field(self):
        with pytest.raises(SpectralError):
            interpolation_ratio(SpectralField(np.zeros(4)), 0.0, 0.5, 1.0)

    @settings(max_examples=200, deadline=None)
    @given(
        coeffs=st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=24),
        exps=st.lists(st.floats(-1.0, 2.0, allow_nan=False), min_size=3, max_size=3, unique=True),
    )
    def test_hoelder_bound(self, coeffs, exps):
        if not any(coeffs):
            return
        a, b, c = sorted(exps)
        if b - a < 1e-6 or c - b < 1e-6:
            return
        assert interpolation_ratio(SpectralField(coeffs, 1.9), a, b, c) <= 1.0 + 1e-12
