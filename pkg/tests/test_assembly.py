import math

import numpy as np
import pytest
from scipy.integrate import simpson

from semibeam import (
    FIELDS,
    DimensionError,
    ModelParameters,
    StateVector,
    Variant,
    assemble_generator,
    assemble_gram,
    dissipation_rate,
    smooth_probes,
    stationary_solve,
)
from semibeam.spectral import eigenvalue

from conftest import hand_generator_n1, random_params

VARIANTS = (Variant.SYSTEM01, Variant.SYSTEM02)


def quadrature_energy(p, U, points=20001):
    """Energy norm squared from synthesized fields and their x-derivatives."""
    l, N = p.l, U.modes
    x = np.linspace(0.0, l, points)
    n = np.arange(1, N + 1)[:, None]
    S = math.sqrt(2 / l) * np.sin(n * math.pi * x / l)
    C = math.sqrt(2 / l) * (n * math.pi / l) * np.cos(n * math.pi * x / l)
    f = {name: getattr(U, name) @ S for name in FIELDS}
    dx = {name: getattr(U, name) @ C for name in FIELDS}

    def I(g):
        return simpson(np.abs(g) ** 2, x=x)

    e = (p.rho1 * I(f["u"]) + p.rho2 * I(f["v"]) + p.rho3 * I(f["s"]) + p.rho4 * I(f["w"])
         + p.b1 * I(dx["psi"]) + p.b2 * I(dx["z"])
         + p.kappa1 * I(dx["varphi"] - f["psi"]) + p.kappa2 * I(dx["y"] - f["z"])
         + p.vdw * I(f["y"] - f["varphi"]))
    if p.variant is Variant.SYSTEM01:
        e += p.rho5 * p.delta / p.betaThermal * I(dx["theta"])
    else:
        e += p.rho5 * I(f["theta"])
    return e


class TestStateVector:
    def test_layout_block_contiguous(self):
        c = np.arange(27.0).reshape(9, 3)
        U = StateVector(c)
        np.testing.assert_array_equal(U.flat()[3:6], c[1])
        np.testing.assert_array_equal(U.psi, c[2])
        assert U.modes == 3

    def test_read_only(self):
        U = StateVector.zeros(2)
        with pytest.raises(ValueError):
            U.coefficients[0, 0] = 1.0

    def test_from_fields(self):
        U = StateVector.from_fields(theta=[1.0, 2.0])
        assert U.theta[1] == 2.0 and np.all(U.u == 0.0)
        with pytest.raises(DimensionError):
            StateVector.from_fields(theta=[1.0], u=[1.0, 2.0])
        with pytest.raises(DimensionError):
            StateVector.from_fields(temperature=[1.0])

    @pytest.mark.parametrize("shape", [(8, 3), (9, 0), (9,)])
    def test_bad_shape(self, shape):
        with pytest.raises(DimensionError):
            StateVector(np.zeros(shape))

    def test_nonfinite_rejected(self):
        c = np.zeros((9, 2))
        c[3, 1] = np.nan
        with pytest.raises(DimensionError):
            StateVector(c)

    def test_smooth_probes_are_nested(self):
        a = smooth_probes(5, 3, 8, complex_=True)
        b = smooth_probes(5, 3, 16, complex_=True)
        for pa, pb in zip(a, b):
            np.testing.assert_array_equal(pa.coefficients, pb.coefficients[:, :8])


class TestGenerator:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_n1_matches_hand_assembly(self, variant, rng):
        p = random_params(rng, variant)
        np.testing.assert_allclose(assemble_generator(p, 1).entries, hand_generator_n1(p),
                                   rtol=1e-14, atol=1e-14)

    def test_n1_reference_eigenvalues(self):
        p = ModelParameters(variant="System01", exponents=(0, 0, 0))
        gen = assemble_generator(p, 1)
        ref = np.sort_complex(np.linalg.eigvals(hand_generator_n1(p)))
        np.testing.assert_allclose(np.sort_complex(gen.eigenvalues), ref, atol=1e-12)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_identity_injections(self, variant, rng):
        gen = assemble_generator(random_params(rng, variant), 6)
        for d, v in ((0, 1), (2, 3), (4, 5), (6, 7)):
            for col in range(9):
                expected = np.eye(6) if col == v else np.zeros((6, 6))
                np.testing.assert_array_equal(gen.block(d, col), expected)

    def test_zero_state_maps_to_zero(self, rng):
        gen = assemble_generator(random_params(rng, Variant.SYSTEM02), 5)
        assert np.all(gen.apply(StateVector.zeros(5)).coefficients == 0.0)

    def test_decoupled_heat_row(self):
        p = ModelParameters.conservative(K=2.0, rho5=0.5)
        gen = assemble_generator(p, 4)
        img = gen.apply(StateVector.from_fields(theta=[1.0, 0, 0, 0]))
        expected = np.zeros((9, 4))
        expected[8, 0] = -p.K / p.rho5 * eigenvalue(1, p.l)
        np.testing.assert_allclose(img.coefficients, expected, atol=1e-15)

    def test_immutable(self):
        gen = assemble_generator(ModelParameters(), 3)
        with pytest.raises(ValueError):
            gen.entries[0, 0] = 1.0

    def test_dimension_mismatch(self):
        gen = assemble_generator(ModelParameters(), 3)
        with pytest.raises(DimensionError):
            gen.apply(StateVector.zeros(4))


class TestGram:
    def test_zero_state(self):
        assert assemble_gram(ModelParameters(), 4).norm_sq(StateVector.zeros(4)) == 0.0

    def test_system01_psi_mode(self):
        p = ModelParameters(variant="System01")
        U = StateVector.from_fields(psi=[1.0, 0.0, 0.0])
        assert assemble_gram(p, 3).norm_sq(U) == pytest.approx(2.0, rel=1e-15)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_term_by_term_quadrature(self, variant, rng):
        p = random_params(rng, variant)
        U = StateVector.random_smooth(rng, 8, p.l, decay=0.5)
        got = assemble_gram(p, 8).norm_sq(U)
        assert got == pytest.approx(quadrature_energy(p, U), rel=1e-12)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_positive_definite_random(self, variant, rng):
        for _ in range(100):
            p = random_params(rng, variant, low=0.05, high=20.0)
            for N in (4, 16, 32):
                gram = assemble_gram(p, N)
                G = gram.entries
                assert np.max(np.abs(G - G.T)) <= 1e-14 * np.max(np.abs(G))
                assert np.all(np.diag(gram.factor) > 0.0)
                np.testing.assert_allclose(gram.factor @ gram.factor.T, G, rtol=1e-12, atol=1e-12)

    def test_hermitian_inner(self, rng):
        gram = assemble_gram(ModelParameters(), 5)
        a = StateVector.random_smooth(rng, 5, complex_=True)
        b = StateVector.random_smooth(rng, 5, complex_=True)
        assert gram.inner(a, b) == pytest.approx(np.conj(gram.inner(b, a)), rel=1e-13)
        assert gram.inner(a, a).real == pytest.approx(gram.norm_sq(a), rel=1e-13)


class TestDissipation:
    def test_empty_channels(self):
        U = StateVector.from_fields(varphi=[1.0, 2.0], psi=[0.5, 0.1], y=[1, 1], z=[3, 0])
        assert dissipation_rate(ModelParameters(), U) == 0.0

    def test_reference_value(self):
        p = ModelParameters(variant="System01", gamma1=2.0, exponents=(0.5, 1, 1))
        U = StateVector.from_fields(u=[1.0, 0.0])
        assert dissipation_rate(p, U) == pytest.approx(-2.0, rel=1e-15)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_identity(self, variant, rng):
        for _ in range(20):
            p = random_params(rng, variant)
            gen, gram = assemble_generator(p, 10), assemble_gram(p, 10)
            for _ in range(10):
                U = StateVector.random_smooth(rng, 10, p.l, decay=rng.uniform(0, 2), complex_=True)
                lhs = gram.inner(gen.apply(U), U).real
                rate = dissipation_rate(p, U)
                assert rate <= 0.0
                assert abs(lhs - rate) <= 1e-10 * (1.0 + gram.norm_sq(U))

    def test_conservative_beams_are_skew(self, rng):
        p = ModelParameters.conservative()
        gen, gram = assemble_generator(p, 12), assemble_gram(p, 12)
        for _ in range(20):
            c = StateVector.random_smooth(rng, 12, p.l).coefficients.copy()
            c[8] = 0.0
            U = StateVector(c, p.l)
            assert abs(gram.inner(gen.apply(U), U)) <= 1e-12 * gram.norm_sq(U)


class TestStationary:
    def test_zero(self):
        U = stationary_solve(ModelParameters(), 4, StateVector.zeros(4))
        assert np.all(U.coefficients == 0.0)

    def test_heat_block(self):
        p = ModelParameters(delta=0.0, allow_zero_delta=True, K=3.0, rho5=2.0)
        U = stationary_solve(p, 3, StateVector.from_fields(theta=[1.0, 0.0, 0.0]))
        assert U.theta[0] == pytest.approx(p.rho5 / (p.K * eigenvalue(1, p.l)), rel=1e-14)
        assert np.allclose(U.coefficients[:8], 0.0, atol=1e-15)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_residual(self, variant, rng):
        p = random_params(rng, variant)
        gen, gram = assemble_generator(p, 8), assemble_gram(p, 8)
        worst = 0.0
        for _ in range(10):
            F = StateVector.random_smooth(rng, 8, p.l, complex_=True)
            U = stationary_solve(p, 8, F, gen=gen)
            r = StateVector(gen.apply(U).coefficients + F.coefficients, p.l)
            assert gram.norm(r) <= 1e-10 * gram.norm(F)
            worst = max(worst, gram.norm(U) / gram.norm(F))
        assert np.isfinite(worst)
