import numpy as np
import pytest

from featkrr.kernels import KernelSpec, UnsupportedFamily
from featkrr.proxy import (
    ANOVA_CONDITIONAL,
    RESIDUAL_WEIGHTED,
    cnd_quadrature_oracle,
    decomposition_gap,
    proxy_anova,
    proxy_residual_weighted,
    sample_spectral,
)
from featkrr.ridge import SampleSet, krr_fit
from featkrr.scenarios import EffectTerm, ScenarioSpec, generate

LAP = KernelSpec.laplace()
GAU = KernelSpec.gaussian()
MIX = KernelSpec.l1_mixture([(1.0, 0.5), (3.0, 0.5)])


def rademacher_pair():
    return SampleSet(np.array([[-1.0], [1.0]]), np.array([-1.0, 1.0]))


class TestSampleSpectral:
    def test_laplace_atom(self):
        rng = np.random.default_rng(0)
        t, omega, mass = sample_spectral(LAP.mu, 3, rng)
        assert t == 1.0 and mass == 1.0 and omega.shape == (3,)

    def test_atom_reweighting(self):
        # P(t = 3) = 1.5 / 2.0, total mass 2.0
        rng = np.random.default_rng(1)
        draws = np.array([sample_spectral(MIX.mu, 1, rng)[0] for _ in range(4000)])
        assert MIX.mu.mean_scale == 2.0
        assert np.mean(draws == 3.0) == pytest.approx(0.75, abs=0.03)

    def test_zero_dimension_edge(self):
        rng = np.random.default_rng(2)
        t, omega, mass = sample_spectral(LAP.mu, 0, rng)
        assert omega.shape == (0,)

    def test_cauchy_scale(self):
        # per-coordinate law is Cauchy(0, t / (2 pi)): CDF at one scale is 3/4
        rng = np.random.default_rng(3)
        omegas = np.array([sample_spectral(LAP.mu, 1, rng)[1][0] for _ in range(4000)])
        gamma = 1.0 / (2 * np.pi)
        assert np.mean(omegas < gamma) == pytest.approx(0.75, abs=0.03)


class TestResidualWeightedProxy:
    def test_zero_response(self):
        data = SampleSet(np.array([[-1.0], [1.0]]), np.zeros(2))
        fit = krr_fit(LAP, data, np.zeros(1), 0.1)
        est = proxy_residual_weighted(LAP, data, fit, 0, draws=16, seed=0)
        assert est.value == 0.0 and est.mode == RESIDUAL_WEIGHTED

    def test_rademacher_pair_exact(self):
        # at beta = 0 the phase drops out and the estimate is -E[Y Y' |dX|] = 1
        data = rademacher_pair()
        fit = krr_fit(LAP, data, np.zeros(1), 0.1)
        est = proxy_residual_weighted(LAP, data, fit, 0, draws=32, seed=5)
        assert est.value == pytest.approx(1.0, abs=1e-12)
        assert est.std_error == pytest.approx(0.0, abs=1e-12)

    def test_single_sample_vanishes(self):
        data = SampleSet(np.array([[0.3]]), np.array([1.0]))
        fit = krr_fit(LAP, data, np.ones(1), 0.1)
        assert proxy_residual_weighted(LAP, data, fit, 0, draws=8, seed=0).value == 0.0

    def test_per_draw_nonnegative(self):
        rng = np.random.default_rng(7)
        data = SampleSet(rng.normal(size=(40, 3)), rng.normal(size=40))
        fit = krr_fit(LAP, data, np.array([1.0, 0.5, 0.0]), 0.05)
        est = proxy_residual_weighted(LAP, data, fit, 2, draws=300, seed=1)
        assert est.per_draw.min() >= -1e-12

    def test_radial_unsupported(self):
        data = rademacher_pair()
        fit = krr_fit(GAU, data, np.zeros(1), 0.1)
        with pytest.raises(UnsupportedFamily):
            proxy_residual_weighted(GAU, data, fit, 0)

    def test_seed_determinism(self):
        rng = np.random.default_rng(8)
        data = SampleSet(rng.normal(size=(20, 2)), rng.normal(size=20))
        fit = krr_fit(LAP, data, np.array([1.0, 0.0]), 0.1)
        a = proxy_residual_weighted(LAP, data, fit, 1, draws=64, seed=42)
        b = proxy_residual_weighted(LAP, data, fit, 1, draws=64, seed=42)
        assert a.value == b.value and a.std_error == b.std_error


class TestAnovaProxy:
    def test_matches_residual_weighted_at_origin(self):
        # centered response: residuals equal y and both estimators coincide
        rng = np.random.default_rng(9)
        y = rng.normal(size=24)
        y -= y.mean()
        data = SampleSet(rng.normal(size=(24, 2)), y)
        fit = krr_fit(LAP, data, np.zeros(2), 0.3)
        rw = proxy_residual_weighted(LAP, data, fit, 0, draws=50, seed=3)
        an = proxy_anova(LAP, data, np.zeros(2), 0, np.zeros(24), draws=50, seed=3)
        assert an.value == pytest.approx(rw.value, rel=1e-12)
        assert an.mode == ANOVA_CONDITIONAL

    def test_saturated_support_vanishes(self):
        spec = ScenarioSpec(d=4, n=400,
                            effects=(EffectTerm((0,), "linear", 1.0), EffectTerm((1,), "quadratic", 1.0)),
                            relevant_dist="three_point", noise_level=0.0, seed=0)
        data, truth = generate(spec)
        beta = np.array([1.0, 1.0, 0.0, 0.0])
        cm = truth.conditional_mean_for_support(beta, data.x)
        est = proxy_anova(LAP, data, beta, 2, cm, draws=64, seed=0)
        assert abs(est.value) <= 3.0 * est.std_error + 1e-12

    def test_xor_partner_positive(self):
        spec = ScenarioSpec(d=3, n=1200, effects=(EffectTerm((0, 1), "product", 1.0),),
                            relevant_dist="rademacher", noise_level=0.0, seed=1)
        data, truth = generate(spec)
        beta = np.array([1.0, 0.0, 0.0])
        cm = truth.conditional_mean_for_support(beta, data.x)
        est = proxy_anova(LAP, data, beta, 1, cm, draws=400, seed=2)
        assert est.value > 3.0 * est.std_error
        assert est.value > 0.1

    def test_zero_response(self):
        data = SampleSet(np.array([[0.0, 1.0], [1.0, 0.0]]), np.zeros(2))
        est = proxy_anova(LAP, data, np.zeros(2), 0, np.zeros(2), draws=8, seed=0)
        assert est.value == 0.0

    def test_residual_weighted_converges_to_anova(self):
        # on a discrete design the small-lambda fit reproduces the grouped
        # conditional mean, so the two estimators agree within Monte-Carlo bands
        from featkrr.scenarios import grouped_conditional_mean

        spec = ScenarioSpec(
            d=4, n=800,
            effects=(EffectTerm((0,), "linear", 1.0), EffectTerm((1,), "quadratic", 1.0)),
            relevant_dist="three_point", noise_level=0.0, seed=11,
        )
        data, truth = generate(spec)
        beta = np.array([1.0, 0.0, 0.0, 0.0])
        cm = grouped_conditional_mean(data.x, data.y, [0])
        an = proxy_anova(LAP, data, beta, 1, cm, draws=600, seed=3)
        gaps = []
        for lam in (1e-2, 1e-4):
            fit = krr_fit(LAP, data, beta, lam)
            rw = proxy_residual_weighted(LAP, data, fit, 1, draws=600, seed=3)
            assert abs(rw.value - an.value) <= 3.0 * (rw.std_error + an.std_error)
            gaps.append(abs(rw.value - an.value))
        assert gaps[1] < gaps[0]  # shrinking lambda tightens the agreement

    def test_missing_conditional_mean_rejected(self):
        data = rademacher_pair()
        with pytest.raises(ValueError):
            proxy_anova(LAP, data, np.zeros(1), 0, np.zeros(5), draws=8, seed=0)


class TestQuadratureOracle:
    def test_zero_function(self):
        assert cnd_quadrature_oracle([(0.0, 0.0, 1.0)]) == 0.0

    def test_rademacher(self):
        val = cnd_quadrature_oracle([(-1.0, -1.0, 0.5), (1.0, 1.0, 0.5)])
        assert val == pytest.approx(-1.0, abs=1e-4)

    def test_three_point_unit_weights(self):
        # unit weights reproduce the raw pair enumeration sum of -4/9
        x = [-1.0, 0.0, 1.0]
        f = [xx**2 - 2.0 / 3.0 for xx in x]
        val = cnd_quadrature_oracle(list(zip(x, f, [1.0] * 3)))
        assert val == pytest.approx(-4.0 / 9.0, abs=1e-4)

    def test_three_point_probability_weights(self):
        x = [-1.0, 0.0, 1.0]
        f = [xx**2 - 2.0 / 3.0 for xx in x]
        val = cnd_quadrature_oracle(list(zip(x, f, [1.0 / 3.0] * 3)))
        assert val == pytest.approx(-4.0 / 81.0, abs=1e-4)

    def test_random_fixtures_match_double_sum(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            m = int(rng.integers(3, 13))
            x = rng.normal(size=m)
            f = rng.normal(size=m) + 1j * rng.normal(size=m)
            w = rng.random(m)
            w /= w.sum()
            f = f - np.sum(w * f)
            A = np.abs(x[:, None] - x[None, :])
            ds = float(np.real((w * f) @ (A @ (w * np.conj(f)))))
            val = cnd_quadrature_oracle(list(zip(x, f, w)))
            assert val == pytest.approx(ds, abs=1e-4)
            assert val <= 1e-12

    def test_mean_zero_precondition(self):
        with pytest.raises(ValueError):
            cnd_quadrature_oracle([(-1.0, 1.0, 0.5), (1.0, 1.0, 0.5)])

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            cnd_quadrature_oracle([(-1.0, -1.0, -0.5), (1.0, 1.0, 0.5)])


class TestDecompositionGap:
    def test_zero_response_gaps_vanish(self):
        data = SampleSet(np.array([[-1.0, 0.5], [1.0, -0.5], [0.0, 0.2]]), np.zeros(3))
        rows, est = decomposition_gap(LAP, data, np.array([1.0, 0.0]), 1, [0.1, 0.01],
                                      np.zeros(3), draws=16, seed=0)
        assert est.value == 0.0
        assert all(gap == 0.0 for _, gap in rows)

    def test_requires_zero_probe_coordinate(self):
        data = rademacher_pair()
        with pytest.raises(ValueError):
            decomposition_gap(LAP, data, np.array([1.0]), 0, [0.1], np.zeros(2), draws=4, seed=0)
