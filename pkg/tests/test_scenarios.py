import numpy as np
import pytest

import featkrr.scenarios as sc
from featkrr.scenarios import (
    EffectTerm,
    ScenarioSpec,
    anova_check,
    generate,
    grouped_conditional_mean,
    support_metrics,
)


def main_effect_spec(**kw):
    defaults = dict(
        d=3,
        n=500,
        effects=(EffectTerm((0,), "linear", 1.0),),
        relevant_dist="rademacher",
        noise_level=0.0,
        seed=0,
    )
    defaults.update(kw)
    return ScenarioSpec(**defaults)


class TestSpecValidation:
    def test_quadratic_on_rademacher_rejected(self):
        with pytest.raises(ValueError):
            main_effect_spec(effects=(EffectTerm((0,), "quadratic", 1.0),))

    def test_coordinate_out_of_range(self):
        with pytest.raises(ValueError):
            main_effect_spec(effects=(EffectTerm((5,), "linear", 1.0),))

    def test_duplicate_terms(self):
        with pytest.raises(ValueError):
            main_effect_spec(effects=(EffectTerm((0,), "linear", 1.0), EffectTerm((0,), "linear", 2.0)))

    def test_product_needs_two_coordinates(self):
        with pytest.raises(ValueError):
            main_effect_spec(effects=(EffectTerm((0,), "product", 1.0),))

    def test_s_star_and_noise(self):
        spec = main_effect_spec(d=4, effects=(EffectTerm((0, 2), "product", 1.0),))
        assert spec.s_star == {0, 2}
        assert spec.noise_coords == (1, 3)


class TestGenerate:
    def test_main_effect_conditional_means(self):
        spec = main_effect_spec(center_y=False)
        data, truth = generate(spec)
        cm1 = truth.conditional_mean({0}, data.x)
        assert np.allclose(cm1, data.x[:, 0])
        cm2 = truth.conditional_mean({1}, data.x)
        assert not cm2.any()

    def test_quadratic_gaussian_blind_structure(self):
        spec = main_effect_spec(
            n=3000,
            effects=(EffectTerm((0,), "quadratic", 1.0),),
            relevant_dist="three_point",
            seed=5,
        )
        data, truth = generate(spec)
        # linearly uncorrelated, yet conditionally informative
        assert abs(np.mean(data.y * data.x[:, 0])) < 4.0 / np.sqrt(spec.n)
        assert np.std(truth.conditional_mean({0}, data.x)) > 0.1

    def test_xor_conditional_structure(self):
        spec = main_effect_spec(
            d=3, effects=(EffectTerm((0, 1), "product", 1.0),), center_y=False
        )
        data, truth = generate(spec)
        assert not truth.conditional_mean({0}, data.x).any()
        assert not truth.conditional_mean({1}, data.x).any()
        assert np.allclose(truth.conditional_mean({0, 1}, data.x), data.x[:, 0] * data.x[:, 1])

    def test_centering_shift_consistency(self):
        spec = main_effect_spec(noise_level=0.3, seed=9)
        data, truth = generate(spec)
        assert abs(data.y.mean()) < 1e-12
        full = truth.conditional_mean(set(range(spec.d)), data.x)
        # conditional mean of everything differs from y only by the response noise
        resid = data.y - full
        assert np.std(resid) == pytest.approx(0.3, abs=0.05)

    def test_seed_determinism(self):
        spec = main_effect_spec(noise_level=0.1)
        a, _ = generate(spec)
        b, _ = generate(spec)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)

    def test_tower_property_on_nested_subsets(self):
        spec = ScenarioSpec(
            d=5,
            n=4000,
            effects=(
                EffectTerm((0,), "linear", 1.0),
                EffectTerm((1,), "quadratic", 0.5),
                EffectTerm((0, 1), "product", 0.7),
            ),
            relevant_dist="uniform",
            noise_level=0.0,
            seed=2,
        )
        data, truth = generate(spec)
        cm_small = truth.conditional_mean({0}, data.x)
        cm_big = truth.conditional_mean({0, 1}, data.x)
        gap = cm_big - cm_small
        # components outside the small subset are mean zero against it
        assert abs(np.mean(gap * cm_small)) < 4.0 / np.sqrt(spec.n)

    def test_noise_covariance_shape_rejected(self):
        spec = main_effect_spec(noise_cov=np.eye(3))
        with pytest.raises(ValueError):
            generate(spec)

    def test_correlated_noise_covariance_respected(self):
        cov = np.array([[1.0, 0.8], [0.8, 1.0]])
        spec = main_effect_spec(n=6000, noise_cov=cov, seed=12)
        data, truth = generate(spec)
        i, j = truth.noise_coords
        got = np.corrcoef(data.x[:, i], data.x[:, j])[0, 1]
        assert got == pytest.approx(0.8, abs=0.03)


class TestAnovaCheck:
    def test_xor_orthogonality_passes(self):
        spec = ScenarioSpec(
            d=4,
            n=10_000,
            effects=(EffectTerm((0, 1), "product", 1.0),),
            relevant_dist="rademacher",
            noise_level=0.0,
            seed=3,
        )
        data, truth = generate(spec)
        report = anova_check(spec, data, truth)
        assert report.ok

    def test_noise_unaffected_by_response_noise(self):
        spec = main_effect_spec(n=10_000, noise_level=0.5, seed=4)
        data, truth = generate(spec)
        assert anova_check(spec, data, truth).ok

    def test_miscentered_effect_flagged(self, monkeypatch):
        def raw_quadratic(cols, dist):
            return np.square(cols[:, 0])  # deliberately uncentered

        monkeypatch.setitem(sc.EFFECTS, "quadratic_raw", (raw_quadratic, lambda k: k == 1))
        spec = ScenarioSpec(
            d=2,
            n=4000,
            effects=(EffectTerm((0,), "quadratic_raw", 1.0),),
            relevant_dist="three_point",
            noise_level=0.0,
            seed=6,
            center_y=False,
        )
        data, truth = generate(spec)
        report = anova_check(spec, data, truth)
        assert any(flag.startswith("mean:") for flag in report.flagged)

    def test_noise_gaussianity_moments_reported(self):
        spec = main_effect_spec(d=4, n=8000, seed=8)
        data, truth = generate(spec)
        report = anova_check(spec, data, truth)
        assert set(report.noise_moments) == set(truth.noise_coords)
        assert report.ok


class TestGroupedConditionalMean:
    def test_matches_cell_averages(self):
        X = np.array([[1.0, 5.0], [1.0, 6.0], [-1.0, 7.0]])
        y = np.array([2.0, 4.0, 9.0])
        cm = grouped_conditional_mean(X, y, [0])
        assert np.allclose(cm, [3.0, 3.0, 9.0])

    def test_empty_subset_returns_grand_mean(self):
        cm = grouped_conditional_mean(np.zeros((3, 1)), np.array([1.0, 2.0, 3.0]), [])
        assert np.allclose(cm, 2.0)


class TestSupportMetrics:
    def test_exact_recovery(self):
        m = support_metrics(np.array([1.0, 0.0, 0.0]), {0})
        assert m.exact_recovery and m.false_actives == 0 and m.missed == 0

    def test_false_active_with_tolerance(self):
        m = support_metrics(np.array([1.0, 0.2, 0.0]), {0}, zero_tol=0.05)
        assert m.false_actives == 1 and not m.exact_recovery

    def test_missed(self):
        m = support_metrics(np.zeros(3), {0})
        assert m.missed == 1 and not m.exact_recovery

    def test_zero_tol_masks_small_values(self):
        m = support_metrics(np.array([1.0, 0.04, 0.0]), {0}, zero_tol=0.05)
        assert m.exact_recovery
