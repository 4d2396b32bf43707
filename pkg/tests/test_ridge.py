import numpy as np
import pytest

from featkrr.kernels import KernelSpec, gram
from featkrr.ridge import SampleSet, krr_fit, objective_value, predict

LAP = KernelSpec.laplace()
GAU = KernelSpec.gaussian()


def random_instance(seed, n_max=40, d_max=5):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, n_max))
    d = int(rng.integers(1, d_max))
    data = SampleSet(rng.normal(size=(n, d)), rng.normal(size=n))
    beta = rng.normal(size=d)
    return data, beta


class TestSampleSet:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            SampleSet(np.array([[np.inf]]), np.array([1.0]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            SampleSet(np.ones((3, 2)), np.ones(2))

    def test_centering(self):
        data = SampleSet(np.ones((3, 1)), np.array([1.0, 2.0, 3.0]))
        assert abs(data.centered().y.mean()) < 1e-12


class TestClosedForms:
    def test_single_point(self):
        lam, y1 = 0.7, -2.5
        data = SampleSet(np.array([[0.3]]), np.array([y1]))
        fit = krr_fit(LAP, data, np.array([1.0]), lam)
        assert fit.dual[0] == pytest.approx(y1 / (1 + lam), rel=1e-14)
        assert fit.residuals[0] == pytest.approx(lam * y1 / (1 + lam), rel=1e-14)
        assert fit.objective == pytest.approx(lam * y1**2 / (1 + lam), rel=1e-14)
        assert predict(fit, LAP, data, np.array([0.3])) == pytest.approx(y1 / (1 + lam), rel=1e-14)

    def test_beta_zero_centered_response(self):
        rng = np.random.default_rng(2)
        y = rng.normal(size=12)
        y -= y.mean()
        data = SampleSet(rng.normal(size=(12, 3)), y)
        fit = krr_fit(LAP, data, np.zeros(3), 0.05)
        preds = y - fit.residuals
        assert np.max(np.abs(preds)) < 1e-10
        assert fit.objective == pytest.approx(data.mean_y_squared(), rel=1e-12)

    def test_zero_response(self):
        data = SampleSet(np.random.default_rng(0).normal(size=(6, 2)), np.zeros(6))
        fit = krr_fit(GAU, data, np.ones(2), 0.1)
        assert not fit.dual.any()
        assert fit.objective == 0.0

    def test_identity_gram_regime(self):
        # far-apart points make G = I, with objective mean(y^2) n lam / (1 + n lam)
        rng = np.random.default_rng(4)
        n = 16
        data = SampleSet(rng.uniform(-1, 1, size=(n, 2)), rng.normal(size=n))
        lam = 0.3
        j = objective_value(LAP, data, np.full(2, 1e6), lam)
        expected = data.mean_y_squared() * n * lam / (1 + n * lam)
        assert j == pytest.approx(expected, rel=1e-9)

    def test_large_lambda_approaches_mean_square(self):
        data, beta = random_instance(9)
        j = objective_value(LAP, data, beta, 1e8)
        assert j == pytest.approx(data.mean_y_squared(), rel=1e-6)
        assert j <= data.mean_y_squared()

    def test_prediction_decays_far_away(self):
        data, beta = random_instance(10, d_max=3)
        fit = krr_fit(LAP, data, np.ones(data.dim), 0.1)
        far = np.full(data.dim, 1e4)
        assert abs(predict(fit, LAP, data, far)) < 1e-12


class TestIdentities:
    @pytest.mark.parametrize("spec", [LAP, GAU], ids=["laplace", "gaussian"])
    @pytest.mark.parametrize("lam", [1e-2, 1.0])
    def test_euler_lagrange_and_residual_kernel(self, spec, lam):
        for seed in range(6):
            data, beta = random_instance(seed)
            fit = krr_fit(spec, data, beta, lam)
            G = gram(spec, beta, data.x)
            n = data.n
            el = np.max(np.abs(G @ fit.residuals / n - lam * (G @ fit.dual)))
            assert el <= 1e-8 * max(1.0, np.max(np.abs(data.y)))
            lhs = fit.residuals @ (G @ fit.residuals) / n**2
            assert lhs == pytest.approx(lam**2 * fit.rkhs_norm_sq, rel=1e-8)
            # dual carries the residuals exactly
            assert np.max(np.abs(fit.dual - fit.residuals / (n * lam))) < 1e-10

    def test_objective_and_penalty_bounds(self):
        for seed in range(8):
            data, beta = random_instance(seed + 50)
            for lam in (1e-3, 1e-1, 10.0):
                fit = krr_fit(LAP, data, beta, lam)
                bound = data.mean_y_squared() * (1 + 1e-10)
                assert fit.objective <= bound
                assert lam * fit.rkhs_norm_sq <= bound

    def test_sign_invariance_exact(self):
        for seed in range(5):
            data, beta = random_instance(seed + 100)
            for spec in (LAP, GAU):
                assert objective_value(spec, data, beta, 0.1) == objective_value(spec, data, np.abs(beta), 0.1)

    def test_continuity_on_local_grid(self):
        data, beta = random_instance(123, n_max=24)
        lam = 0.1
        rng = np.random.default_rng(0)
        v = rng.normal(size=data.dim)
        v /= np.linalg.norm(v)
        # derivative magnitude bound: (1/lam) E|r r'| |psi'| sum_k |v_k||dx_k|
        diffs = np.abs(data.x[:, None, :] - data.x[None, :, :])
        slope_cap = data.mean_y_squared() / lam * LAP.mu.max_scale * float(
            np.max(diffs @ np.abs(v))
        )
        step = 1e-4
        grid = [objective_value(LAP, data, beta + s * v, lam) for s in np.arange(0, 20) * step]
        jumps = np.abs(np.diff(grid))
        assert np.max(jumps) <= slope_cap * step * 1.01


class TestEscape:
    def test_far_field_within_diagonal_artifact(self):
        rng = np.random.default_rng(77)
        n = 128
        data = SampleSet(rng.uniform(-1, 1, size=(n, 3)), rng.normal(size=n))
        m2 = data.mean_y_squared()
        for lam in (1e-2, 1.0):
            j = objective_value(LAP, data, np.full(3, 1e6), lam)
            assert m2 - j <= m2 / (n * lam) + 1e-6
            assert j <= m2


class TestErrors:
    def test_nonpositive_lambda(self):
        data, beta = random_instance(1)
        with pytest.raises(ValueError):
            krr_fit(LAP, data, beta, 0.0)

    def test_beta_length_mismatch(self):
        data, _ = random_instance(2, d_max=3)
        with pytest.raises(ValueError):
            krr_fit(LAP, data, np.ones(data.dim + 1), 0.1)

    def test_predict_dimension_mismatch(self):
        data, beta = random_instance(3)
        fit = krr_fit(LAP, data, beta, 0.1)
        with pytest.raises(ValueError):
            predict(fit, LAP, data, np.zeros(data.dim + 2))
