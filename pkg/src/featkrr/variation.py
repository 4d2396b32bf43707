"""Directional derivatives of the reduced objective J(beta, lam).

For a solved fit with residual vector r, the one-sided derivative along v is

    DJ(beta, lam)[v] = -(1 / (lam n^2)) * sum_{i,j} r_i r_j DK_beta(x_i, x_j)[v]

with the diagonal included, matching the solver's product-measure convention.
For the l1 family the derivative is nonsmooth at beta_k = 0 and splits into a
linear part g_k v_k on active coordinates and a one-sided part h_k |v_k| on
inactive ones; for the radial family it is linear in v everywhere.

Pair sums are O(n^2 d). A PairCache amortizes the per-coordinate difference
matrices across repeated evaluations on the same sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import L1, RADIAL, KernelSpec, psi_prime
from .ridge import RidgeFit, SampleSet, krr_fit, objective_value

# Cache per-coordinate pair matrices only below this entry count (~0.5 GB).
_CACHE_MAX_ENTRIES = 64_000_000


class PairCache:
    """Per-coordinate pairwise |dx_k| (l1) or dx_k^2 (radial) matrices."""

    def __init__(self, spec: KernelSpec, X: np.ndarray):
        X = np.asarray(X, dtype=float)
        self.family = spec.family
        n, d = X.shape
        self._mats = []
        for k in range(d):
            diff = X[:, k, None] - X[None, :, k]
            self._mats.append(np.abs(diff) if spec.family == L1 else np.square(diff))

    def coord(self, k: int) -> np.ndarray:
        return self._mats[k]

    def distance(self, beta: np.ndarray) -> np.ndarray:
        scale = np.abs(beta) if self.family == L1 else np.square(beta)
        D = np.zeros_like(self._mats[0])
        for k in np.flatnonzero(scale):
            D += scale[k] * self._mats[k]
        return D

    @staticmethod
    def fits_in_memory(n: int, d: int) -> bool:
        return n * n * d <= _CACHE_MAX_ENTRIES


@dataclass(frozen=True)
class DirectionalReport:
    """Per-coordinate derivative data with a stationarity verdict.

    Every coordinate index appears in exactly one of smooth_grad (g, active
    coordinates) and onesided_coeff (h, zero coordinates).
    """

    beta: np.ndarray
    lam: float
    smooth_grad: dict[int, float]
    onesided_coeff: dict[int, float]
    is_stationary: bool
    worst_violation: float
    tol_g: float
    tol_h: float


def default_tolerance(lam: float, mean_y_sq: float) -> float:
    """Derivative-scale tolerance: derivatives carry a 1/lam factor."""
    return 1e-6 * mean_y_sq / lam


def _pair_coefficients(spec, data, fit, cache=None):
    """c_k = (1/n^2) sum_ij r_i r_j psi'(D_ij) A_k,ij for every coordinate k.

    A_k is |dx_k| for the l1 family and dx_k^2 for the radial family.
    """
    n, d = data.x.shape
    cache = cache if cache is not None else PairCache(spec, data.x)
    D = cache.distance(fit.beta)
    M = psi_prime(spec, D) * np.outer(fit.residuals, fit.residuals)
    return np.array([float(np.sum(M * cache.coord(k))) for k in range(d)]) / n**2


def directional_derivative(spec: KernelSpec, data: SampleSet, fit: RidgeFit, v, cache=None) -> float:
    """Analytic one-sided derivative of J at fit.beta along v."""
    v = np.asarray(v, dtype=float)
    if v.shape != (data.dim,):
        raise ValueError("direction length must match the data dimension")
    c = _pair_coefficients(spec, data, fit, cache=cache)
    beta = fit.beta
    if spec.family == L1:
        w = np.where(beta != 0.0, np.sign(beta) * v, np.abs(v))
        return float(-np.dot(w, c) / fit.lam)
    return float(-2.0 * np.dot(beta * v, c) / fit.lam)


def coordinate_decomposition(
    spec: KernelSpec,
    data: SampleSet,
    fit: RidgeFit,
    tol_g: float | None = None,
    tol_h: float | None = None,
    cache=None,
) -> DirectionalReport:
    """Split DJ[.] into per-coordinate g (active) and h (zero) coefficients.

    For the radial family the derivative is linear, so every coordinate is
    reported in smooth_grad (h would be identically zero at beta_k = 0).
    """
    if tol_g is None:
        tol_g = default_tolerance(fit.lam, data.mean_y_squared())
    if tol_h is None:
        tol_h = default_tolerance(fit.lam, data.mean_y_squared())
    c = _pair_coefficients(spec, data, fit, cache=cache)
    beta = fit.beta
    smooth: dict[int, float] = {}
    onesided: dict[int, float] = {}
    if spec.family == L1:
        for k in range(data.dim):
            if beta[k] != 0.0:
                smooth[k] = float(-np.sign(beta[k]) * c[k] / fit.lam)
            else:
                onesided[k] = float(-c[k] / fit.lam)
    else:
        for k in range(data.dim):
            smooth[k] = float(-2.0 * beta[k] * c[k] / fit.lam)
    ok, worst = _certify(smooth, onesided, tol_g, tol_h)
    return DirectionalReport(
        beta=beta,
        lam=fit.lam,
        smooth_grad=smooth,
        onesided_coeff=onesided,
        is_stationary=ok,
        worst_violation=worst,
        tol_g=tol_g,
        tol_h=tol_h,
    )


def _certify(smooth, onesided, tol_g, tol_h):
    g_violation = max((abs(g) for g in smooth.values()), default=0.0) - tol_g
    h_violation = -min(onesided.values(), default=0.0) - tol_h
    worst = max(g_violation, h_violation, 0.0)
    return worst == 0.0, worst


def stationarity_certificate(report: DirectionalReport, tol_g: float, tol_h: float) -> tuple[bool, float]:
    """Re-evaluate a report's stationarity at the given tolerances."""
    return _certify(report.smooth_grad, report.onesided_coeff, tol_g, tol_h)


def reconstruct_from_report(report: DirectionalReport, v) -> float:
    """DJ[v] rebuilt from the g/h decomposition: sum g_k v_k + sum h_k |v_k|."""
    v = np.asarray(v, dtype=float)
    total = sum(g * v[k] for k, g in report.smooth_grad.items())
    total += sum(h * abs(v[k]) for k, h in report.onesided_coeff.items())
    return float(total)


@dataclass(frozen=True)
class FdRow:
    step: float
    analytic: float
    numeric: float
    rel_err: float


def finite_difference_check(spec, data, beta, lam, v, steps) -> list[FdRow]:
    """One-sided difference quotients of J against the analytic derivative.

    One-sided quotients are the reference because J is genuinely nonsmooth at
    beta_k = 0 for l1 kernels.
    """
    beta = np.asarray(beta, dtype=float)
    v = np.asarray(v, dtype=float)
    fit = krr_fit(spec, data, beta, lam)
    analytic = directional_derivative(spec, data, fit, v)
    rows = []
    for s in steps:
        if not s > 0:
            raise ValueError("steps must be positive")
        numeric = (objective_value(spec, data, beta + s * v, lam) - fit.objective) / s
        denom = max(abs(analytic), 1e-300)
        rows.append(FdRow(step=float(s), analytic=analytic, numeric=float(numeric),
                          rel_err=abs(numeric - analytic) / denom))
    return rows


def noise_descent_direction(beta, noise_coords) -> np.ndarray:
    """v = -(projection of beta onto the noise coordinates)."""
    beta = np.asarray(beta, dtype=float)
    v = np.zeros_like(beta)
    idx = list(noise_coords)
    if idx:
        v[idx] = -beta[idx]
    return v


def _pair_statistic_se(phi: np.ndarray) -> float:
    """Standard error of mean_ij(phi) for a symmetric pair statistic.

    Uses the U-statistic linearization: SE ~= 2 sd(row means) / sqrt(n).
    """
    n = phi.shape[0]
    row_means = phi.mean(axis=1)
    if n < 2:
        return 0.0
    return 2.0 * float(np.std(row_means, ddof=1)) / np.sqrt(n)


def directional_derivative_se(spec, data, fit, v, cache=None) -> tuple[float, float]:
    """Directional derivative plus a sampling standard error.

    The SE reflects the variability of the pair statistic under resampling of
    the data with the fitted residual function held fixed.
    """
    v = np.asarray(v, dtype=float)
    cache = cache if cache is not None else PairCache(spec, data.x)
    D = cache.distance(fit.beta)
    beta = fit.beta
    if spec.family == L1:
        w = np.where(beta != 0.0, np.sign(beta) * v, np.abs(v))
        A = np.zeros_like(D)
        for k in np.flatnonzero(w):
            A += w[k] * cache.coord(k)
    else:
        A = np.zeros_like(D)
        for k in np.flatnonzero(beta * v):
            A += 2.0 * beta[k] * v[k] * cache.coord(k)
    phi = np.outer(fit.residuals, fit.residuals) * psi_prime(spec, D) * A
    value = -float(phi.mean()) / fit.lam
    return value, _pair_statistic_se(phi) / fit.lam


def onesided_coefficient_se(spec, data, fit, coord: int, cache=None) -> tuple[float, float]:
    """h_coord (or the pair sum behind g_coord) with its sampling standard error."""
    cache = cache if cache is not None else PairCache(spec, data.x)
    D = cache.distance(fit.beta)
    phi = np.outer(fit.residuals, fit.residuals) * psi_prime(spec, D) * cache.coord(coord)
    value = -float(phi.mean()) / fit.lam
    return value, _pair_statistic_se(phi) / fit.lam


def radial_origin_curvature(spec: KernelSpec, data: SampleSet, lam: float, coord: int) -> float:
    """Second-order coefficient of s -> J(s e_coord, lam) at the origin, radial family.

    For centered y the quotient (J(s e_i) - J(0)) / s^2 converges to
    (2/lam) psi'(0) (mean(y x_i))^2, which is nonzero only for linearly
    correlated coordinates.
    """
    if spec.family != RADIAL:
        raise ValueError("origin curvature formula applies to the radial family")
    corr = float(np.mean(data.y * data.x[:, coord]))
    return 2.0 / lam * psi_prime(spec, 0.0) * corr**2
