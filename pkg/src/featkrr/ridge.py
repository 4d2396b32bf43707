"""Exact kernel ridge regression on the empirical measure of a finite sample.

The sample's empirical distribution plays the role of the population, so the
classical KRR identities (Euler-Lagrange, residual/dual proportionality,
objective bounds) hold to machine precision and can be tested tightly.

Conventions: the loss carries weight 1/n, so the representer system is
``(G + n*lam*I) dual = y`` and ``dual = residuals / (n*lam)`` exactly.
Expectations over independent copies are taken with the diagonal included,
i.e. (1/n^2) sums over all ordered pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .kernels import KernelSpec, gram


@dataclass(frozen=True)
class SampleSet:
    """An n x d design matrix and its n response values."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError("x must be an n x d matrix with n, d >= 1")
        if y.shape != (x.shape[0],):
            raise ValueError("y must be a vector matching the number of rows of x")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("sample entries must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def mean_y_squared(self) -> float:
        return float(np.mean(self.y**2))

    def centered(self) -> "SampleSet":
        """The same design with the empirical mean removed from y."""
        return SampleSet(self.x, self.y - self.y.mean())


@dataclass(frozen=True)
class RidgeFit:
    """A solved inner problem at fixed (beta, lambda)."""

    beta: np.ndarray
    lam: float
    dual: np.ndarray
    residuals: np.ndarray
    objective: float
    rkhs_norm_sq: float


def krr_fit(spec: KernelSpec, data: SampleSet, beta, lam: float, G: np.ndarray | None = None) -> RidgeFit:
    """Minimize (1/n) sum (y_i - f(b o x_i))^2 + lam ||f||^2 over the RKHS.

    A precomputed Gram matrix may be passed to amortize repeated solves at the
    same beta. The solve uses a Cholesky factorization of G + n*lam*I, which is
    positive definite for every lam > 0; no jitter is added.
    """
    if not lam > 0:
        raise ValueError("lam must be strictly positive")
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.dim,):
        raise ValueError("beta length must match the data dimension")
    if G is None:
        G = gram(spec, beta, data.x)
    n = data.n
    try:
        factor = cho_factor(G + n * lam * np.eye(n), lower=True, check_finite=False)
        dual = cho_solve(factor, data.y, check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - G + n lam I is SPD
        raise ArithmeticError("Gram solve failed") from exc
    preds = G @ dual
    residuals = data.y - preds
    rkhs_norm_sq = float(dual @ preds)
    objective = float(residuals @ residuals) / n + lam * rkhs_norm_sq
    return RidgeFit(
        beta=beta,
        lam=float(lam),
        dual=dual,
        residuals=residuals,
        objective=objective,
        rkhs_norm_sq=rkhs_norm_sq,
    )


def predict(fit: RidgeFit, spec: KernelSpec, data: SampleSet, z) -> float | np.ndarray:
    """Evaluate f_{beta,lam} at z: sum_i dual_i K_beta(x_i, z).

    Accepts a single point (1-d) or a stack of points (2-d, one per row).
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = z[None, :] if single else z
    if Z.shape[1] != data.dim:
        raise ValueError("query dimension must match the training data")
    K = gram(spec, fit.beta, Z, data.x)
    vals = K @ fit.dual
    return float(vals[0]) if single else vals


def objective_value(spec: KernelSpec, data: SampleSet, beta, lam: float, G: np.ndarray | None = None) -> float:
    """J(beta, lam): the minimized penalized squared error."""
    return krr_fit(spec, data, beta, lam, G=G).objective
