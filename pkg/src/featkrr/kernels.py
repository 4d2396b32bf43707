"""Mixture-generated translation-invariant kernels.

Two families are supported, both built from a discrete scale mixture of
exponentials ``psi(z) = sum_k p_k exp(-t_k z)``:

* ``"l1"``      -- K(x, x') = psi(||b o (x - x')||_1), Laplace kernel when the
  mixture is a single unit atom.
* ``"radial"``  -- K(x, x') = psi(||b o (x - x')||_2^2), Gaussian kernel when
  the mixture is a single unit atom.

Here ``b o x`` is the coordinate-wise (Hadamard) reweighting of the input.
All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

L1 = "l1"
RADIAL = "radial"

_FAMILIES = (L1, RADIAL)

# Mixture weights must sum to one this tightly to count as a probability measure.
_WEIGHT_TOL = 1e-12


class UnsupportedFamily(ValueError):
    """Raised when an operation is asked for a kernel family it does not cover."""


@dataclass(frozen=True)
class MixtureMeasure:
    """Discrete probability measure on (0, inf): atoms of (scale, weight)."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("mixture needs at least one atom")
        scales = np.array([t for t, _ in self.atoms], dtype=float)
        weights = np.array([p for _, p in self.atoms], dtype=float)
        if not np.all(np.isfinite(scales)) or np.any(scales <= 0):
            raise ValueError("atom scales must be finite and strictly positive")
        if np.any(weights < 0):
            raise ValueError("atom weights must be nonnegative")
        if abs(float(weights.sum()) - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"atom weights must sum to 1, got {weights.sum()!r}")

    @property
    def scales(self) -> np.ndarray:
        return np.array([t for t, _ in self.atoms], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms], dtype=float)

    @property
    def max_scale(self) -> float:
        """Largest atom scale; bounds |psi'| everywhere."""
        return float(self.scales.max())

    @property
    def mean_scale(self) -> float:
        """First moment sum_k p_k t_k; the total mass of the t-weighted spectral measure."""
        return float(np.dot(self.weights, self.scales))

    @classmethod
    def single(cls, scale: float = 1.0) -> "MixtureMeasure":
        return cls(atoms=((float(scale), 1.0),))


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus its generating mixture measure."""

    family: str
    mu: MixtureMeasure = field(default_factory=MixtureMeasure.single)

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}, expected one of {_FAMILIES}")

    @classmethod
    def laplace(cls) -> "KernelSpec":
        """exp(-||x - x'||_1)."""
        return cls(family=L1)

    @classmethod
    def gaussian(cls) -> "KernelSpec":
        """exp(-||x - x'||_2^2)."""
        return cls(family=RADIAL)

    @classmethod
    def l1_mixture(cls, atoms) -> "KernelSpec":
        return cls(family=L1, mu=MixtureMeasure(tuple((float(t), float(p)) for t, p in atoms)))

    @classmethod
    def radial_mixture(cls, atoms) -> "KernelSpec":
        return cls(family=RADIAL, mu=MixtureMeasure(tuple((float(t), float(p)) for t, p in atoms)))


def psi(spec: KernelSpec, z):
    """Evaluate sum_k p_k exp(-t_k z) for z >= 0 (scalar or array)."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("psi requires z >= 0")
    t = spec.mu.scales
    p = spec.mu.weights
    out = np.einsum("k,k...->...", p, np.exp(-np.multiply.outer(t, z)))
    return float(out) if out.ndim == 0 else out


def psi_prime(spec: KernelSpec, z):
    """Right-hand derivative -sum_k p_k t_k exp(-t_k z); strictly negative, >= -max_scale."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("psi_prime requires z >= 0")
    t = spec.mu.scales
    p = spec.mu.weights
    out = -np.einsum("k,k...->...", p * t, np.exp(-np.multiply.outer(t, z)))
    return float(out) if out.ndim == 0 else out


def _check_dims(*vecs) -> int:
    d = None
    for v in vecs:
        if v.ndim != 1:
            raise ValueError("expected 1-d vectors")
        if d is None:
            d = v.shape[0]
        elif v.shape[0] != d:
            raise ValueError(f"dimension mismatch: {v.shape[0]} vs {d}")
    return d


def kernel_eval(spec: KernelSpec, beta, x, xp) -> float:
    """K_beta(x, x') for a single pair of points.

    Depends on beta only through |beta_i| coordinate-wise, so the value is
    invariant under sign flips of beta.
    """
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    _check_dims(beta, x, xp)
    delta = x - xp
    if spec.family == L1:
        z = float(np.abs(beta * delta).sum())
    else:
        z = float(np.square(beta * delta).sum())
    return psi(spec, z)


def w_coeff(beta_i: float, v_i: float) -> float:
    """One-sided weight of |.| at beta_i along v_i: sgn(beta_i) v_i, or |v_i| at zero.

    Exact comparison with zero is deliberate: the optimizer produces hard
    zeros, and an epsilon zone here would silently change stationarity
    certificates.
    """
    if beta_i == 0.0:
        return abs(v_i)
    return float(np.sign(beta_i)) * v_i


def dkernel_directional(spec: KernelSpec, beta, x, xp, v) -> float:
    """One-sided directional derivative of s -> K_{beta+sv}(x, x') at s = 0+."""
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_dims(beta, x, xp, v)
    delta = x - xp
    if spec.family == L1:
        z = float(np.abs(beta * delta).sum())
        w = np.where(beta != 0.0, np.sign(beta) * v, np.abs(v))
        return psi_prime(spec, z) * float(np.dot(w, np.abs(delta)))
    z = float(np.square(beta * delta).sum())
    return 2.0 * psi_prime(spec, z) * float(np.sum(beta * v * np.square(delta)))


def spectral_density(spec: KernelSpec, t: float, omega) -> float:
    """Product-Cauchy density prod_j 2t / (4 pi^2 omega_j^2 + t^2) for the l1 family."""
    if spec.family != L1:
        raise UnsupportedFamily("spectral density is defined for the l1 family only")
    if t <= 0:
        raise ValueError("scale t must be positive")
    omega = np.asarray(omega, dtype=float)
    return float(np.prod(2.0 * t / (4.0 * np.pi**2 * omega**2 + t**2)))


def weighted_distance_matrix(spec: KernelSpec, beta, X, Z=None) -> np.ndarray:
    """Pairwise psi-argument matrix between rows of X and Z (Z defaults to X).

    l1 family: sum_k |beta_k| |x_ik - z_jk|; radial: sum_k beta_k^2 (x_ik - z_jk)^2.
    Coordinates with beta_k == 0 are skipped, which also keeps the evaluation
    exact at hard zeros.
    """
    X = np.asarray(X, dtype=float)
    Z = X if Z is None else np.asarray(Z, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if X.ndim != 2 or Z.ndim != 2 or X.shape[1] != Z.shape[1]:
        raise ValueError("X and Z must be 2-d with matching column count")
    if beta.shape != (X.shape[1],):
        raise ValueError("beta length must match the data dimension")
    D = np.zeros((X.shape[0], Z.shape[0]))
    for k in np.flatnonzero(beta):
        diff = X[:, k, None] - Z[None, :, k]
        if spec.family == L1:
            D += abs(beta[k]) * np.abs(diff)
        else:
            D += beta[k] ** 2 * np.square(diff)
    return D


def gram(spec: KernelSpec, beta, X, Z=None) -> np.ndarray:
    """Kernel matrix psi(D) between rows of X and Z."""
    return psi(spec, weighted_distance_matrix(spec, beta, X, Z))
