"""Wage-offer distributions with bounded support.

Each family exposes the CDF, sampling, and the expected-surplus integral

    S(R) = int_R^{w_max} (w - R) dF(w)

which is the only functional of F the reservation-earnings equation needs.
The uniform family has closed forms; the truncated lognormal uses 64-node
Gauss-Legendre quadrature on [max(R, w_min), w_max].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from ..errors import DomainError

GL_NODES = 64
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_NODES)


def gauss_legendre(func, lo, hi):
    """Integrate a vectorized ``func`` over [lo, hi] with the fixed 64-node rule."""
    if hi <= lo:
        return 0.0
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    return float(half * np.dot(_GL_W, func(mid + half * _GL_X)))


class WageDistribution:
    """Base class. Subclasses define ``support_min``, ``support_max``, ``pdf``, ``cdf`` and ``ppf``."""

    family = "abstract"
    support_min: float
    support_max: float

    def pdf(self, w):
        raise NotImplementedError

    def cdf(self, w):
        raise NotImplementedError

    def ppf(self, q):
        raise NotImplementedError

    def sf(self, w):
        return 1.0 - self.cdf(w)

    def mean(self):
        return self.surplus(self.support_min) + self.support_min

    def surplus(self, r):
        """Expected full-time surplus ``int_r^{w_max} (w - r) dF(w)``."""
        return self.surplus_quadrature(r)

    def surplus_quadrature(self, r):
        r = float(r)
        if r >= self.support_max:
            return 0.0
        if r < self.support_min:
            # below the support the kink is irrelevant: S(r) = S(w_min) + (w_min - r)
            return self.surplus_quadrature(self.support_min) + (self.support_min - r)
        return gauss_legendre(lambda w: (w - r) * self.pdf(w), r, self.support_max)

    def parttime_surplus(self, r, theta):
        """Expected part-time surplus ``int_{r/theta}^{w_max} (theta*w - r) dF(w)``."""
        return theta * self.surplus(r / theta)

    def sample(self, rng, size):
        return self.ppf(rng.random(size))

    def grid(self, n_points):
        """Trapezoid discretization: ``n_points`` equally spaced wages and their probability masses."""
        w = np.linspace(self.support_min, self.support_max, n_points)
        mass = self.pdf(w) * (w[1] - w[0])
        mass[0] *= 0.5
        mass[-1] *= 0.5
        return w, mass / mass.sum()

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class UniformWages(WageDistribution):
    support_min: float = 0.0
    support_max: float = 1.0

    family = "uniform"

    def __post_init__(self):
        if not self.support_min < self.support_max:
            raise DomainError("uniform wages need support_min < support_max")

    @property
    def width(self):
        return self.support_max - self.support_min

    def pdf(self, w):
        w = np.asarray(w, dtype=float)
        inside = (w >= self.support_min) & (w <= self.support_max)
        return np.where(inside, 1.0 / self.width, 0.0)

    def cdf(self, w):
        return np.clip((np.asarray(w, dtype=float) - self.support_min) / self.width, 0.0, 1.0)

    def ppf(self, q):
        return self.support_min + np.asarray(q, dtype=float) * self.width

    def mean(self):
        return 0.5 * (self.support_min + self.support_max)

    def surplus(self, r):
        r = float(r)
        if r >= self.support_max:
            return 0.0
        if r <= self.support_min:
            return self.mean() - r
        return (self.support_max - r) ** 2 / (2.0 * self.width)

    def grid(self, n_points):
        w = np.linspace(self.support_min, self.support_max, n_points)
        mass = np.full(n_points, 1.0 / (n_points - 1))
        mass[0] *= 0.5
        mass[-1] *= 0.5
        return w, mass

    def to_dict(self):
        return {"family": self.family, "support_min": self.support_min, "support_max": self.support_max}


@dataclass(frozen=True)
class TruncatedLognormalWages(WageDistribution):
    """Lognormal(mu, sigma) truncated to [support_min, support_max], support_min > 0."""

    mu: float = -0.5
    sigma: float = 0.5
    support_min: float = 0.05
    support_max: float = 2.0

    family = "truncated-lognormal"

    def __post_init__(self):
        if not 0 < self.support_min < self.support_max:
            raise DomainError("truncated lognormal needs 0 < support_min < support_max")
        if self.sigma <= 0:
            raise DomainError("sigma must be positive")
        lo = special.ndtr((np.log(self.support_min) - self.mu) / self.sigma)
        hi = special.ndtr((np.log(self.support_max) - self.mu) / self.sigma)
        if hi - lo <= 0:
            raise DomainError("truncation window carries no probability mass")
        object.__setattr__(self, "_phi_lo", float(lo))
        object.__setattr__(self, "_mass", float(hi - lo))

    def pdf(self, w):
        w = np.asarray(w, dtype=float)
        inside = (w >= self.support_min) & (w <= self.support_max)
        safe = np.where(inside, w, 1.0)
        z = (np.log(safe) - self.mu) / self.sigma
        dens = np.exp(-0.5 * z * z) / (safe * self.sigma * np.sqrt(2 * np.pi) * self._mass)
        return np.where(inside, dens, 0.0)

    def cdf(self, w):
        w = np.clip(np.asarray(w, dtype=float), self.support_min, self.support_max)
        z = (np.log(w) - self.mu) / self.sigma
        return np.clip((special.ndtr(z) - self._phi_lo) / self._mass, 0.0, 1.0)

    def ppf(self, q):
        p = self._phi_lo + np.asarray(q, dtype=float) * self._mass
        return np.clip(np.exp(self.mu + self.sigma * special.ndtri(p)), self.support_min, self.support_max)

    def partial_expectation(self, r):
        """Closed-form ``int_r^{w_max} w dF(w)`` used to cross-check the quadrature."""
        r = min(max(float(r), self.support_min), self.support_max)
        s2 = self.sigma ** 2
        hi = special.ndtr((np.log(self.support_max) - self.mu - s2) / self.sigma)
        lo = special.ndtr((np.log(r) - self.mu - s2) / self.sigma)
        return float(np.exp(self.mu + 0.5 * s2) * (hi - lo) / self._mass)

    def to_dict(self):
        return {
            "family": self.family,
            "mu": self.mu,
            "sigma": self.sigma,
            "support_min": self.support_min,
            "support_max": self.support_max,
        }


def wage_distribution_from_dict(cfg):
    cfg = dict(cfg)
    family = cfg.pop("family", "uniform")
    if family == "uniform":
        return UniformWages(**cfg)
    if family in ("truncated-lognormal", "lognormal"):
        return TruncatedLognormalWages(**cfg)
    raise DomainError(f"unknown wage family {family!r}")
