"""Compact-support univariate kernels and the product covariate kernel.

Every family lives on [-1, 1].  Densities, their antiderivatives and second
moments are closed-form polynomials, so evaluation never allocates beyond
the output array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "FAMILIES",
    "UnivariateKernel",
    "KernelSpec",
    "eval_w",
    "eval_K",
    "moment2",
    "make_spec",
]

FAMILIES = ("epanechnikov", "biweight", "triangular", "uniform")

_MOMENT2 = {
    "epanechnikov": 1.0 / 5.0,
    "biweight": 1.0 / 7.0,
    "triangular": 1.0 / 6.0,
    "uniform": 1.0 / 3.0,
}


@dataclass(frozen=True)
class UnivariateKernel:
    """A symmetric probability density supported on [-1, 1]."""

    family: str = "epanechnikov"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; choose one of {FAMILIES}")

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        inside = a <= 1.0
        fam = self.family
        if fam == "epanechnikov":
            val = 0.75 * (1.0 - u * u)
        elif fam == "biweight":
            t = 1.0 - u * u
            val = (15.0 / 16.0) * t * t
        elif fam == "triangular":
            val = 1.0 - a
        else:
            val = np.full_like(u, 0.5)
        return np.where(inside, val, 0.0)

    __call__ = pdf

    def cdf(self, v):
        """``K(v)``: integral of the density from -inf to ``v``."""
        raw = np.asarray(v, dtype=float)
        v = np.clip(raw, -1.0, 1.0)
        fam = self.family
        if fam == "epanechnikov":
            val = 0.5 + 0.75 * (v - v * v * v / 3.0)
        elif fam == "biweight":
            v2 = v * v
            val = 0.5 + (15.0 / 16.0) * v * (1.0 - v2 * (2.0 / 3.0) + v2 * v2 / 5.0)
        elif fam == "triangular":
            val = np.where(v < 0.0, 0.5 * (1.0 + v) ** 2, 1.0 - 0.5 * (1.0 - v) ** 2)
        else:
            val = 0.5 * (v + 1.0)
        # exact 0 and 1 off the support; the polynomials leave round-off there
        return np.where(raw <= -1.0, 0.0, np.where(raw >= 1.0, 1.0, val))

    @property
    def kappa2(self) -> float:
        return _MOMENT2[self.family]

    @property
    def sup(self) -> float:
        """Maximum of the density (attained at 0)."""
        return float(self.pdf(0.0))


def moment2(kern: UnivariateKernel) -> float:
    """Exact second moment of ``kern``."""
    return kern.kappa2


@dataclass(frozen=True)
class KernelSpec:
    """Product covariate kernel ``w`` plus the response-smoothing kernel ``k``."""

    w_axes: tuple
    k: UnivariateKernel = field(default_factory=UnivariateKernel)

    def __post_init__(self):
        axes = tuple(a if isinstance(a, UnivariateKernel) else UnivariateKernel(a)
                     for a in self.w_axes)
        if not axes:
            raise ValueError("w needs at least one axis")
        object.__setattr__(self, "w_axes", axes)
        if not isinstance(self.k, UnivariateKernel):
            object.__setattr__(self, "k", UnivariateKernel(self.k))

    @property
    def d(self) -> int:
        return len(self.w_axes)

    @property
    def kappa2_w(self) -> tuple:
        return tuple(a.kappa2 for a in self.w_axes)

    @property
    def kappa2_k(self) -> float:
        return self.k.kappa2

    def describe(self) -> dict:
        return {"w": [a.family for a in self.w_axes], "k": self.k.family}


def make_spec(w: str | Sequence[str] = "epanechnikov", k: str = "epanechnikov",
              d: int = 1) -> KernelSpec:
    """Build a spec, broadcasting a single ``w`` family to ``d`` axes."""
    if isinstance(w, str):
        w = [w] * d
    elif len(w) != d:
        raise ValueError(f"w lists {len(w)} families for d={d}")
    return KernelSpec(tuple(w), UnivariateKernel(k))


def eval_w(spec: KernelSpec, u) -> np.ndarray:
    """Product kernel at points ``u`` of shape ``(..., d)``."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 0 or u.shape[-1] != spec.d:
        raise ValueError(f"expected trailing axis of length {spec.d}, got {u.shape}")
    out = spec.w_axes[0].pdf(u[..., 0])
    for ell in range(1, spec.d):
        out = out * spec.w_axes[ell].pdf(u[..., ell])
    return out


def eval_K(spec: KernelSpec, v) -> np.ndarray:
    """Integrated smoothing kernel, 0 below -1 and 1 above +1."""
    return spec.k.cdf(v)
