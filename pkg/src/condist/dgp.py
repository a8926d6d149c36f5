"""Synthetic data-generating processes with analytic conditional CDFs.

Function handles follow one broadcasting convention: ``y`` has shape ``S``
and ``x`` has shape ``S' + (d,)`` with ``S`` and ``S'`` broadcastable; the
result has the broadcast shape (plus ``(d,)`` / ``(d, d)`` for gradients
and Hessians).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import ndtr

__all__ = [
    "DomainError",
    "SupportSpec",
    "DgpSpec",
    "Truth",
    "get_dgp",
    "draw",
    "truth",
    "seeded_rng",
    "replication_seed",
    "write_sample_csv",
]

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class DomainError(ValueError):
    """Evaluation point lies outside the covariate support box."""


@dataclass(frozen=True)
class SupportSpec:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi):
            raise ValueError("lower and upper bounds differ in length")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError(f"degenerate box {lo} x {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def lambda0(self) -> float:
        return min(b - a for a, b in zip(self.lower, self.upper)) / 2.0

    @property
    def lambda1(self) -> float:
        return 1.0 / np.sqrt(self.d)

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in zip(self.lower, self.upper)]))

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((x >= lo - tol) & (x <= hi + tol), axis=-1)

    def is_interior(self, x, h1: float) -> bool:
        """``x +/- h1`` along every axis stays in the box."""
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return bool(np.all(x - h1 >= lo) and np.all(x + h1 <= hi))


@dataclass(frozen=True)
class DgpSpec:
    id: str
    support: SupportSpec
    F: Callable
    fX: Callable
    dF_dy: Callable
    d2F_dy2: Callable
    grad_x: Callable
    hess_x: Callable
    sample_y: Callable          # (x (n, d), rng) -> y (n,)
    y_range: tuple
    kinks_y: tuple = ()         # points where F is only C^2 in y, fed to quadrature

    @property
    def d(self) -> int:
        return self.support.d

    def joint(self, y, x):
        """Joint density f(y, x)."""
        return self.dF_dy(y, x) * self.fX(x)


class Truth(NamedTuple):
    F: np.ndarray
    gradient_x: np.ndarray
    hessian_x: np.ndarray
    d2F_dy2: np.ndarray


def _phi(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def _uniform_fx(support: SupportSpec):
    dens = 1.0 / support.volume

    def fX(x):
        x = np.asarray(x, dtype=float)
        inside = support.contains(x)
        return np.where(inside, dens, 0.0)

    return fX


def _dgp_a() -> DgpSpec:
    sup = SupportSpec((0.0,), (1.0,))

    def z(y, x):
        return np.asarray(y, dtype=float) - np.asarray(x, dtype=float)[..., 0] ** 2

    def F(y, x):
        return ndtr(z(y, x))

    def dF_dy(y, x):
        return _phi(z(y, x))

    def d2F_dy2(y, x):
        zz = z(y, x)
        return -zz * _phi(zz)

    def grad_x(y, x):
        x0 = np.asarray(x, dtype=float)[..., 0]
        return (-2.0 * x0 * _phi(z(y, x)))[..., None]

    def hess_x(y, x):
        x0 = np.asarray(x, dtype=float)[..., 0]
        zz = z(y, x)
        p = _phi(zz)
        return (-2.0 * p - 4.0 * x0 * x0 * zz * p)[..., None, None]

    def sample_y(x, rng):
        return x[:, 0] ** 2 + rng.standard_normal(x.shape[0])

    return DgpSpec("A", sup, F, _uniform_fx(sup), dF_dy, d2F_dy2, grad_x, hess_x,
                   sample_y, y_range=(-6.0, 7.0))


def _dgp_b() -> DgpSpec:
    sup = SupportSpec((0.0, 0.0), (1.0, 1.0))

    def z(y, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(y, dtype=float) - x[..., 0] - x[..., 1]

    def F(y, x):
        return ndtr(z(y, x))

    def dF_dy(y, x):
        return _phi(z(y, x))

    def d2F_dy2(y, x):
        zz = z(y, x)
        return -zz * _phi(zz)

    def grad_x(y, x):
        g = -_phi(z(y, x))
        return np.stack([g, g], axis=-1)

    def hess_x(y, x):
        zz = z(y, x)
        c = -zz * _phi(zz)
        return np.broadcast_to(c[..., None, None], c.shape + (2, 2)).copy()

    def sample_y(x, rng):
        return x[:, 0] + x[:, 1] + rng.standard_normal(x.shape[0])

    return DgpSpec("B", sup, F, _uniform_fx(sup), dF_dy, d2F_dy2, grad_x, hess_x,
                   sample_y, y_range=(-6.0, 8.0))


# Beta(3, 3) CDF on [0, 1]: the quintic smoothstep, C^2 when extended by 0 and 1.
def _s(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


def _s1(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t * t * (1.0 - t) ** 2, 0.0)


def _s2(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t), 0.0)


def _dgp_c() -> DgpSpec:
    sup = SupportSpec((0.0,), (1.0,))

    def parts(y, x):
        s = 1.0 + np.asarray(x, dtype=float)[..., 0]
        return np.asarray(y, dtype=float) / s, s

    def F(y, x):
        t, _ = parts(y, x)
        return _s(t)

    def dF_dy(y, x):
        t, s = parts(y, x)
        return _s1(t) / s

    def d2F_dy2(y, x):
        t, s = parts(y, x)
        return _s2(t) / (s * s)

    def grad_x(y, x):
        t, s = parts(y, x)
        return (-_s1(t) * t / s)[..., None]

    def hess_x(y, x):
        t, s = parts(y, x)
        return ((_s2(t) * t * t + 2.0 * t * _s1(t)) / (s * s))[..., None, None]

    def sample_y(x, rng):
        return (1.0 + x[:, 0]) * rng.beta(3.0, 3.0, size=x.shape[0])

    return DgpSpec("C", sup, F, _uniform_fx(sup), dF_dy, d2F_dy2, grad_x, hess_x,
                   sample_y, y_range=(0.0, 2.0), kinks_y=(0.0,))


def _dgp_u() -> DgpSpec:
    """Y ~ Uniform[0, 1] independent of X ~ Uniform[0, 1]."""
    sup = SupportSpec((0.0,), (1.0,))

    def F(y, x):
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(y.shape, np.shape(x)[:-1])
        return np.broadcast_to(np.clip(y, 0.0, 1.0), shape).copy()

    def dF_dy(y, x):
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(y.shape, np.shape(x)[:-1])
        return np.broadcast_to(((y >= 0.0) & (y <= 1.0)).astype(float), shape).copy()

    def zeros(y, x):
        shape = np.broadcast_shapes(np.shape(y), np.shape(x)[:-1])
        return np.zeros(shape)

    def grad_x(y, x):
        return zeros(y, x)[..., None]

    def hess_x(y, x):
        return zeros(y, x)[..., None, None]

    def sample_y(x, rng):
        return rng.random(x.shape[0])

    return DgpSpec("U", sup, F, _uniform_fx(sup), dF_dy, zeros, grad_x, hess_x,
                   sample_y, y_range=(0.0, 1.0), kinks_y=(0.0, 1.0))


_CATALOG = {"A": _dgp_a, "B": _dgp_b, "C": _dgp_c, "U": _dgp_u}


def get_dgp(dgp_id: str) -> DgpSpec:
    try:
        return _CATALOG[dgp_id.upper()]()
    except KeyError:
        raise ValueError(f"unknown DGP {dgp_id!r}; choose one of {sorted(_CATALOG)}") from None


def replication_seed(base_seed: int, index: int) -> int:
    """Per-replication seed, independent of execution order."""
    return (int(base_seed) ^ ((int(index) * GOLDEN_GAMMA) & _MASK64)) & _MASK64


def seeded_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & _MASK64))


def draw(dgp: DgpSpec, n: int, seed: int):
    """Draw ``n`` i.i.d. observations; identical output for identical arguments."""
    from .llr import Sample

    if n < 1:
        raise ValueError("n must be at least 1")
    rng = seeded_rng(seed)
    lo = np.asarray(dgp.support.lower)
    hi = np.asarray(dgp.support.upper)
    x = lo + (hi - lo) * rng.random((n, dgp.d))
    y = dgp.sample_y(x, rng)
    return Sample(y=y, x=x, support=dgp.support)


def truth(dgp: DgpSpec, y, x) -> Truth:
    """Analytic F, its x-gradient and x-Hessian, and its second y-derivative."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dgp.d:
        raise DomainError(f"x has {x.shape[-1]} coordinates, DGP {dgp.id} needs {dgp.d}")
    if not np.all(dgp.support.contains(x)):
        raise DomainError(f"x={x.tolist()} outside support box "
                          f"{dgp.support.lower} x {dgp.support.upper}")
    return Truth(dgp.F(y, x), dgp.grad_x(y, x), dgp.hess_x(y, x), dgp.d2F_dy2(y, x))


def write_sample_csv(sample, path) -> None:
    d = sample.x.shape[1]
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["y"] + [f"x{j + 1}" for j in range(d)])
        for yi, xi in zip(sample.y, sample.x):
            writer.writerow([repr(float(yi))] + [repr(float(v)) for v in xi])
