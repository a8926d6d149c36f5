"""Population counterparts of the local linear estimator, by quadrature.

Covariate integrals run over ``u`` in ``[-1, 1]^d`` restricted to
``{u : x + h1 u in box}``, which is itself an axis-aligned box, so the
integration regions are exact.  Smoothing-kernel second moments are carried
explicitly wherever they enter a bias term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dgp import DgpSpec, SupportSpec, truth
from .kernels import KernelSpec, eval_w
from .llr import Bandwidths
from .quadrature import gk15, integrate_box

__all__ = [
    "OmegaReport",
    "PseudoTrue",
    "BiasPrediction",
    "local_box",
    "omega",
    "xi_pop",
    "ftilde_points",
    "ftilde_provider",
    "smoothed_cdf_Ftilde",
    "pseudo_true",
    "bias_prediction",
    "clt_inner",
    "clt_variance",
    "theta",
    "eigenvalue_band",
]

ATOL_U = 1e-12
ATOL_V = 1e-13
# Evaluation budget per F-tilde block: y-values x points x nodes.
_FT_BLOCK = 1 << 21


@dataclass(frozen=True)
class OmegaReport:
    omega: np.ndarray
    eig_min: float
    eig_max: float


@dataclass(frozen=True)
class PseudoTrue:
    """Population minimiser; ``beta_bar[..., 1:]`` are gradient-scale slopes."""

    beta_bar: np.ndarray
    xi: np.ndarray
    upsilon: np.ndarray
    h1: float

    @property
    def beta0(self):
        return self.beta_bar[..., 0]

    @property
    def scaled(self) -> np.ndarray:
        """``H1 beta_bar``: slopes multiplied by h1."""
        out = np.array(self.beta_bar, dtype=float)
        out[..., 1:] *= self.h1
        return out


@dataclass(frozen=True)
class BiasPrediction:
    leading_x: np.ndarray
    leading_y: np.ndarray
    total: np.ndarray
    interior: bool
    form: str


def local_box(x, h1: float, support: SupportSpec):
    """Bounds of ``[-1, 1]^d`` intersected with ``(box - x)/h1``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo = np.maximum(-1.0, (np.asarray(support.lower) - x) / h1)
    hi = np.minimum(1.0, (np.asarray(support.upper) - x) / h1)
    return lo, hi


def _regressors(u: np.ndarray) -> np.ndarray:
    """``r(u) = (1, u)`` stacked along the first axis: ``(d+1, m)``."""
    return np.concatenate([np.ones((1, u.shape[0])), u.T], axis=0)


def _check_inside(x, support: SupportSpec):
    if not support.contains(x):
        raise ValueError(f"x={np.atleast_1d(x).tolist()} outside the support box")


def _eig_report(mat: np.ndarray) -> OmegaReport:
    eig = np.linalg.eigvalsh(mat)
    return OmegaReport(mat, float(eig[0]), float(eig[-1]))


def omega(x, h1: float, support: SupportSpec, spec: KernelSpec, *,
          atol: float = ATOL_U) -> OmegaReport:
    """Boundary-truncated kernel moment matrix ``int r r' w 1{x + h1 u in box} du``."""
    _check_inside(x, support)
    lo, hi = local_box(x, h1, support)

    def integrand(u):
        r = _regressors(u)
        return r[:, None, :] * r[None, :, :] * eval_w(spec, u)

    mat = integrate_box(integrand, lo, hi, atol=atol)
    return _eig_report(0.5 * (mat + mat.T))


def xi_pop(x, h1: float, dgp: DgpSpec, spec: KernelSpec, *,
           atol: float = ATOL_U) -> np.ndarray:
    """Population design matrix ``int r r' w(u) f_X(x + h1 u) du``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_inside(x, dgp.support)
    lo, hi = local_box(x, h1, dgp.support)

    def integrand(u):
        r = _regressors(u)
        return r[:, None, :] * r[None, :, :] * (eval_w(spec, u) * dgp.fX(x + h1 * u))

    mat = integrate_box(integrand, lo, hi, atol=atol)
    return 0.5 * (mat + mat.T)


def ftilde_points(y, points, h2: float, dgp: DgpSpec, spec: KernelSpec, *,
                  atol: float = ATOL_V) -> np.ndarray:
    """``E[K((y - Y)/h2) | X = p]`` for every y-value and point: ``(m_y, m)``.

    Uses ``int k(v) F(y - h2 v | p) dv`` over ``[-1, 1]``.
    """
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    pts = np.asarray(points, dtype=float).reshape(-1, dgp.d)
    kern = spec.k

    def block(pb):
        def integrand(v):
            yy = yv[:, None, None] - h2 * v[None, None, :]
            return dgp.F(yy, pb[None, :, None, :]) * kern.pdf(v)

        return gk15(integrand, -1.0, 1.0, atol=atol, breakpoints=(0.0,))

    step = max(1, _FT_BLOCK // (30 * max(yv.size, 1)))
    if pts.shape[0] <= step:
        return block(pts)
    return np.concatenate([block(pts[s:s + step]) for s in range(0, pts.shape[0], step)],
                          axis=1)


def ftilde_provider(dgp: DgpSpec, spec: KernelSpec, h2: float, *, atol: float = ATOL_V):
    """Callable ``(y_values, points) -> (m_y, m)`` backed by :func:`ftilde_points`."""
    def provider(y_values, points):
        return ftilde_points(y_values, points, h2, dgp, spec, atol=atol)

    return provider


def smoothed_cdf_Ftilde(y, x, h2: float, dgp: DgpSpec, spec: KernelSpec, *,
                        atol: float = ATOL_V):
    """Smoothed conditional CDF at one covariate point; scalar or ``(m_y,)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_inside(x, dgp.support)
    out = ftilde_points(y, x[None, :], h2, dgp, spec, atol=atol)[:, 0]
    return float(out[0]) if np.ndim(y) == 0 else out


def pseudo_true(y, x, bw: Bandwidths, dgp: DgpSpec, spec: KernelSpec, *,
                smoothed: bool = True, atol: float = ATOL_U) -> PseudoTrue:
    """Population local linear coefficients at ``(y, x)``.

    Solves ``Xi (H1 beta) = upsilon`` with
    ``upsilon = int r(u) w(u) Ftilde(y | x + h1 u) f_X(x + h1 u) du``; with
    ``smoothed=False`` the inner smoothing is dropped (``Ftilde -> F``).
    ``y`` may be a vector, giving ``beta_bar`` of shape ``(m_y, d+1)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_inside(x, dgp.support)
    h1, h2 = bw.h1, bw.h2
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    lo, hi = local_box(x, h1, dgp.support)
    xi = xi_pop(x, h1, dgp, spec, atol=atol)

    def integrand(u):
        pts = x + h1 * u
        if smoothed:
            inner = ftilde_points(yv, pts, h2, dgp, spec, atol=atol * 1e-2)
        else:
            inner = dgp.F(yv[:, None], pts[None, :, :])
        weight = eval_w(spec, u) * dgp.fX(pts)
        return _regressors(u)[:, None, :] * (inner * weight)[None, :, :]

    ups = integrate_box(integrand, lo, hi, atol=atol)
    coef = cho_solve(cho_factor(xi, lower=True), ups)
    beta = coef.T.copy()
    beta[:, 1:] /= h1
    if np.ndim(y) == 0:
        return PseudoTrue(beta[0], xi, ups[:, 0], h1)
    return PseudoTrue(beta, xi, ups.T, h1)


def bias_prediction(y, x, bw: Bandwidths, dgp: DgpSpec, spec: KernelSpec,
                    support: SupportSpec | None = None, *, form: str = "auto",
                    atol: float = ATOL_U) -> BiasPrediction:
    """Leading-order bias of the intercept, ``beta_bar_0 - F``.

    ``form="auto"`` uses the diagonal interior expression when ``x +/- h1``
    stays inside the box and the boundary-corrected expression (inverse of
    the truncated moment matrix applied to truncated third/fourth moments)
    otherwise; ``"interior"`` and ``"general"`` force one of them.
    """
    if form not in ("auto", "interior", "general"):
        raise ValueError(f"unknown form {form!r}")
    support = dgp.support if support is None else support
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h1, h2 = bw.h1, bw.h2
    tr = truth(dgp, y, x)
    hess = np.asarray(tr.hessian_x)
    fyy = np.asarray(tr.d2F_dy2)
    interior = support.is_interior(x, h1)
    use_interior = form == "interior" or (form == "auto" and interior)
    kx = np.asarray(spec.kappa2_w)

    if use_interior:
        diag = np.diagonal(hess, axis1=-2, axis2=-1)
        lead_x = 0.5 * h1 * h1 * np.sum(kx * diag, axis=-1)
        lead_y = 0.5 * h2 * h2 * spec.kappa2_k * fyy
        return BiasPrediction(lead_x, lead_y, lead_x + lead_y, interior, "interior")

    d = x.size
    lo, hi = local_box(x, h1, support)

    def moments(u):
        r = _regressors(u)
        uu = u.T[:, None, :] * u.T[None, :, :]
        return r[:, None, None, :] * uu[None, :, :, :] * eval_w(spec, u)

    mom = integrate_box(moments, lo, hi, atol=atol)           # (d+1, d, d)
    om = omega(x, h1, support, spec, atol=atol).omega
    cf = cho_factor(om, lower=True)
    e0_x = cho_solve(cf, mom.reshape(d + 1, d * d))[0].reshape(d, d)
    e0_y = cho_solve(cf, om[:, 0])[0]
    lead_x = 0.5 * h1 * h1 * np.einsum("...ab,ab->...", hess, e0_x)
    lead_y = 0.5 * h2 * h2 * spec.kappa2_k * fyy * e0_y
    return BiasPrediction(lead_x, lead_y, lead_x + lead_y, interior, "general")


def _y_bounds(dgp: DgpSpec, y_range):
    lo, hi = dgp.y_range if y_range is None else y_range
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValueError(f"y-range must be a finite interval, got {(lo, hi)}")
    return float(lo), float(hi)


def _y_breaks(dgp: DgpSpec, lo: float, hi: float):
    return tuple(p for p in dgp.kinks_y if lo < p < hi)


def clt_inner(s, t, dgp: DgpSpec, y_range=None, *, atol: float = 1e-12) -> np.ndarray:
    """``int (1{s <= y} - F(y|t)) dy`` over the y-range, for scalar ``t``."""
    lo, hi = _y_bounds(dgp, y_range)
    tt = np.atleast_1d(np.asarray(t, dtype=float)).reshape(1, -1)
    mass = gk15(lambda yv: dgp.F(yv, tt[:, None, :])[0], lo, hi, atol=atol,
                breakpoints=_y_breaks(dgp, lo, hi))
    s = np.asarray(s, dtype=float)
    return (hi - np.clip(s, lo, hi)) - float(mass)


def clt_variance(dgp: DgpSpec, y_range=None, *, atol: float = 1e-10) -> float:
    """Limit variance of the integrated-CDF estimator (scalar covariate only)."""
    if dgp.d != 1:
        raise ValueError(f"the integrated-CDF variance is defined for d = 1, DGP {dgp.id} has d = {dgp.d}")
    lo, hi = _y_bounds(dgp, y_range)
    a, b = dgp.support.lower[0], dgp.support.upper[0]
    breaks = _y_breaks(dgp, lo, hi)

    def outer(t):
        tp = t[:, None, None]
        mass = gk15(lambda yv: dgp.F(yv[None, :], tp), lo, hi, atol=atol * 1e-2,
                    breakpoints=breaks)

        def inner(s):
            dev = (hi - s)[None, :] - mass[:, None]
            return dev * dev * dgp.joint(s[None, :], tp)

        return gk15(inner, lo, hi, atol=atol * 1e-1, breakpoints=breaks)

    return float(gk15(outer, a, b, atol=atol))


def theta(dgp: DgpSpec, y_range=None, *, atol: float = 1e-10) -> float:
    """``int int F(y|x) dx dy`` over the covariate box and y-range."""
    lo, hi = _y_bounds(dgp, y_range)
    lower = list(dgp.support.lower) + [lo]
    upper = list(dgp.support.upper) + [hi]
    brk = (0.0,) + _y_breaks(dgp, lo, hi)

    def integrand(p):
        return dgp.F(p[:, -1], p[:, :-1])

    return float(integrate_box(integrand, lower, upper, atol=atol, breakpoints=brk))


def eigenvalue_band(dgp: DgpSpec, spec: KernelSpec, h_values=(0.05, 0.1, 0.3), *,
                    m: int = 101) -> dict:
    """Extreme eigenvalues of the truncated moment and population design
    matrices over an ``m``-point grid per axis (endpoints included)."""
    if dgp.d != 1:
        axes = [np.linspace(a, b, m) for a, b in zip(dgp.support.lower, dgp.support.upper)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dgp.d)
    else:
        grid = np.linspace(dgp.support.lower[0], dgp.support.upper[0], m)[:, None]
    lo_eig, hi_eig = np.inf, -np.inf
    for h in h_values:
        for x in grid:
            for mat in (omega(x, h, dgp.support, spec).omega, xi_pop(x, h, dgp, spec)):
                e = np.linalg.eigvalsh(mat)
                lo_eig = min(lo_eig, float(e[0]))
                hi_eig = max(hi_eig, float(e[-1]))
    return {"eig_min": lo_eig, "eig_max": hi_eig,
            "C": max(hi_eig, 1.0 / lo_eig) if lo_eig > 0 else np.inf}
