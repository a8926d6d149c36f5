"""Local linear estimation of a conditional distribution function.

At an evaluation point ``x`` the estimator regresses the smoothed responses
``K((y - Y_i)/h2)`` (or the indicators ``1{Y_i <= y}``) on ``(1, X_i - x)``
with kernel weights ``w((X_i - x)/h1)``.  The intercept estimates F(y|x) and
the slopes estimate its x-gradient.

All work is batched: one :class:`LocalDesign` holds the weighted regressors
for many evaluation points, and responses for a whole y-grid enter through a
single matrix product.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dgp import SupportSpec
from .kernels import KernelSpec, eval_K, eval_w

__all__ = [
    "SingularDesign",
    "Sample",
    "Bandwidths",
    "LocalFit",
    "Surface",
    "LocalDesign",
    "response_matrix",
    "solve_local",
    "design_matrix",
    "local_response",
    "fit_smoothed",
    "fit_unsmoothed",
    "score",
    "surface",
    "weighted_mean_response",
]

MIN_EIG = 1e-12
# Cap on entries of one response block (observations x y-values).
_BLOCK = 1 << 22


class SingularDesign(ArithmeticError):
    """The local window is empty or its design matrix is numerically singular."""


@dataclass(frozen=True, eq=False)
class Sample:
    y: np.ndarray
    x: np.ndarray
    support: SupportSpec

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        x = np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape != (y.size, self.support.d):
            raise ValueError(f"x has shape {x.shape}, expected ({y.size}, {self.support.d})")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValueError("sample contains non-finite values")
        if not np.all(self.support.contains(x)):
            raise ValueError("sample has covariates outside the support box")
        y.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class Bandwidths:
    h1: float
    h2: float

    def __post_init__(self):
        for name in ("h1", "h2"):
            v = float(getattr(self, name))
            if not (np.isfinite(v) and v > 0.0):
                raise ValueError(f"bandwidth {name} must be positive and finite, got {v}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class LocalFit:
    beta0: float
    grad: np.ndarray
    min_eig: float
    n_local: int


class LocalDesign:
    """Kernel-weighted local regressors at a batch of evaluation points.

    ``rw[j, a, i]`` is ``r_a(u_ij) w(u_ij) / (n h1^d)`` with
    ``u_ij = (X_i - x_j)/h1``; ``xi[j]`` is the design matrix at ``x_j``.
    """

    def __init__(self, sample: Sample, x_points, h1: float, spec: KernelSpec):
        xp = np.atleast_2d(np.asarray(x_points, dtype=float))
        if xp.shape[1] != sample.d or spec.d != sample.d:
            raise ValueError("dimension mismatch between sample, points and kernel")
        n, d = sample.n, sample.d
        self.h1 = float(h1)
        self.x_points = xp
        u = (sample.x[None, :, :] - xp[:, None, :]) / self.h1
        w = eval_w(spec, u)
        scale = 1.0 / (n * self.h1 ** d)
        reg = np.empty((xp.shape[0], d + 1, n))
        reg[:, 0, :] = 1.0
        reg[:, 1:, :] = np.transpose(u, (0, 2, 1))
        self.rw = reg * (w * scale)[:, None, :]
        xi = np.matmul(self.rw, np.transpose(reg, (0, 2, 1)))
        upper = np.triu_indices(d + 1, 1)
        xi[:, upper[1], upper[0]] = xi[:, upper[0], upper[1]]
        self.xi = xi
        self.n_local = np.count_nonzero(w > 0.0, axis=1)

    @property
    def m(self) -> int:
        return self.x_points.shape[0]

    def weighted_sum(self, z: np.ndarray) -> np.ndarray:
        """``sum_i r(u_ij) w(u_ij) z[i, k] / (n h1^d)``, shape ``(m, d+1, k)``."""
        m, p, n = self.rw.shape
        out = self.rw.reshape(m * p, n) @ z
        return out.reshape(m, p, z.shape[1])


def response_matrix(y_obs: np.ndarray, y_grid, h2: float | None,
                    spec: KernelSpec) -> np.ndarray:
    """Responses per observation and y-value, shape ``(n, m_y)``.

    ``h2=None`` gives the unsmoothed indicators ``1{Y_i <= y}``.
    """
    yg = np.atleast_1d(np.asarray(y_grid, dtype=float))
    if h2 is None:
        return (y_obs[:, None] <= yg[None, :]).astype(float)
    return eval_K(spec, (yg[None, :] - y_obs[:, None]) / h2)


def _local_responses(design: LocalDesign, y_obs, y_grid, h2, spec) -> np.ndarray:
    yg = np.atleast_1d(np.asarray(y_grid, dtype=float))
    step = max(1, _BLOCK // max(y_obs.size, 1))
    blocks = [design.weighted_sum(response_matrix(y_obs, yg[s:s + step], h2, spec))
              for s in range(0, yg.size, step)]
    return np.concatenate(blocks, axis=2)


def solve_local(xi: np.ndarray, rhs: np.ndarray, n_local: np.ndarray, *,
                ridge: float = 0.0):
    """Solve ``xi[j] c = rhs[j]`` by Cholesky for every evaluation point.

    Returns ``(coef, min_eig, failed)``; failed columns hold NaN.
    """
    m, p, _ = xi.shape
    coef = np.full(rhs.shape, np.nan)
    min_eig = np.empty(m)
    failed = np.zeros(m, dtype=bool)
    eye = np.eye(p)
    for j in range(m):
        a = xi[j] + ridge * eye if ridge else xi[j]
        min_eig[j] = np.linalg.eigvalsh(a)[0]
        if min_eig[j] < MIN_EIG or n_local[j] < p:
            failed[j] = True
            continue
        coef[j] = cho_solve(cho_factor(a, lower=True), rhs[j])
    return coef, min_eig, failed


def design_matrix(sample: Sample, x, h1: float, spec: KernelSpec) -> np.ndarray:
    """Empirical design matrix ``(1/(n h1^d)) sum r r' w`` at one point."""
    return LocalDesign(sample, np.atleast_1d(x)[None, :], h1, spec).xi[0]


def local_response(sample: Sample, y: float, x, bw: Bandwidths,
                   spec: KernelSpec) -> np.ndarray:
    """Empirical ``(1/(n h1^d)) sum r K((y - Y_i)/h2) w`` at one point."""
    design = LocalDesign(sample, np.atleast_1d(x)[None, :], bw.h1, spec)
    return _local_responses(design, sample.y, [y], bw.h2, spec)[0, :, 0]


def _single_fit(sample, y, x, h1, h2, spec, clamp, ridge) -> LocalFit:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not sample.support.contains(x):
        raise ValueError(f"evaluation point {x.tolist()} outside the support box")
    design = LocalDesign(sample, x[None, :], h1, spec)
    rhs = _local_responses(design, sample.y, [y], h2, spec)
    coef, min_eig, failed = solve_local(design.xi, rhs, design.n_local, ridge=ridge)
    if failed[0]:
        raise SingularDesign(
            f"singular local design at x={x.tolist()}: min_eig={min_eig[0]:.3e}, "
            f"n_local={int(design.n_local[0])}")
    beta0 = float(coef[0, 0, 0])
    if clamp:
        beta0 = min(max(beta0, 0.0), 1.0)
    return LocalFit(beta0, coef[0, 1:, 0] / h1, float(min_eig[0]), int(design.n_local[0]))


def fit_smoothed(sample: Sample, y: float, x, bw: Bandwidths, spec: KernelSpec, *,
                 clamp: bool = False, ridge: float = 0.0) -> LocalFit:
    """Smoothed local linear estimate of F(y|x) and its gradient."""
    return _single_fit(sample, y, x, bw.h1, bw.h2, spec, clamp, ridge)


def fit_unsmoothed(sample: Sample, y: float, x, h1: float, spec: KernelSpec, *,
                   clamp: bool = False, ridge: float = 0.0) -> LocalFit:
    """Local linear estimate with indicator responses ``1{Y_i <= y}``."""
    return _single_fit(sample, y, x, float(h1), None, spec, clamp, ridge)


def score(Yi, Xi, y: float, x, bw: Bandwidths, spec: KernelSpec,
          ftilde: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """Influence summand ``r(u) (K((y - Yi)/h2) - Ftilde(y|Xi)) w(u)``.

    ``ftilde(y_values, points)`` returns the smoothed conditional CDF with
    shape ``(len(y_values), len(points))``.  Scalar ``Yi`` gives a
    ``(d+1,)`` vector, arrays give ``(n, d+1)``.
    """
    scalar = np.ndim(Yi) == 0
    yi = np.atleast_1d(np.asarray(Yi, dtype=float))
    xi = np.asarray(Xi, dtype=float).reshape(yi.size, -1)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = (xi - x) / bw.h1
    w = eval_w(spec, u)
    out = np.zeros((yi.size, u.shape[1] + 1))
    live = w > 0.0
    if np.any(live):
        ft = np.asarray(ftilde(np.array([float(y)]), xi[live]))[0]
        mid = eval_K(spec, (y - yi[live]) / bw.h2) - ft
        out[live, 0] = mid * w[live]
        out[live, 1:] = u[live] * (mid * w[live])[:, None]
    return out[0] if scalar else out


def weighted_mean_response(sample: Sample, y, x, bw: Bandwidths,
                           spec: KernelSpec) -> np.ndarray:
    """Intercept-only (local constant) fit of the smoothed responses."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = eval_w(spec, (sample.x - x) / bw.h1)
    z = response_matrix(sample.y, y, bw.h2, spec)
    return (w @ z) / w.sum()


@dataclass
class Surface:
    y_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray                 # (m_y, m_x), NaN in failed columns
    grad: np.ndarray                   # (m_y, m_x, d)
    min_eig: np.ndarray                # (m_x,)
    n_local: np.ndarray                # (m_x,)
    failures: list = field(default_factory=list)

    @property
    def failed(self) -> np.ndarray:
        mask = np.zeros(self.x_grid.shape[0], dtype=bool)
        for j, _ in self.failures:
            mask[j] = True
        return mask

    def monotonicity_violations(self, tol: float = 1e-12) -> np.ndarray:
        """Per column, how many y-steps decrease the fitted value."""
        return np.sum(np.diff(self.values, axis=0) < -tol, axis=0)

    def to_csv(self, path) -> None:
        d = self.x_grid.shape[1]
        header = (["y"] + [f"x{j + 1}" for j in range(d)] + ["Fhat"]
                  + [f"grad{j + 1}" for j in range(d)] + ["min_eig", "n_local"])
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(header)
            for a, yv in enumerate(self.y_grid):
                for j, xv in enumerate(self.x_grid):
                    out.writerow([repr(float(yv))] + [repr(float(v)) for v in xv]
                                 + [repr(float(self.values[a, j]))]
                                 + [repr(float(g)) for g in self.grad[a, j]]
                                 + [repr(float(self.min_eig[j])), int(self.n_local[j])])


def surface(sample: Sample, y_grid, x_grid, bw: Bandwidths | None, spec: KernelSpec, *,
            estimator: str = "smoothed", h1: float | None = None,
            ridge: float = 0.0, clamp: bool = False, chunk: int = 64) -> Surface:
    """Evaluate the fit on every (y, x) grid pair.

    Singular columns are recorded in ``failures`` and left as NaN.
    """
    if estimator not in ("smoothed", "unsmoothed"):
        raise ValueError(f"unknown estimator {estimator!r}")
    yg = np.atleast_1d(np.asarray(y_grid, dtype=float))
    xg = np.asarray(x_grid, dtype=float)
    if xg.ndim == 1:
        xg = xg[:, None] if sample.d == 1 else xg[None, :]
    if yg.size == 0 or xg.shape[0] == 0:
        raise ValueError("empty evaluation grid")
    h1 = bw.h1 if h1 is None else float(h1)
    h2 = bw.h2 if estimator == "smoothed" else None
    m_x, d = xg.shape
    values = np.empty((yg.size, m_x))
    grad = np.empty((yg.size, m_x, d))
    min_eig = np.empty(m_x)
    n_local = np.empty(m_x, dtype=int)
    failures = []
    for s in range(0, m_x, chunk):
        design = LocalDesign(sample, xg[s:s + chunk], h1, spec)
        rhs = _local_responses(design, sample.y, yg, h2, spec)
        coef, eig, failed = solve_local(design.xi, rhs, design.n_local, ridge=ridge)
        values[:, s:s + chunk] = coef[:, 0, :].T
        grad[:, s:s + chunk, :] = np.transpose(coef[:, 1:, :], (2, 0, 1)) / h1
        min_eig[s:s + chunk] = eig
        n_local[s:s + chunk] = design.n_local
        for j in np.flatnonzero(failed):
            failures.append((s + int(j), f"singular design: min_eig={eig[j]:.3e}, "
                                         f"n_local={int(design.n_local[j])}"))
    if clamp:
        values = np.clip(values, 0.0, 1.0)
    return Surface(yg, xg, values, grad, min_eig, n_local, failures)
