import json

import numpy as np
import pytest
from scipy import integrate
from scipy.special import ndtr

from condist import fixtures, oracle
from condist.dgp import draw, get_dgp
from condist.kernels import UnivariateKernel, make_spec
from condist.llr import Bandwidths, Sample, surface

EPA = UnivariateKernel("epanechnikov")


def _q(f, a, b, **kw):
    return integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-13, limit=200, **kw)[0]


def scipy_ftilde(dgp, y, x, h2):
    return _q(lambda v: float(EPA.pdf(v)) * float(dgp.F(y - h2 * v, np.array([x]))), -1, 1,
              points=[0.0])


def scipy_beta_bar_1d(dgp, y, x, h1, h2):
    """Population WLS by nested scipy quadrature over u in the truncated window."""
    lo, hi = max(-1.0, (0.0 - x) / h1), min(1.0, (1.0 - x) / h1)
    ft = lambda u: scipy_ftilde(dgp, y, x + h1 * u, h2)
    m = [[_q(lambda u: float(EPA.pdf(u)) * u ** (a + b), lo, hi) for b in range(2)] for a in range(2)]
    v = [_q(lambda u: float(EPA.pdf(u)) * u ** a * ft(u), lo, hi) for a in range(2)]
    return np.linalg.solve(np.array(m), np.array(v))


def test_omega_interior_and_boundary(epa):
    sup = get_dgp("A").support
    np.testing.assert_allclose(oracle.omega([0.5], 0.2, sup, epa).omega, np.diag([1.0, 0.2]), atol=1e-13)
    rep = oracle.omega([0.0], 0.5, sup, epa)
    want = [[_q(lambda u: float(EPA.pdf(u)) * u ** (a + b), 0.0, 1.0) for b in range(2)] for a in range(2)]
    np.testing.assert_allclose(rep.omega, want, atol=1e-13)
    assert rep.eig_min == pytest.approx(np.linalg.eigvalsh(want)[0], abs=1e-13)


def test_ftilde_against_scipy(dgp_a, epa):
    for y, x, h2 in [(0.3, 0.2, 0.1), (-1.0, 0.9, 0.3), (2.5, 0.0, 0.05)]:
        got = oracle.smoothed_cdf_Ftilde(y, [x], h2, dgp_a, epa)
        assert got == pytest.approx(scipy_ftilde(dgp_a, y, x, h2), abs=1e-12)
    dgp_c = get_dgp("C")
    for y in (0.0, 0.02, 0.5, 1.1):
        got = oracle.smoothed_cdf_Ftilde(y, [0.1], 0.1, dgp_c, epa)
        assert got == pytest.approx(scipy_ftilde(dgp_c, y, 0.1, 0.1), abs=1e-11)


@pytest.mark.parametrize("y,x,h1,h2", [(0.25, 0.5, 0.1, 0.1), (-1.0, 0.0, 0.2, 0.2),
                                       (0.5, 0.05, 0.1, 0.05), (2.0, 1.0, 0.15, 0.1)])
def test_pseudo_true_against_scipy(dgp_a, epa, y, x, h1, h2):
    pt = oracle.pseudo_true(y, [x], Bandwidths(h1, h2), dgp_a, epa)
    want = scipy_beta_bar_1d(dgp_a, y, x, h1, h2)
    np.testing.assert_allclose(pt.scaled, want, atol=1e-10)


def test_pseudo_true_vector_y_and_unsmoothed(dgp_a, epa):
    bw = Bandwidths(0.1, 0.1)
    ys = np.array([-0.5, 0.25, 1.0])
    vec = oracle.pseudo_true(ys, [0.5], bw, dgp_a, epa).beta_bar
    for k, y in enumerate(ys):
        np.testing.assert_allclose(vec[k], oracle.pseudo_true(y, [0.5], bw, dgp_a, epa).beta_bar, atol=1e-13)
    # unsmoothed target at interior x: F plus the x-curvature term only
    un = oracle.pseudo_true(0.25, [0.5], bw, dgp_a, epa, smoothed=False).beta0
    pred = oracle.bias_prediction(0.25, [0.5], Bandwidths(0.1, 1e-12), dgp_a, epa).total
    assert un - dgp_a.F(0.25, np.array([0.5])) == pytest.approx(pred, abs=2e-6)


def test_pseudo_true_is_large_sample_limit(dgp_a, epa):
    bw = Bandwidths(0.15, 0.15)
    s = draw(dgp_a, 400_000, 17)
    ys = np.array([-0.5, 0.5, 1.5])
    fit = surface(s, ys, [[0.3]], bw, epa).values[:, 0]
    target = oracle.pseudo_true(ys, [0.3], bw, dgp_a, epa).beta0
    # sd of the fit is about sqrt(0.6 F(1-F)/(n h)) < 1.5e-3
    np.testing.assert_allclose(fit, target, atol=5e-3)


def test_bias_terms(dgp_a, epa):
    x = np.array([0.5])
    res = []
    for h in (0.2, 0.1, 0.05):
        bw = Bandwidths(h, h)
        ys = np.linspace(-2, 3, 11)
        err = oracle.pseudo_true(ys, x, bw, dgp_a, epa).beta0 - dgp_a.F(ys, x)
        bp = oracle.bias_prediction(ys, x, bw, dgp_a, epa)
        gen = oracle.bias_prediction(ys, x, bw, dgp_a, epa, form="general")
        assert bp.form == "interior" and bp.interior
        np.testing.assert_allclose(gen.total, bp.total, atol=1e-13)
        res.append(np.max(np.abs(err - bp.total)))
    assert res[1] / res[0] < 0.1 and res[2] / res[1] < 0.1
    with pytest.raises(ValueError):
        oracle.bias_prediction(0.0, x, Bandwidths(0.1, 0.1), dgp_a, epa, form="other")


def test_theta_and_variance_closed_forms():
    assert oracle.theta(get_dgp("U"), (0.0, 1.0)) == pytest.approx(0.5, abs=1e-14)
    assert oracle.clt_variance(get_dgp("U"), (0.0, 1.0)) == pytest.approx(1 / 12, abs=1e-13)
    # DGP-C: theta = 2 - E[(1+X)/2]; V = E Var(Y|X) = E(1+X)^2 / 28
    assert oracle.theta(get_dgp("C"), (0.0, 2.0)) == pytest.approx(1.25, abs=1e-11)
    assert oracle.clt_variance(get_dgp("C"), (0.0, 2.0)) == pytest.approx(1 / 12, abs=1e-11)
    with pytest.raises(ValueError):
        oracle.clt_variance(get_dgp("B"))


def test_theta_against_dblquad(dgp_a):
    ref, _ = integrate.dblquad(lambda y, x: ndtr(y - x * x), 0, 1, -4, 5, epsabs=1e-12, epsrel=1e-12)
    assert oracle.theta(dgp_a, (-4.0, 5.0)) == pytest.approx(ref, abs=1e-9)


def test_variance_against_monte_carlo(dgp_a):
    # V = E[((ybar - s) - int F(y|t) dy)^2] with (s, t) ~ joint, Y clipped to the box
    s = draw(dgp_a, 400_000, 23)
    lo, hi = -4.0, 5.0
    mass = np.array([_q(lambda y: float(ndtr(y - t * t)), lo, hi) for t in np.linspace(0, 1, 201)])
    inner = (hi - np.clip(s.y, lo, hi)) - np.interp(s.x[:, 0], np.linspace(0, 1, 201), mass)
    mc = np.mean(inner ** 2)
    se = np.std(inner ** 2) / np.sqrt(s.n)
    assert oracle.clt_variance(dgp_a, (lo, hi)) == pytest.approx(mc, abs=4 * se)


def test_eigenvalue_band_positive(epa):
    band = oracle.eigenvalue_band(get_dgp("A"), epa, m=11)
    assert 0 < band["eig_min"] <= band["eig_max"]
    assert band["C"] >= 1.0


def test_checked_in_fixtures_cross_checked_with_scipy(dgp_a):
    data = fixtures.load_checked_in()
    for entry in data["beta_bar0"]:
        if entry["dgp"] != "A":
            continue
        want = scipy_beta_bar_1d(dgp_a, entry["y"], entry["x"][0], entry["h1"], entry["h2"])[0]
        assert entry["value"] == pytest.approx(want, abs=1e-10)
    theta = {(e["dgp"], tuple(e["y_range"])): e["value"] for e in data["theta"]}
    assert theta[("B", (-6.0, 8.0))] == pytest.approx(
        integrate.tplquad(lambda y, b, a: ndtr(y - a - b), 0, 1, 0, 1, -6, 8,
                          epsabs=1e-10, epsrel=1e-10)[0], abs=1e-8)
    assert json.dumps(data)  # serialisable


def test_omega_examples_and_positivity():
    spec = make_spec()
    sup = get_dgp("A").support
    np.testing.assert_allclose(oracle.omega([0.0], 0.5, sup, spec).omega,
                               [[0.5, 0.1875], [0.1875, 0.1]], atol=1e-13)
    np.testing.assert_allclose(oracle.xi_pop([0.5], 0.1, get_dgp("A"), spec), np.diag([1.0, 0.2]), atol=1e-13)
    rng = np.random.default_rng(2)
    b = get_dgp("B")
    spec2 = make_spec(d=2)
    pts = np.vstack([rng.random((46, 2)), [[0, 0], [0, 1], [1, 0], [1, 1]]])
    for x in pts:
        om = oracle.omega(x, 0.3, b.support, spec2)
        xi = oracle.xi_pop(x, 0.3, b, spec2)
        assert om.eig_min > 0
        np.testing.assert_allclose(xi, om.omega, atol=1e-12)       # f_X = 1 on the unit square
        np.testing.assert_array_equal(xi, xi.T)


def test_ftilde_properties(dgp_a, epa):
    ys = np.linspace(-3, 4, 71)
    assert np.allclose(oracle.smoothed_cdf_Ftilde(ys, [0.4], 1e-6, dgp_a, epa), dgp_a.F(ys, np.array([0.4])),
                       atol=1e-6)
    assert oracle.smoothed_cdf_Ftilde(40.0, [0.4], 0.2, dgp_a, epa) == 1.0
    assert np.all(np.diff(oracle.smoothed_cdf_Ftilde(ys, [0.4], 0.2, dgp_a, epa)) >= 0)


def test_independent_case_and_flat_bias():
    u = get_dgp("U")
    spec = make_spec()
    bw = Bandwidths(0.2, 0.1)
    for x in (0.0, 0.5, 0.9):
        pt = oracle.pseudo_true(0.35, [x], bw, u, spec)
        ft = oracle.smoothed_cdf_Ftilde(0.35, [x], 0.1, u, spec)
        assert pt.beta0 == pytest.approx(ft, abs=1e-12) and abs(pt.beta_bar[1]) < 1e-11
        assert 0 <= pt.beta0 <= 1
    # F linear in x and y near (0.35, 0.5): every second derivative is zero
    assert oracle.bias_prediction(0.35, [0.5], bw, u, spec).total == 0.0


def _degenerate_dgp(c=0.3):
    from dataclasses import replace
    base = get_dgp("U")
    F = lambda y, x: np.broadcast_to((np.asarray(y) >= c).astype(float),
                                     np.broadcast_shapes(np.shape(y), np.shape(x)[:-1])).copy()
    return replace(base, id="degenerate", F=F, kinks_y=(c,))


def test_variance_degenerate_nonnegative_and_theta_monotone(dgp_a):
    deg = _degenerate_dgp()
    # joint density of a point mass is not a function; integrate the inner square directly
    assert oracle.clt_inner(0.3, 0.5, deg, (0.0, 1.0)) == pytest.approx(0.0, abs=1e-12)
    assert oracle.clt_variance(dgp_a, (-2.0, 3.0)) >= 0
    assert oracle.theta(dgp_a, (-4.0, 5.0)) < oracle.theta(dgp_a, (-4.0, 5.5))


def test_uniform_variance_monte_carlo():
    u = get_dgp("U")
    rng = np.random.default_rng(6)
    s, t = rng.random(1_000_000), rng.random(1_000_000)
    inner = oracle.clt_inner(s, t[:1], u, (0.0, 1.0))        # F(y|t) does not depend on t
    mc = np.mean(inner ** 2)
    assert oracle.clt_variance(u, (0.0, 1.0)) == pytest.approx(mc, rel=0.005)


def test_pseudo_true_matches_monte_carlo_design():
    dgp = get_dgp("A")
    spec = make_spec()
    bw = Bandwidths(0.1, 0.1)
    batches = [draw(dgp, 100_000, 1000 + b) for b in range(10)]
    from condist.llr import fit_smoothed
    vals = np.array([fit_smoothed(s, 0.25, [0.5], bw, spec).beta0 for s in batches])
    big = Sample(y=np.concatenate([s.y for s in batches]), x=np.concatenate([s.x for s in batches]),
                 support=dgp.support)
    fit = fit_smoothed(big, 0.25, [0.5], bw, spec).beta0
    target = oracle.pseudo_true(0.25, [0.5], bw, dgp, spec).beta0
    se = vals.std(ddof=1) / np.sqrt(vals.size)          # batch-means standard error at n = 1e6
    assert abs(fit - target) < 3 * se
