import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from condist.dgp import (DomainError, SupportSpec, draw, get_dgp, replication_seed, truth,
                         write_sample_csv)

IDS = ("A", "B", "C", "U")


def _point(dgp, fracs):
    lo = np.asarray(dgp.support.lower)
    hi = np.asarray(dgp.support.upper)
    return lo + (hi - lo) * np.asarray(fracs[: dgp.d])


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(("A", "B", "C")), st.floats(0.05, 0.95), st.floats(0.05, 0.95),
       st.floats(0.05, 0.95))
def test_derivatives_match_finite_differences(dgp_id, f1, f2, fy):
    dgp = get_dgp(dgp_id)
    x = _point(dgp, [f1, f2])
    lo, hi = dgp.y_range if dgp_id != "C" else (0.0, 1.0 + x[0])
    y = lo + fy * (hi - lo)
    e = 1e-4
    tr = truth(dgp, y, x)
    fy2 = (dgp.F(y + e, x) - 2 * dgp.F(y, x) + dgp.F(y - e, x)) / e ** 2
    assert tr.d2F_dy2 == pytest.approx(fy2, abs=2e-5)
    assert dgp.dF_dy(y, x) == pytest.approx((dgp.F(y + e, x) - dgp.F(y - e, x)) / (2 * e), abs=1e-7)
    for a in range(dgp.d):
        ea = np.zeros(dgp.d)
        ea[a] = e
        assert tr.gradient_x[a] == pytest.approx((dgp.F(y, x + ea) - dgp.F(y, x - ea)) / (2 * e), abs=1e-7)
        for b in range(dgp.d):
            eb = np.zeros(dgp.d)
            eb[b] = e
            fd = (dgp.F(y, x + ea + eb) - dgp.F(y, x + ea - eb) - dgp.F(y, x - ea + eb)
                  + dgp.F(y, x - ea - eb)) / (4 * e * e)
            assert tr.hessian_x[a, b] == pytest.approx(fd, abs=2e-5)


@pytest.mark.parametrize("dgp_id", IDS)
def test_sampler_matches_conditional_cdf(dgp_id):
    dgp = get_dgp(dgp_id)
    s = draw(dgp, 200_000, 99)
    # P(Y <= y) = E F(y | X); compare at a few y-values
    for y in np.quantile(s.y, [0.1, 0.5, 0.9]):
        emp = np.mean(s.y <= y)
        model = np.mean(dgp.F(y, s.x))
        assert emp == pytest.approx(model, abs=4e-3)
    assert np.all(dgp.support.contains(s.x))


def test_draw_is_deterministic(dgp_a):
    a = draw(dgp_a, 50, 3)
    b = draw(dgp_a, 50, 3)
    c = draw(dgp_a, 50, 4)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.x, b.x)
    assert not np.array_equal(a.y, c.y)


def test_replication_seed():
    assert replication_seed(5, 0) == 5
    seeds = {replication_seed(20240611, i) for i in range(10_000)}
    assert len(seeds) == 10_000
    assert all(0 <= s < 2 ** 64 for s in seeds)


def test_truth_rejects_points_outside_box(dgp_a):
    with pytest.raises(DomainError):
        truth(dgp_a, 0.0, [1.5])
    with pytest.raises(DomainError):
        truth(dgp_a, 0.0, [0.5, 0.5])


def test_cdf_limits_and_monotonicity():
    for dgp_id in IDS:
        dgp = get_dgp(dgp_id)
        x = _point(dgp, [0.3, 0.7])
        lo, hi = dgp.y_range
        ys = np.linspace(lo - 1, hi + 1, 500)
        F = dgp.F(ys, x)
        assert np.all(np.diff(F) >= -1e-15)
        assert F[0] == pytest.approx(0.0, abs=1e-8) and F[-1] == pytest.approx(1.0, abs=1e-8)


def test_support_spec():
    s = SupportSpec((0.0, -1.0), (1.0, 3.0))
    assert s.d == 2 and s.volume == 4.0 and s.lambda0 == 0.5
    assert s.is_interior([0.5, 1.0], 0.4) and not s.is_interior([0.1, 1.0], 0.2)
    with pytest.raises(ValueError):
        SupportSpec((1.0,), (0.0,))
    with pytest.raises(ValueError):
        get_dgp("Z")


def test_sample_csv(tmp_path, dgp_a):
    s = draw(get_dgp("B"), 3, 1)
    p = tmp_path / "s.csv"
    write_sample_csv(s, p)
    raw = p.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "y,x1,x2" and len(lines) == 4
    assert float(lines[1].split(",")[0]) == s.y[0]


def test_hessians_on_random_points_strict():
    rng = np.random.default_rng(8)
    e = 1e-4
    for dgp_id in ("A", "B", "C"):
        dgp = get_dgp(dgp_id)
        for _ in range(100):
            x = rng.uniform(0.05, 0.95, dgp.d)
            lo, hi = (0.02, 0.98 * (1 + x[0])) if dgp_id == "C" else (-3.0, 5.0)
            y = rng.uniform(lo, hi)
            H = dgp.hess_x(y, x)
            for a in range(dgp.d):
                for b in range(dgp.d):
                    ea, eb = np.eye(dgp.d)[a] * e, np.eye(dgp.d)[b] * e
                    fd = (dgp.F(y, x + ea + eb) - dgp.F(y, x + ea - eb) - dgp.F(y, x - ea + eb)
                          + dgp.F(y, x - ea - eb)) / (4 * e * e)
                    assert abs(H[a, b] - fd) < 1e-5
            fd = (dgp.F(y + e, x) - 2 * dgp.F(y, x) + dgp.F(y - e, x)) / e ** 2
            assert abs(dgp.d2F_dy2(y, x) - fd) < 1e-5


def test_joint_density_integrates_to_one():
    from scipy import integrate
    a = get_dgp("A")
    lo, hi = a.y_range
    tot = integrate.dblquad(lambda y, x: float(a.joint(y, np.array([x]))), 0, 1, lo, hi,
                            epsabs=1e-10)[0]
    assert tot == pytest.approx(1.0, abs=1e-6)
    c = get_dgp("C")
    tot = integrate.dblquad(lambda y, x: float(c.joint(y, np.array([x]))), 0, 1, 0, 2,
                            epsabs=1e-10)[0]
    assert tot == pytest.approx(1.0, abs=1e-6)
    b = get_dgp("B")
    tot = integrate.tplquad(lambda y, x2, x1: float(b.joint(y, np.array([x1, x2]))), 0, 1, 0, 1,
                            *b.y_range, epsabs=1e-9)[0]
    assert tot == pytest.approx(1.0, abs=1e-6)
    for d in (a, b, c):
        assert float(d.fX(np.full(d.d, 0.5))) >= 1.0


def test_point_examples():
    a = get_dgp("A")
    assert float(a.F(0.0, np.array([0.0]))) == 0.5
    x = 0.7
    z = 0.3 - x * x
    assert float(a.grad_x(0.3, np.array([x]))[0]) == pytest.approx(
        -2 * x * np.exp(-z * z / 2) / np.sqrt(2 * np.pi), abs=1e-15)
    assert float(get_dgp("B").F(50.0, np.array([0.5, 0.5]))) == 1.0
    s1, s2 = draw(a, 5, 42), draw(a, 5, 42)
    np.testing.assert_array_equal(s1.y, s2.y)
    s = draw(a, 100_000, 1)
    assert np.mean(s.y <= s.x[:, 0] ** 2) == pytest.approx(0.5, abs=0.01)


@pytest.mark.parametrize("dgp_id", ["A", "C"])
def test_conditional_law_ks_in_narrow_bins(dgp_id):
    from scipy import stats
    dgp = get_dgp(dgp_id)
    s = draw(dgp, 100_000, 31)
    for centre in (0.1, 0.5, 0.9):
        keep = np.abs(s.x[:, 0] - centre) < 0.005
        # conditional law at the bin centre; the bin width shifts it by < 1e-2 in sd units
        res = stats.kstest(s.y[keep], lambda y: dgp.F(y, np.array([centre])))
        assert res.pvalue > 1e-3
