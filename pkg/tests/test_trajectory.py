import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salmon.trajectory import SplineTrajectory, TrajectoryError, fit_spline


def natural_spline_oracle(knots, values):
    """Textbook natural cubic spline: Thomas solve for the knot second derivatives."""
    n = len(knots) - 1
    h = [knots[i + 1] - knots[i] for i in range(n)]
    m = [0.0] * (n + 1)
    if n > 1:
        sub, diag, sup, rhs = [], [], [], []
        for i in range(1, n):
            sub.append(h[i - 1])
            diag.append(2.0 * (h[i - 1] + h[i]))
            sup.append(h[i])
            rhs.append(6.0 * ((values[i + 1] - values[i]) / h[i] - (values[i] - values[i - 1]) / h[i - 1]))
        k = len(diag)
        for i in range(1, k):
            w = sub[i] / diag[i - 1]
            diag[i] -= w * sup[i - 1]
            rhs[i] -= w * rhs[i - 1]
        sol = [0.0] * k
        sol[-1] = rhs[-1] / diag[-1]
        for i in range(k - 2, -1, -1):
            sol[i] = (rhs[i] - sup[i] * sol[i + 1]) / diag[i]
        m[1:n] = sol

    def f(s):
        i = min(max(np.searchsorted(knots, s, side="right") - 1, 0), n - 1)
        a, b = knots[i], knots[i + 1]
        hi = b - a
        return (m[i] * (b - s) ** 3 / (6 * hi) + m[i + 1] * (s - a) ** 3 / (6 * hi)
                + (values[i] / hi - m[i] * hi / 6) * (b - s) + (values[i + 1] / hi - m[i + 1] * hi / 6) * (s - a))

    return f


def random_points(rng, n):
    steps = rng.normal(size=(n - 1, 3)) * np.array([15.0, 15.0, 3.0])
    steps[:, 0] += 10.0
    return np.vstack([np.zeros(3), np.cumsum(steps, axis=0)])


def test_collinear_points_give_straight_line():
    tr = fit_spline([(0, 0, 0), (1, 2, 0.5), (2, 4, 1.0)])
    assert np.abs(tr.coefficients[:2]).max() < 1e-12
    mid = tr.eval(tr.total_length / 4)
    assert mid == pytest.approx((0.5, 1.0, 0.25), abs=1e-12)


def test_two_points_linear():
    tr = fit_spline([(0, 0, 0), (4, -2, 6)])
    assert tr.eval(0.0) == (0.0, 0.0, 0.0)
    assert tr.eval(tr.total_length) == pytest.approx((4, -2, 6), abs=1e-12)
    assert tr.eval(tr.total_length / 2) == pytest.approx((2, -1, 3), abs=1e-12)


def test_cubic_samples_against_tridiagonal_oracle():
    xs = np.linspace(-2.0, 2.0, 5)
    pts = np.column_stack([xs, xs**3, np.zeros(5)])
    tr = fit_spline(pts)
    knots = np.concatenate(([0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))))
    fx, fy = natural_spline_oracle(knots, pts[:, 0]), natural_spline_oracle(knots, pts[:, 1])
    for s in np.linspace(0, knots[-1], 52)[1:-1]:
        x, y, z = tr.eval(s)
        assert abs(x - fx(s)) < 1e-9 and abs(y - fy(s)) < 1e-9 and z == 0.0


def test_random_against_oracle():
    rng = np.random.default_rng(11)
    for _ in range(10):
        pts = random_points(rng, rng.integers(2, 15))
        tr = fit_spline(pts)
        oracles = [natural_spline_oracle(tr.knots, pts[:, d]) for d in range(3)]
        for s in rng.uniform(0, tr.total_length, 50):
            assert np.allclose(tr.eval(s), [o(s) for o in oracles], atol=1e-9, rtol=0)


def test_endpoints_and_range():
    pts = [(0, 0, 0), (10, 3, 1), (20, -4, 2)]
    tr = fit_spline(pts)
    assert tr.eval(0.0) == (0.0, 0.0, 0.0)
    assert tr.eval(tr.total_length) == pytest.approx(pts[-1], abs=1e-12)
    with pytest.raises(TrajectoryError):
        tr.eval(-1.0)
    with pytest.raises(TrajectoryError):
        tr.eval(tr.total_length + 1.0)


@pytest.mark.parametrize("pts", [[(0, 0, 0)], [(0, 0, 0), (1, 1, 1), (1, 1, 1), (2, 0, 0)], []])
def test_fit_errors(pts):
    with pytest.raises(TrajectoryError):
        fit_spline(pts)


def test_straight_tangents():
    tr = fit_spline([(0, 0, 0), (0, 10, 0)])
    assert tr.eval_tangent(3.0) == pytest.approx((0, 1, 0), abs=1e-15)
    back = fit_spline([(0, 10, 0), (0, 0, 0)])
    assert back.eval_tangent(3.0) == pytest.approx((0, -1, 0), abs=1e-15)


def spline_quality(tr: SplineTrajectory, pts, rng, n_probe=100):
    """Worst knot residual, C2 mismatch, end curvature and tangent error."""
    scale = max(1.0, float(np.abs(pts).max()))
    resid = max(math.dist(tr.eval(s), p) for s, p in zip(tr.knots, pts))
    c = tr.coefficients
    h = np.diff(tr.knots)
    c2 = 0.0
    for i in range(1, len(pts) - 1):
        left = 6 * c[0, i - 1] * h[i - 1] + 2 * c[1, i - 1]
        right = 2 * c[1, i]
        c1l = 3 * c[0, i - 1] * h[i - 1] ** 2 + 2 * c[1, i - 1] * h[i - 1] + c[2, i - 1]
        c2 = max(c2, np.abs(left - right).max(), np.abs(c1l - c[2, i]).max())
    ends = max(np.abs(tr.derivative(0.0, 2)).max(), np.abs(tr.derivative(tr.total_length, 2)).max())
    tang = 0.0
    hh = 1e-4
    for s in rng.uniform(hh, tr.total_length - hh, n_probe):
        fd = (np.asarray(tr.eval(s + hh)) - np.asarray(tr.eval(s - hh))) / (2 * hh)
        fd /= np.linalg.norm(fd)
        tang = max(tang, float(np.linalg.norm(fd - tr.eval_tangent(s))))
    return resid / scale, c2, ends, tang


def test_spline_quality_random():
    rng = np.random.default_rng(5)
    for _ in range(20):
        pts = random_points(rng, rng.integers(3, 25))
        tr = fit_spline(pts)
        resid, c2, ends, tang = spline_quality(tr, pts, rng)
        assert resid < 1e-12
        assert c2 < 1e-9
        assert ends < 1e-9
        assert tang < 1e-6


def test_project_on_curve():
    rng = np.random.default_rng(2)
    pts = random_points(rng, 8)
    tr = fit_spline(pts)
    for s0 in rng.uniform(1, tr.total_length - 1, 20):
        assert tr.project(tr.eval(s0), s0) == pytest.approx(s0, abs=1e-6)


def test_project_perpendicular_offset():
    tr = fit_spline([(0, 0, 0), (100, 0, 0)])
    assert tr.project((50, 7, 0), 40.0) == pytest.approx(50.0, abs=1e-6)
    assert tr.project((-5, 0, 0), 0.0) == 0.0
    assert tr.project((130, 0, 0), 95.0) == 100.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_project_against_dense_scan(seed):
    rng = np.random.default_rng(seed)
    pts = random_points(rng, int(rng.integers(3, 10)))
    tr = fit_spline(pts)
    s0 = rng.uniform(0, tr.total_length)
    p = np.asarray(tr.eval(s0)) + rng.normal(size=3) * 2.0
    s = tr.project(p, s0, window=tr.total_length)
    grid = tr.sample(np.linspace(0, tr.total_length, 10_000))
    best = np.sqrt(((grid - p) ** 2).sum(axis=1)).min()
    assert math.dist(tr.eval(s), p) <= best + 1e-4


def test_project_monotone_forward_tracking():
    rng = np.random.default_rng(9)
    pts = random_points(rng, 12)
    tr = fit_spline(pts)
    s_prev = 0.0
    for s in np.linspace(0, tr.total_length, 500):
        t = np.asarray(tr.eval_tangent(s))
        normal = np.array([-t[1], t[0], 0.0])
        normal /= np.linalg.norm(normal)
        s_new = tr.project(np.asarray(tr.eval(s)) + 0.3 * normal, s_prev, window=6.0)
        assert s_new >= s_prev - 1e-9
        s_prev = s_new


def test_csv_dump():
    tr = fit_spline([(0, 0, 0), (0, 2.5, 0)])
    lines = tr.to_csv(1.0).splitlines()
    assert lines[0] == "s,x,y,z"
    assert [float(l.split(",")[0]) for l in lines[1:]] == [0.0, 1.0, 2.0, 2.5]
