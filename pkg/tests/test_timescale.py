import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from oracles import geometric_scale, neumaier
from tsavg import (
    ContinuousInterval,
    ExplicitPoints,
    GeometricCondensation,
    GridFunction,
    Interval,
    TimeScale,
    UniformGrid,
    delta_derivative_numeric,
    delta_integral,
    exp_function,
    scale_from_spec,
)
from tsavg.errors import (
    EmptyInterval,
    KappaViolation,
    NotRegressive,
    PointNotOnScale,
    QuadratureFailure,
)

GEO2 = geometric_scale(2.0)
UNIT = TimeScale([ContinuousInterval(0.0, 1.0)])
GRID = TimeScale([UniformGrid(0.0, 0.25, 9)])
MIXED = TimeScale([ExplicitPoints((0.0, 1.0)), ContinuousInterval(2.0, 3.0)])


# -- jump operators -------------------------------------------------------------


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
def test_sigma_geometric_closed_form(q):
    ts = geometric_scale(q)
    for t in ts.segments[0].family[:20]:
        assert ts.sigma(t) == pytest.approx((q - 1 + t) / q, rel=0, abs=1e-15)


def test_sigma_examples():
    assert GEO2.sigma(0.0) == 0.5
    assert UNIT.sigma(0.3) == 0.3
    assert GRID.sigma(0.5) == 0.75


def test_sigma_at_maximum_is_identity():
    assert GEO2.sigma(1.0) == 1.0
    assert GRID.sigma(2.0) == 2.0
    assert UNIT.sigma(1.0) == 1.0


def test_rho_examples():
    assert GEO2.rho(0.5) == 0.0
    assert UNIT.rho(0.3) == 0.3
    assert GEO2.rho(1.0) == 1.0
    assert GEO2.rho(0.0) == 0.0


def test_mu_geometric_closed_form():
    for k in range(12):
        t = 1 - 2.0 ** -k
        assert GEO2.mu(t) == 2.0 ** -(k + 1)
        assert GEO2.mu(t) == pytest.approx((2 - 1) / 2 * (1 - t), abs=1e-16)


def test_mu_examples():
    assert UNIT.mu(0.4) == 0.0
    assert all(GRID.mu(t) == 0.25 for t in GRID.all_points()[:-1])
    assert GRID.mu(2.0) == 0.0


def test_mixed_scale_jumps_across_gap():
    assert MIXED.sigma(1.0) == 2.0
    assert MIXED.mu(1.0) == 1.0
    assert MIXED.rho(2.0) == 1.0
    assert MIXED.sigma(2.0) == 2.0


def test_off_scale_point_rejected():
    with pytest.raises(PointNotOnScale):
        GRID.sigma(0.3)
    with pytest.raises(PointNotOnScale):
        GEO2.mu(0.6)
    with pytest.raises(PointNotOnScale):
        MIXED.rho(1.5)


def test_membership_tolerance():
    assert GRID.contains(0.5 + 1e-13)
    assert not GRID.contains(0.5 + 1e-9)
    assert GRID.snap(0.5 + 1e-13) == 0.5


def test_classify_examples():
    assert GEO2.classify(0.0).isolated
    assert GEO2.classify(0.75).isolated
    top = GEO2.classify(1.0)
    assert top.left == "dense" and top.right == "dense" and top.endpoint == "max"
    assert UNIT.classify(0.5).dense
    c = MIXED.classify(1.0)
    assert (c.right, c.left) == ("scattered", "scattered")
    c = MIXED.classify(2.0)
    assert (c.right, c.left) == ("dense", "scattered")


def test_classify_agrees_with_jumps():
    for ts in (GEO2, GRID, MIXED):
        for t in ts.all_points():
            c = ts.classify(t)
            assert (c.right == "scattered") == (ts.sigma(t) > t)
            assert (c.left == "scattered") == (ts.rho(t) < t)


def test_condensation_limit_is_stored():
    assert 1.0 in GEO2.condensation_limits
    assert GEO2.contains(1.0)
    assert GEO2.sup == 1.0


def test_geometric_truncation_reports_effective_count():
    seg = GeometricCondensation(2.0, 64)
    assert seg.n_effective == 53
    assert np.all(np.diff(seg.family) > 0)
    assert seg.family[-1] < 1.0
    small = GeometricCondensation(2.0, 10)
    assert small.n_effective == 10


def test_overlapping_segments_rejected():
    with pytest.raises(ValueError):
        TimeScale([ContinuousInterval(0, 2), ExplicitPoints((1.0, 3.0))])
    with pytest.raises(ValueError):
        GeometricCondensation(1.0)
    with pytest.raises(ValueError):
        UniformGrid(0.0, 0.0, 3)


# -- walks ----------------------------------------------------------------------


def test_points_between_examples():
    assert list(GEO2.points_between(0.0, 0.75)) == [0.0, 0.5, 0.75]
    assert list(UNIT.points_between(0.0, 1.0)) == [Interval(0.0, 1.0)]
    assert list(MIXED.points_between(0.0, 3.0)) == [0.0, 1.0, Interval(2.0, 3.0)]


def test_points_between_partial_interval():
    assert list(MIXED.points_between(1.0, 2.5)) == [1.0, Interval(2.0, 2.5)]


def test_points_between_empty_range():
    with pytest.raises(EmptyInterval):
        list(GRID.points_between(1.0, 0.5))


# -- integral -------------------------------------------------------------------


def test_integral_of_one_telescopes():
    assert delta_integral(GEO2, lambda t: 1.0, 0.0, 1.0) == 1.0


def test_integral_alternating_example():
    f = lambda t: (-1.0) ** round(-math.log(1 - t) / math.log(2))  # noqa: E731
    assert delta_integral(GEO2, f, 0.0, 0.75) == 0.25


def test_integral_uniform_grid_sum():
    ts = TimeScale([UniformGrid(0, 1, 4)])
    assert delta_integral(ts, lambda t: t, 0, 3) == 3.0


def test_integral_interval_quadrature():
    assert delta_integral(UNIT, np.sin, 0.0, 1.0) == pytest.approx(1 - math.cos(1.0), abs=1e-12)


def test_integral_mixed_scale():
    # 0*1 + 1*1 + int_2^3 t dt
    assert delta_integral(MIXED, lambda t: t, 0.0, 3.0) == pytest.approx(1.0 + 2.5, abs=1e-12)


def test_integral_vector_valued():
    val = delta_integral(MIXED, lambda t: np.array([1.0, t]), 0.0, 3.0)
    assert val.shape == (2,)
    assert val == pytest.approx([3.0, 3.5], abs=1e-12)


def test_integral_empty_range_is_zero():
    assert delta_integral(GEO2, lambda t: 1.0, 0.5, 0.5) == 0.0


def test_integral_quadrature_failure():
    ts = TimeScale([ContinuousInterval(0.0, 1.0)])
    with pytest.raises(QuadratureFailure):
        delta_integral(ts, lambda t: 1.0 / (t - 0.5) ** 2 if t != 0.5 else 0.0, 0.0, 1.0)


def test_integral_tabulated_function():
    pts = GRID.all_points()
    f = GridFunction.tabulated(pts, pts ** 2)
    expected = neumaier([float(t) ** 2 * 0.25 for t in pts[:-1]])
    assert delta_integral(GRID, f, 0.0, 2.0) == expected


# -- derivative -----------------------------------------------------------------


def test_derivative_jump_example():
    d = delta_derivative_numeric(GEO2, lambda t: t * t, 0.0)
    assert d.method == "jump" and d.value == 0.5


def test_derivative_dense_example():
    d = delta_derivative_numeric(UNIT, lambda t: t * t, 0.5)
    assert d.method == "central"
    assert d.step == 1e-6
    assert d.value == pytest.approx(1.0, abs=1e-8)


def test_derivative_one_sided_at_interval_end():
    assert delta_derivative_numeric(UNIT, lambda t: t ** 3, 0.0).method == "forward"
    d = delta_derivative_numeric(MIXED, lambda t: t ** 2, 2.0)
    assert d.method == "forward" and d.value == pytest.approx(4.0, abs=1e-8)


def test_derivative_of_exponential_at_isolated_points():
    p = lambda t: 0.3  # noqa: E731
    e = lambda t: exp_function(GEO2, p, t, 0.0)  # noqa: E731
    for t in GEO2.segments[0].family[:30]:
        d = delta_derivative_numeric(GEO2, e, t)
        # the quotient of two values one graininess apart carries ~ulp/mu error
        rel = 4 * np.finfo(float).eps / (GEO2.mu(t) * 0.3)
        assert d.value == pytest.approx(0.3 * e(t), rel=rel)


def test_derivative_kappa_violation():
    with pytest.raises(KappaViolation):
        delta_derivative_numeric(GRID, lambda t: t, 2.0)


# -- exponential ----------------------------------------------------------------


def test_exponential_geometric_product():
    p = 0.7
    for k in range(0, 25):
        expected = 1.0
        for i in range(k):
            expected = expected + (1.0 / 2 ** (i + 1)) * (p * expected)
        assert exp_function(GEO2, lambda t: p, 1 - 2.0 ** -k, 0.0) == expected


def test_exponential_uniform_grid():
    assert exp_function(GRID, lambda t: 0.5, 2.0, 0.0) == pytest.approx(1.125 ** 8, rel=1e-15)


def test_exponential_interval():
    assert exp_function(UNIT, lambda t: 0.7, 1.0, 0.0) == pytest.approx(math.exp(0.7), rel=1e-12)


def test_exponential_zero_rate_is_one():
    for ts in (GEO2, GRID, MIXED):
        for t in ts.all_points():
            assert exp_function(ts, lambda s: 0.0, t, ts.inf) == 1.0


def test_exponential_backwards_is_reciprocal():
    a = exp_function(GRID, lambda t: 0.5, 2.0, 0.5)
    assert exp_function(GRID, lambda t: 0.5, 0.5, 2.0) == 1.0 / a


def test_exponential_not_regressive():
    with pytest.raises(NotRegressive):
        exp_function(GRID, lambda t: -4.0, 2.0, 0.0)


@pytest.mark.parametrize("ts", [GEO2, GRID, MIXED], ids=["geometric", "grid", "mixed"])
def test_exponential_step_identity_exact(ts):
    p = lambda t: 0.4 + 0.1 * math.sin(5 * t)  # noqa: E731
    for t in ts.all_points():
        m = ts.mu(t)
        if m == 0.0 or t in ts.condensation_limits:
            continue
        y = exp_function(ts, p, t, ts.inf)
        assert exp_function(ts, p, ts.sigma(t), ts.inf) == y + m * (p(t) * y)


# -- declarative construction ---------------------------------------------------


def test_scale_from_spec():
    ts = scale_from_spec(
        {"kind": "union", "segments": [
            {"kind": "points", "points": [0, 1]},
            {"kind": "interval", "a": 2, "b": 3},
        ]}
    )
    assert list(ts.points_between(0, 3)) == [0.0, 1.0, Interval(2.0, 3.0)]
    ts = scale_from_spec({"kind": "geometric", "q": 3, "n_max": 5})
    assert len(ts.all_points()) == 7
    with pytest.raises(ValueError):
        scale_from_spec({"kind": "spiral"})


# -- properties -----------------------------------------------------------------


@st.composite
def scales(draw, allow_intervals=True):
    n = draw(st.integers(1, 4))
    cuts = np.cumsum(draw(st.lists(st.floats(0.5, 2.0), min_size=n, max_size=n)))
    segs = []
    for c in cuts:
        width = draw(st.floats(0.05, 0.4))
        if allow_intervals and draw(st.booleans()):
            segs.append(ContinuousInterval(float(c), float(c + width)))
        else:
            k = draw(st.integers(1, 6))
            segs.append(ExplicitPoints(tuple(np.linspace(c, c + width, k).tolist())))
    return TimeScale(segs)


def _sample_points(ts, data):
    pts = ts.all_points().tolist()
    for iv in ts.intervals():
        pts.append(data.draw(st.floats(iv.a, iv.b)))
    return sorted(set(pts))


SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@SETTINGS
@given(scales(), st.data())
def test_jump_invariants(ts, data):
    for t in _sample_points(ts, data):
        s, r = ts.sigma(t), ts.rho(t)
        assert s >= t and r <= t and ts.mu(t) >= 0
        assert ts.mu(t) == s - t
        if s > t:
            assert ts.rho(s) == t


@SETTINGS
@given(scales(), st.data())
def test_integral_of_one_is_length(ts, data):
    pts = _sample_points(ts, data)
    a, b = sorted(data.draw(st.sampled_from(pts)) for _ in range(2))
    assert delta_integral(ts, lambda t: 1.0, a, b) == pytest.approx(b - a, abs=1e-12)


@SETTINGS
@given(scales(), st.data())
def test_integral_additive(ts, data):
    pts = _sample_points(ts, data)
    a, b, c = sorted(data.draw(st.sampled_from(pts)) for _ in range(3))
    f = lambda t: math.cos(3 * t) + t  # noqa: E731
    whole = delta_integral(ts, f, a, c)
    parts = delta_integral(ts, f, a, b) + delta_integral(ts, f, b, c)
    assert whole == pytest.approx(parts, abs=1e-10)


@SETTINGS
@given(scales(allow_intervals=False), st.data())
def test_isolated_integral_matches_brute_force_sum(ts, data):
    pts = ts.all_points().tolist()
    a, b = sorted(data.draw(st.sampled_from(pts)) for _ in range(2))
    f = lambda t: math.exp(math.sin(7 * t))  # noqa: E731
    terms = [f(t) * ts.mu(t) for t in ts.points_between(a, b) if t < b]
    assert delta_integral(ts, f, a, b) == neumaier(terms)


@SETTINGS
@given(scales(), st.data())
def test_simple_useful_formula(ts, data):
    f = lambda t: t ** 3 - t  # noqa: E731
    if ts.inf == ts.sup:
        return
    for t in _sample_points(ts, data):
        if not ts.in_kappa(t):
            continue
        d = delta_derivative_numeric(ts, f, t).value
        m = ts.mu(t)
        assert abs(f(ts.sigma(t)) - f(t) - m * d) <= 1e-9 * max(m, 1e-300) + 1e-12
