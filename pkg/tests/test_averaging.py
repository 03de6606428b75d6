import math
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from oracles import alternating_integral, geometric_shift
from tsavg import (
    ShiftOperator,
    TimeScale,
    UniformGrid,
    VectorField,
    base_average,
    base_integral,
    build_averaged_field_periodic,
    build_averaged_field_quasiperiodic,
    delta_integral,
    error_bound_constant,
    estimate_constants,
    interval_length_bound,
    verify_delta_periodic,
    verify_quasiperiodic,
)
from tsavg.config import alternating_linear
from tsavg.errors import CertificateMissing, NonPositiveParameter, ZeroLengthPeriodInterval
from tsavg.shifts import PeriodicityCertificate

Z = TimeScale([UniformGrid(0.0, 1.0, 60)])
ZOP = ShiftOperator.additive(Z, period=1.0)


def certified_alternating(q):
    ts, op = geometric_shift(q)
    X = alternating_linear(ts)
    cert = verify_quasiperiodic(op, X.at(1.0), 2)
    return ts, op, X.with_certificate(cert), cert


def reciprocal_field(op):
    X = VectorField(lambda t, x: x / (1 - t), name="reciprocal")
    return X.with_certificate(verify_delta_periodic(op, X.at(1.0), 1))


def test_base_average_example():
    _, op, X, _ = certified_alternating(2.0)
    assert base_integral(X, op, 2, 0.0, 1.0)[0] == 0.25
    assert base_average(X, op, 2, 0.0, 1.5)[0] == pytest.approx(0.5)


def test_base_average_of_time_independent_field(q):
    _, op = geometric_shift(q)
    X = VectorField(lambda t, x: np.array([x[0] ** 2, 3.0]), dim=2)
    assert base_average(X, op, 2, 0.0, [1.5, 0.0]) == pytest.approx([2.25, 3.0], rel=1e-14)


def test_base_average_alternating_on_integers():
    X = VectorField(lambda t, x: (-1) ** int(t) * x)
    assert base_average(X, ZOP, 2, 0.0, 1.0)[0] == 0.0


def test_zero_length_period_interval():
    op = ShiftOperator(Z, forward=lambda s, t: t, derivative=lambda s, t: 1.0)
    X = VectorField(lambda t, x: x)
    with pytest.raises(ZeroLengthPeriodInterval):
        base_average(X, op, 1, 0.0, 1.0)


# -- periodic construction -------------------------------------------------------


def test_periodic_on_integers_is_classical_average():
    X = VectorField(lambda t, x: (1.0 + (-1) ** int(t) * 0.5) * x)
    X = X.with_certificate(verify_delta_periodic(ZOP, X.at(1.0), 2))
    avg = build_averaged_field_periodic(X, ZOP, 2, 0.0, N=10)
    assert avg.gamma == 1.0 and avg.K == 2.0
    for i in range(10):
        assert avg.interval_value(i, 2.0)[0] == 2.0


def test_periodic_time_independent_field():
    X = VectorField(lambda t, x: -x)
    X = X.with_certificate(verify_delta_periodic(ZOP, X.at(1.0), 1))
    avg = build_averaged_field_periodic(X, ZOP, 1, 0.0, N=5)
    for t in range(5):
        assert avg(float(t), 3.0)[0] == -3.0


def test_periodic_scaled_base_matches_direct_average(q):
    ts, op = geometric_shift(q)
    X = reciprocal_field(op)
    avg = build_averaged_field_periodic(X, op, 1, 0.0, N=20)
    for i in range(20):
        a, b = avg.breakpoints[i], avg.breakpoints[i + 1]
        if 1 - b < 1e-5:
            # 1/(1-t) at a stored point is only good to ulp/(1-t) here
            break
        direct = delta_integral(ts, X.at(1.0), a, b) / (b - a)
        assert avg.interval_value(i, 1.0)[0] == pytest.approx(direct, rel=1e-10)


def test_certificate_required():
    _, op = geometric_shift(2.0)
    X = VectorField(lambda t, x: x)
    with pytest.raises(CertificateMissing):
        build_averaged_field_periodic(X, op, 2, 0.0)
    none = PeriodicityCertificate("none", 2, 1.0, 1.0, 3)
    with pytest.raises(CertificateMissing):
        build_averaged_field_quasiperiodic(X.with_certificate(none), op, 2, 0.0, 0.25)
    _, _, Xc, cert = certified_alternating(2.0)
    with pytest.raises(CertificateMissing):
        build_averaged_field_periodic(Xc, op, 2, 0.0)
    with pytest.raises(CertificateMissing):
        build_averaged_field_quasiperiodic(Xc, op, 2, 0.0, 0.5)


# -- quasiperiodic construction --------------------------------------------------


def test_quasiperiodic_example_q2_is_constant():
    _, op, X, cert = certified_alternating(2.0)
    avg = build_averaged_field_quasiperiodic(X, op, 2, 0.0, cert.gamma, N=33)
    for i in range(33):
        assert avg.interval_value(i, 1.2)[0] == pytest.approx(1.2 / 3, abs=1e-12)


def test_quasiperiodic_value_matches_finite_sum_oracle(q):
    _, op, X, cert = certified_alternating(q)
    avg = build_averaged_field_quasiperiodic(X, op, 2, 0.0, cert.gamma, N=33)
    base = alternating_integral(q, 2)
    assert base == pytest.approx((q - 1) ** 2 / q ** 2, rel=1e-15)
    expected = base / (1 - q ** -2)
    for i in range(33):
        assert avg.interval_value(i, 1.0)[0] == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx((q - 1) / (q + 1), rel=1e-14)


def test_quasiperiodic_q3_value():
    _, op, X, cert = certified_alternating(3.0)
    avg = build_averaged_field_quasiperiodic(X, op, 2, 0.0, cert.gamma, N=5)
    assert base_integral(X, op, 2, 0.0, 1.0)[0] == pytest.approx(4 / 9, abs=1e-15)
    assert avg.lengths[0] == pytest.approx(8 / 9, abs=1e-15)
    assert avg.interval_value(0, 1.0)[0] == pytest.approx(0.5, abs=1e-15)


def test_unit_factor_reduces_to_periodic(q):
    _, op = geometric_shift(q)
    X = reciprocal_field(op)
    a = build_averaged_field_periodic(X, op, 1, 0.0, N=10)
    b = build_averaged_field_quasiperiodic(X, op, 1, 0.0, 1.0, N=10)
    for i in range(10):
        assert a.interval_value(i, 0.7).tolist() == b.interval_value(i, 0.7).tolist()


def test_scaling_relation(q):
    _, op, X, cert = certified_alternating(q)
    avg = build_averaged_field_quasiperiodic(X, op, 2, 0.0, cert.gamma, N=30)
    ref = avg.interval_value(0, 1.0)[0] * avg.lengths[0]
    for i in range(30):
        v = avg.interval_value(i, 1.0)[0] * avg.lengths[i] / cert.gamma ** i
        assert v == pytest.approx(ref, rel=1e-12)


def test_mean_zero_over_shift_intervals(q):
    ts, op, X, cert = certified_alternating(q)
    avg = build_averaged_field_quasiperiodic(X, op, 2, 0.0, cert.gamma)
    reachable = len(avg.breakpoints) - 1
    assert reachable >= 15
    for x in (-1.5, 0.3, 1.0):
        for i in range(reachable):
            a, b = avg.breakpoints[i], avg.breakpoints[i + 1]
            phi = lambda s: X(s, x) - avg.interval_value(i, x)  # noqa: E731
            assert abs(delta_integral(ts, phi, a, b)[0]) <= 1e-10


def test_mean_zero_periodic_case():
    ts, op = geometric_shift(2.0)
    X = reciprocal_field(op)
    avg = build_averaged_field_periodic(X, op, 1, 0.0, N=20)
    for i in range(20):
        a, b = avg.breakpoints[i], avg.breakpoints[i + 1]
        phi = lambda s: X(s, 1.0) - avg.interval_value(i, 1.0)  # noqa: E731
        assert abs(delta_integral(ts, phi, a, b)[0]) <= 1e-10


def test_averaged_field_inherits_lipschitz_constant(q):
    _, op, X, cert = certified_alternating(q)
    avg = build_averaged_field_quasiperiodic(X, op, 2, 0.0, cert.gamma)
    rng = np.random.default_rng(3)
    assert avg.lipschitz == 1.0
    for t in avg.breakpoints[:-1]:
        a, b = rng.uniform(-2, 2, size=2)
        assert abs(avg(t, a)[0] - avg(t, b)[0]) <= avg.lipschitz * abs(a - b) + 1e-15


def test_value_is_piecewise_constant_in_time():
    ts, op, X, cert = certified_alternating(2.0)
    avg = build_averaged_field_quasiperiodic(X, op, 2, 0.0, cert.gamma, N=4)
    assert avg.interval_index(0.0) == 0
    assert avg.interval_index(0.5) == 0
    assert avg.interval_index(0.75) == 1
    assert avg.interval_index(0.875) == 1


def test_evaluation_beyond_last_interval_warns():
    _, op, X, cert = certified_alternating(2.0)
    avg = build_averaged_field_quasiperiodic(X, op, 2, 0.0, cert.gamma, N=2)
    with pytest.warns(RuntimeWarning, match="beyond the last"):
        v = avg(0.99, 1.0)
    assert v[0] == avg.interval_value(1, 1.0)[0]


def test_default_interval_count_covers_scale(q):
    ts, op, X, cert = certified_alternating(q)
    avg = build_averaged_field_quasiperiodic(X, op, 2, 0.0, cert.gamma)
    last = ts.segments[0].family[-1]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        avg(last, 1.0)


def test_cache_is_safe_under_threads():
    _, op, X, cert = certified_alternating(2.0)
    avg = build_averaged_field_quasiperiodic(X, op, 2, 0.0, cert.gamma)
    xs = np.linspace(-2, 2, 41)
    serial = [avg(0.5, x)[0] for x in xs]
    with ThreadPoolExecutor(8) as pool:
        threaded = list(pool.map(lambda x: avg(0.5, x)[0], np.tile(xs, 5)))
    assert threaded == serial * 5


# -- constants ------------------------------------------------------------------


def test_error_bound_constant_examples():
    assert error_bound_constant(1, 1, 1, 1) == pytest.approx(4 * math.e)
    assert error_bound_constant(2, 1, 1, 0.75) == pytest.approx(2 * 2 * 1.75 * math.e)
    tiny = error_bound_constant(1, 1, 1, 1e-12)
    assert tiny == pytest.approx(2 * math.e, rel=1e-11)


def test_error_bound_constant_rejects_nonpositive():
    for args in ((0, 1, 1, 1), (1, -1, 1, 1), (1, 1, 0, 1), (1, 1, 1, 0)):
        with pytest.raises(NonPositiveParameter):
            error_bound_constant(*args)


def test_interval_length_bound_examples():
    _, op2 = geometric_shift(2.0)
    _, op3 = geometric_shift(3.0)
    assert interval_length_bound(op2, 2, 0.0, 10) == 0.75
    assert interval_length_bound(op3, 2, 0.0, 10) == pytest.approx(8 / 9, abs=1e-16)
    assert interval_length_bound(ZOP, 3, 0.0, 5) == 3.0
    with pytest.raises(ValueError):
        interval_length_bound(ZOP, 3, 0.0, 0)


def test_estimate_constants_alternating():
    ts, op, X, _ = certified_alternating(2.0)
    est = estimate_constants(X, ts.segments[0].family[:10], [-2.0], [2.0], seed=4)
    assert est.bound == 2.0
    assert est.lipschitz == pytest.approx(1.0, rel=1e-12)
    assert est.sample_count == 10 * 258
    again = estimate_constants(X, ts.segments[0].family[:10], [-2.0], [2.0], seed=4)
    assert again == est


def test_vector_field_rejects_nonpositive_constants():
    with pytest.raises(NonPositiveParameter):
        VectorField(lambda t, x: x, bound=0.0)
