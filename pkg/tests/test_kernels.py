import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from oracles import neumaier
from tsavg import _kernels_py, kernels

try:
    from tsavg import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
positive = st.floats(0.0, 10.0, allow_nan=False)


def test_python_compensated_dot_matches_reference():
    rng = np.random.default_rng(1)
    v = rng.normal(size=(200, 3)) * 10.0 ** rng.integers(-8, 8, size=(200, 1))
    w = rng.uniform(0, 1, 200)
    out = _kernels_py.compensated_dot(v, w)
    for j in range(3):
        assert out[j] == neumaier((v[:, j] * w).tolist())


def test_compensated_dot_beats_naive_sum():
    v = np.array([[1.0], [1e100], [1.0], [-1e100]])
    w = np.ones(4)
    assert kernels.compensated_dot(v, w)[0] == 2.0


def test_linear_steps_recurrence():
    mu = np.array([0.5, 0.25, 0.125])
    c = np.array([0.01, -0.01, 0.01])
    out = kernels.linear_steps(mu, c, 1.0)
    x = 1.0
    expected = [x]
    for m, k in zip(mu, c):
        x = x + m * (k * x)
        expected.append(x)
    assert out.tolist() == expected


def test_first_exit():
    assert kernels.first_exit([0.0, 1.0, 3.0, 0.0], -2.0, 2.0) == 2
    assert kernels.first_exit([0.0, 1.0], -2.0, 2.0) == -1
    assert kernels.first_exit([], -2.0, 2.0) == -1


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        kernels.compensated_dot(np.ones((3, 1)), np.ones(2))
    with pytest.raises(ValueError):
        kernels.linear_steps(np.ones(3), np.ones(2), 1.0)


def test_wrappers_accept_integer_input():
    assert kernels.compensated_dot([[1], [2]], [1, 1]).tolist() == [3.0]
    assert kernels.linear_steps([1], [1], 1).tolist() == [1.0, 2.0]


@needs_compiled
@settings(max_examples=60, deadline=None)
@given(
    hnp.arrays(np.float64, st.tuples(st.integers(0, 40), st.integers(1, 3)), elements=finite),
    st.data(),
)
def test_compensated_dot_backends_identical(values, data):
    w = data.draw(hnp.arrays(np.float64, values.shape[0], elements=positive))
    a = compiled.compensated_dot(np.ascontiguousarray(values), w)
    b = _kernels_py.compensated_dot(values, w)
    assert np.asarray(a).tobytes() == b.tobytes()


@needs_compiled
@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, st.integers(0, 80), elements=positive), st.data())
def test_linear_steps_backends_identical(mu, data):
    c = data.draw(hnp.arrays(np.float64, mu.shape[0], elements=st.floats(-1, 1)))
    x0 = data.draw(finite)
    a = compiled.linear_steps(mu, c, x0)
    b = _kernels_py.linear_steps(mu, c, x0)
    assert np.asarray(a).tobytes() == b.tobytes()


@needs_compiled
@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, st.integers(0, 30), elements=finite))
def test_first_exit_backends_identical(path):
    assert compiled.first_exit(path, -1e5, 1e5) == _kernels_py.first_exit(path, -1e5, 1e5)


def test_pure_python_switch():
    env = dict(os.environ, TSAVG_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import tsavg; print(tsavg.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
