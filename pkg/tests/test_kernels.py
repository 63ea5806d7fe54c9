import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from photonic_gan import _jit
from photonic_gan.ir import tconv_output_size
from photonic_gan.kernels import correlate2d, gather_tconv, group_ready, mvm_timing, queue_timing
from photonic_gan.sparse import axis_tables


def both(fn):
    before = _jit.use_numba()
    try:
        _jit.use_numba(True)
        a = fn()
        _jit.use_numba(False)
        b = fn()
    finally:
        _jit.use_numba(before)
    return a, b


def test_env_flag_selects_backend():
    assert _jit.backend_name() in ("numba", "numpy")
    before = _jit.use_numba()
    _jit.use_numba(False)
    assert _jit.backend_name() == "numpy"
    _jit.use_numba(before)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 3))
def test_correlate(seed, k, s):
    rng = np.random.default_rng(seed)
    xp = rng.integers(-9, 9, size=(2, 3, 8, 8))
    w = rng.integers(-9, 9, size=(2, 3, k, k))
    o = (8 - k) // s + 1
    (a, ma), (b, mb) = both(lambda: correlate2d(xp, w, s, o, o))
    np.testing.assert_array_equal(a, b)
    assert ma == mb == 2 * o * o * k * k * 3 * 2


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 4), st.integers(1, 3), st.data())
def test_gather(seed, i, k, s, data):
    p = data.draw(st.integers(0, k - 1))
    if tconv_output_size(i, k, s, p) < 1:
        return
    rng = np.random.default_rng(seed)
    x = rng.integers(-9, 9, size=(1, 2, i, i))
    wf = rng.integers(-9, 9, size=(2, 3, k, k))
    ax = axis_tables(i, k, s, p)
    (a, ma), (b, mb) = both(lambda: gather_tconv(x, wf, k, s, p, ax, ax))
    np.testing.assert_array_equal(a, b)
    assert ma == mb


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(0, 40), st.booleans())
def test_mvm_timing(seed, units, n, pipelined):
    d1 = np.random.default_rng(seed).choice([0.36, 20.36], size=n)
    (a1, a2), (b1, b2) = both(lambda: mvm_timing(units, 1.5, d1, 0.8958, pipelined))
    np.testing.assert_allclose(a1, b1, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(a2, b2, rtol=1e-12, atol=1e-12)
    assert np.all(a2 >= a1 + d1 - 1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(0, 60))
def test_queue_timing(seed, units, n):
    rng = np.random.default_rng(seed)
    ready = rng.uniform(0, 10, n)
    unit = rng.integers(0, units, n)
    a, b = both(lambda: queue_timing(ready, unit, units, 0.3, 1.0))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    assert np.all(a >= np.maximum(ready, 1.0) - 1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(0, 50))
def test_group_ready(seed, groups, n):
    rng = np.random.default_rng(seed)
    group = rng.integers(0, groups, n)
    end = rng.integers(0, 5, n).astype(float)  # ties on purpose
    (ra, la), (rb, lb) = both(lambda: group_ready(group, end, groups))
    np.testing.assert_array_equal(la, lb)
    np.testing.assert_array_equal(ra[la >= 0], rb[lb >= 0])
    for g in range(groups):
        idx = np.flatnonzero(group == g)
        if idx.size:
            assert la[g] == idx[end[idx] == end[idx].max()][-1]
        else:
            assert la[g] == -1
