import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rsvol.evaluation import (
    LossSeries,
    dq_test,
    fz0,
    fz0_diff,
    gw_conditional,
    gw_unconditional,
    mcs,
    qlike,
    violations,
)

pos = st.floats(1e-3, 1e3)


# -- losses ------------------------------------------------------------------------


def test_qlike_oracles():
    assert qlike(3.0, 3.0) == 0.0
    assert qlike(2.0, 1.0) == pytest.approx(1.0 - np.log(2.0), abs=1e-12)
    assert qlike(2.0, 1.0) == pytest.approx(0.30685, abs=1e-5)
    assert qlike(0.5, 1.0) == pytest.approx(np.log(2.0) - 0.5, abs=1e-12)
    assert qlike(0.5, 1.0) == pytest.approx(0.19315, abs=1e-5)
    with pytest.raises(ValueError):
        qlike(0.0, 1.0)
    with pytest.raises(ValueError):
        qlike(1.0, -1.0)


@given(pos, pos)
@settings(max_examples=200)
def test_qlike_nonnegative(x, f):
    assert qlike(x, f) >= 0.0


def test_fz0_oracles():
    no_hit = -1.0 / -1.5 + np.log(1.5) - 1.0
    assert fz0(1.0, -1.0, -1.5, 0.05) == pytest.approx(no_hit, abs=1e-12)
    assert fz0(1.0, -1.0, -1.5, 0.05) == pytest.approx(0.07213, abs=1e-5)
    hit = -(1.0 / (0.05 * -1.5)) * 1.0 + no_hit
    assert fz0(-2.0, -1.0, -1.5, 0.05) == pytest.approx(hit, abs=1e-12)
    assert fz0(-2.0, -1.0, -1.5, 0.05) == pytest.approx(13.40546, abs=1e-5)
    assert fz0(-1.0, -1.0, -1.5, 0.05) == fz0(1.0, -1.0, -1.5, 0.05)


def test_fz0_domain():
    with pytest.raises(ValueError):
        fz0(0.0, -1.0, 0.0, 0.05)
    with pytest.raises(ValueError):
        fz0(0.0, -1.0, -1.0, 1.5)


@given(st.floats(-5, 5), st.floats(-3, -0.01), st.floats(1.0, 3.0), st.floats(-3, -0.01), st.floats(1.0, 3.0),
       st.sampled_from([0.01, 0.05]))
@settings(max_examples=200)
def test_fz0_difference_homogeneity(y, va, ka, vb, kb, alpha):
    ea, eb = ka * va, kb * vb
    d = fz0_diff(y, va, ea, vb, eb, alpha)
    assert d == pytest.approx(fz0(y, va, ea, alpha) - fz0(y, vb, eb, alpha), abs=1e-10)
    for c in (2.0, 0.5):
        assert fz0_diff(c * y, c * va, c * ea, c * vb, c * eb, alpha) == d
        plain = fz0(c * y, c * va, c * ea, alpha) - fz0(c * y, c * vb, c * eb, alpha)
        assert plain == pytest.approx(d, abs=1e-12)


def test_violations_strict():
    np.testing.assert_array_equal(violations([-2.0, -1.0, 0.0], [-1.0, -1.0, -1.0]), [1.0, 0.0, 0.0])


def test_loss_series():
    ls = LossSeries("a", "b", [1.0, 2.0], [0.5, 3.0])
    np.testing.assert_array_equal(ls.diff, [0.5, -1.0])
    with pytest.raises(ValueError):
        LossSeries("a", "b", [1.0], [1.0, 2.0])


# -- GW tests --------------------------------------------------------------------


def test_gw_unconditional_hand_value():
    r = gw_unconditional([1.0, 1.0, 1.0, -1.0])
    assert r.stat == pytest.approx(1.0, abs=1e-12)
    r0 = gw_unconditional(np.zeros(10))
    assert (r0.stat, r0.pvalue, r0.degenerate) == (0.0, 1.0, True)
    assert gw_unconditional(np.ones(5)).degenerate
    with pytest.raises(ValueError):
        gw_unconditional([1.0])


@given(arrays(np.float64, st.integers(5, 60), elements=st.floats(-10, 10)))
@settings(max_examples=100)
def test_gw_swap_symmetries(d):
    u, u2 = gw_unconditional(d), gw_unconditional(-d)
    if not u.degenerate:
        assert u2.stat == pytest.approx(-u.stat, rel=1e-12, abs=1e-12)
        assert u2.pvalue == pytest.approx(u.pvalue, rel=1e-9, abs=1e-12)
    c, c2 = gw_conditional(d), gw_conditional(-d)
    assert c.degenerate == c2.degenerate
    if not c.degenerate:
        assert c2.stat == pytest.approx(c.stat, rel=1e-6, abs=1e-9)


def test_gw_hac_option():
    d = np.random.default_rng(0).standard_normal(300)
    assert gw_unconditional(d, hac_lags=5).stat == pytest.approx(gw_unconditional(d).stat, rel=0.2)


def test_gw_conditional_degenerate_and_dof():
    assert gw_conditional(np.zeros(20)).degenerate
    d = np.random.default_rng(1).standard_normal(400) + 0.3
    r = gw_conditional(d)
    assert not r.degenerate and r.pvalue < 0.01
    assert 0.0 <= r.indicator <= 1.0
    with pytest.raises(ValueError):
        gw_conditional([1.0, 2.0])


def test_gw_sizes_quick():
    rng = np.random.default_rng(2)
    rej_u = rej_c = 0
    for _ in range(400):
        d = rng.standard_normal(300)
        rej_u += gw_unconditional(d).pvalue < 0.05
        rej_c += gw_conditional(d).pvalue < 0.05
    assert 0.02 <= rej_u / 400 <= 0.09
    assert 0.02 <= rej_c / 400 <= 0.09


# -- DQ test -----------------------------------------------------------------------


def test_dq_all_zero_hits_finite():
    var = -1.0 - 0.1 * np.random.default_rng(0).standard_normal(600)
    r = dq_test(np.zeros(600), var, 0.01)
    assert np.isfinite(r.stat) and np.isfinite(r.pvalue)
    assert r.degenerate  # lagged hit column is identically zero


def test_dq_detects_clustering():
    rng = np.random.default_rng(1)
    hits = np.repeat(rng.random(60) < 0.05, 10).astype(float)
    var = -1.0 + 0.1 * rng.standard_normal(hits.size)
    assert dq_test(hits, var, 0.05).pvalue < 0.01


def test_dq_rejects_wrong_coverage():
    rng = np.random.default_rng(3)
    hits = (rng.random(1000) < 0.15).astype(float)
    assert dq_test(hits, -np.ones(1000) + 0.01 * rng.standard_normal(1000), 0.05).pvalue < 1e-6


def test_dq_errors():
    with pytest.raises(ValueError):
        dq_test(np.zeros(5), np.zeros(5), 0.05)
    with pytest.raises(ValueError):
        dq_test(np.zeros(20), np.zeros(19), 0.05)


# -- MCS ---------------------------------------------------------------------------


def test_mcs_identical_models_survive():
    x = np.random.default_rng(0).standard_normal(200)
    res = mcs(np.stack([x, x]), n_boot=200, rng=np.random.default_rng(1))
    np.testing.assert_array_equal(res.pvalues, [1.0, 1.0])
    assert res.members(0.99) == ["m0", "m1"]


def test_mcs_separates_and_nests():
    rng = np.random.default_rng(2)
    L = rng.standard_normal((4, 250))
    L[3] += 10.0
    L[2] += 0.15
    res = mcs(L, level=0.9, n_boot=500, rng=np.random.default_rng(3), names=list("abcd"))
    assert res.pvalues[3] < 0.01 and "d" not in res.members()
    assert res.eliminated[0] == "d"
    assert set(res.members(0.75)) <= set(res.members(0.9))
    p_along = [res.pvalues[res.names.index(n)] for n in res.eliminated]
    assert all(np.diff(p_along) >= 0)
    assert res.pvalues.max() == 1.0


def test_mcs_reproducible():
    L = np.random.default_rng(4).standard_normal((3, 100))
    a = mcs(L, n_boot=200, rng=np.random.default_rng(5))
    b = mcs(L, n_boot=200, rng=np.random.default_rng(5))
    np.testing.assert_array_equal(a.pvalues, b.pvalues)


def test_mcs_errors():
    with pytest.raises(ValueError):
        mcs(np.zeros((1, 50)))
    with pytest.raises(ValueError):
        mcs(np.zeros((2, 5)), block=10)
    with pytest.raises(ValueError):
        mcs(np.zeros((2, 50)), names=["a"])
