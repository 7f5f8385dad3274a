import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from glmturbo.messages import VAR_MAX, VAR_MIN, ContractError, GaussianBelief, combine, extrinsic


def gb(m, v):
    return GaussianBelief(np.atleast_1d(np.asarray(m, float)), np.atleast_1d(np.asarray(v, float)))


def test_extrinsic_worked_example():
    out = extrinsic(gb(1.0, 1.0), gb(0.0, 2.0))
    assert out.mean[0] == pytest.approx(2.0, rel=1e-15)
    assert out.variance[0] == pytest.approx(2.0, rel=1e-15)


def test_extrinsic_flat_prior_is_identity():
    out = extrinsic(gb(0.7, 0.3), gb(123.0, VAR_MAX))
    assert out.mean[0] == pytest.approx(0.7, rel=1e-9)
    assert out.variance[0] == pytest.approx(0.3, rel=1e-11)


def test_extrinsic_fallback_on_negative_precision():
    out = extrinsic(gb(0.5, 2.0), gb(0.0, 1.0))
    assert out.mean[0] == 0.5
    assert out.variance[0] == VAR_MAX


def test_extrinsic_fallback_is_componentwise():
    post = gb([0.5, 1.0], [2.0, 1.0])
    prior = gb([0.0, 0.0], [1.0, 2.0])
    out = extrinsic(post, prior)
    np.testing.assert_allclose(out.mean, [0.5, 2.0])
    np.testing.assert_allclose(out.variance, [VAR_MAX, 2.0])


def test_combine_examples():
    out = combine(gb(0.0, 1.0), gb(0.0, 1.0))
    assert (out.mean[0], out.variance[0]) == (0.0, 0.5)
    out = combine(gb(1.0, 1.0), gb(-5.0, VAR_MAX))
    assert out.mean[0] == pytest.approx(1.0, rel=1e-10)
    assert out.variance[0] == pytest.approx(1.0, rel=1e-10)
    out = combine(gb(2.0, 1.0), gb(0.0, 1.0))
    assert (out.mean[0], out.variance[0]) == (1.0, 0.5)


def test_length_mismatch_raises():
    with pytest.raises(ContractError):
        extrinsic(gb([0.0, 1.0], [1.0, 1.0]), gb(0.0, 1.0))
    with pytest.raises(ContractError):
        combine(gb([0.0, 1.0], [1.0, 1.0]), gb(0.0, 1.0))


@pytest.mark.parametrize("mean,var", [(np.nan, 1.0), (np.inf, 1.0), (0.0, np.nan), (0.0, np.inf)])
def test_non_finite_input_raises(mean, var):
    with pytest.raises(ContractError):
        gb(mean, var)


def test_construction_clamps_and_broadcasts():
    b = GaussianBelief(np.zeros(3), 0.0)
    assert b.variance.shape == (3,)
    assert np.all(b.variance == VAR_MIN)
    assert np.all(GaussianBelief(np.zeros(2), 1e300).variance == VAR_MAX)
    assert len(b) == 3


def test_mismatched_shapes_raise():
    with pytest.raises(ContractError):
        GaussianBelief(np.zeros(3), np.ones(2))


finite_means = st.floats(-1e6, 1e6, allow_nan=False)
log_vars = st.floats(-10.0, 10.0)


@settings(max_examples=300, deadline=None)
@given(mp=finite_means, mq=finite_means, lvp=log_vars, lvq=log_vars)
def test_round_trip_combine_after_extrinsic(mp, mq, lvp, lvq):
    vp, vq = 10.0 ** lvp, 10.0 ** lvq
    prec = 1.0 / vp - 1.0 / vq
    assume(prec > 0)
    assume(VAR_MIN <= 1.0 / prec <= VAR_MAX)
    post, prior = gb(mp, vp), gb(mq, vq)
    back = combine(extrinsic(post, prior), prior)
    assert abs(back.variance[0] - vp) <= 1e-12 * vp * 4
    # mean error is measured against the largest term of the algebra
    scale = max(abs(mp), vp * abs(mq) / vq, 1e-300)
    assert abs(back.mean[0] - mp) <= 1e-12 * scale * 4


@settings(max_examples=300, deadline=None)
@given(ma=finite_means, mb=finite_means, la=log_vars, lb=log_vars)
def test_combine_commutes(ma, mb, la, lb):
    a, b = gb(ma, 10.0 ** la), gb(mb, 10.0 ** lb)
    ab, ba = combine(a, b), combine(b, a)
    assert ab.mean[0] == ba.mean[0]
    assert ab.variance[0] == ba.variance[0]


@settings(max_examples=300, deadline=None)
@given(ms=st.lists(finite_means, min_size=3, max_size=3),
       ls=st.lists(st.floats(-5.0, 5.0), min_size=3, max_size=3))
def test_combine_associative(ms, ls):
    a, b, c = (gb(m, 10.0 ** l) for m, l in zip(ms, ls))
    left = combine(combine(a, b), c)
    right = combine(a, combine(b, c))
    assert left.variance[0] == pytest.approx(right.variance[0], rel=1e-12)
    scale = max(abs(m) for m in ms) + 1e-300
    assert abs(left.mean[0] - right.mean[0]) <= 1e-12 * scale * 4


magnitudes = st.floats(-10.0, 10.0).map(lambda e: 10.0 ** e)
signed = st.tuples(magnitudes, st.sampled_from([-1.0, 1.0])).map(lambda t: t[0] * t[1])


@settings(max_examples=500, deadline=None)
@given(m1=signed, m2=signed, v1=magnitudes, v2=magnitudes)
def test_outputs_always_valid(m1, m2, v1, v2):
    a, b = gb(m1, v1), gb(m2, v2)
    for out in (extrinsic(a, b), extrinsic(b, a), combine(a, b)):
        assert np.all(np.isfinite(out.mean))
        assert np.all((out.variance >= VAR_MIN) & (out.variance <= VAR_MAX))
