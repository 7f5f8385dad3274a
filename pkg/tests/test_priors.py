import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glmturbo import oracles
from glmturbo.messages import ContractError
from glmturbo.priors import BernoulliGaussianPrior, GaussianPrior, denoise, denoiser_divergence


def arr(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def test_zero_input_gives_zero_mean():
    for s2 in (1e-4, 0.5, 30.0):
        x_hat, tau = denoise(BernoulliGaussianPrior(0.1, 10.0), arr(0.0), arr(s2))
        assert x_hat[0] == 0.0
        assert tau[0] > 0


def test_rho_one_is_gaussian_product():
    r, s2, v0 = arr([-1.5, 0.0, 2.5]), arr([0.2, 1.0, 4.0]), 3.0
    x_hat, tau = denoise(BernoulliGaussianPrior(1.0, v0), r, s2)
    np.testing.assert_allclose(x_hat, r * v0 / (v0 + s2), rtol=1e-15)
    np.testing.assert_allclose(tau, v0 * s2 / (v0 + s2), rtol=1e-15)
    np.testing.assert_allclose(denoiser_divergence(BernoulliGaussianPrior(1.0, v0), r, s2),
                               v0 / (v0 + s2), rtol=1e-14)


def test_worked_example_against_quadrature():
    x_hat, tau = denoise(BernoulliGaussianPrior(0.1, 10.0), arr(2.0), arr(0.5))
    qm, qv = oracles.bg_moments_quad(2.0, 0.5, 0.1, 10.0)
    assert x_hat[0] == pytest.approx(qm, abs=1e-10)
    assert tau[0] == pytest.approx(qv, abs=1e-10)


def test_random_draws_against_quadrature():
    rng = np.random.default_rng(21)
    for _ in range(200):
        rho = rng.uniform(0.01, 1.0)
        v0 = 10.0 ** rng.uniform(-3, 3)
        s2 = 10.0 ** rng.uniform(-4, 4)
        r = np.sqrt(v0 + s2) * 2.0 * rng.standard_normal()
        x_hat, tau = denoise(BernoulliGaussianPrior(rho, v0), arr(r), arr(s2))
        qm, qv = oracles.bg_moments_quad(r, s2, rho, v0)
        assert abs(x_hat[0] - qm) <= 1e-10
        assert abs(tau[0] - qv) <= 1e-10


def test_default_slab_gives_unit_energy():
    p = BernoulliGaussianPrior(0.1)
    assert p.slab_var == pytest.approx(10.0)
    assert p.var == pytest.approx(1.0)
    assert p.mean == 0.0


def test_divergence_central_difference():
    prior = BernoulliGaussianPrior(0.1, 10.0)
    rng = np.random.default_rng(5)
    for _ in range(100):
        s2 = 10.0 ** rng.uniform(-2, 2)
        r = 4.0 * np.sqrt(s2) * rng.standard_normal()
        h = 1e-6 * max(1.0, abs(r))
        f = lambda x: denoise(prior, arr(x), arr(s2))[0][0]
        fd = (f(r + h) - f(r - h)) / (2 * h)
        div = denoiser_divergence(prior, arr(r), arr(s2))[0]
        assert div == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_divergence_at_zero_equals_tau_over_sigma():
    prior = BernoulliGaussianPrior(0.1, 10.0)
    s2 = 0.7
    qm, qv = oracles.bg_moments_quad(0.0, s2, 0.1, 10.0)
    div = denoiser_divergence(prior, arr(0.0), arr(s2))[0]
    assert div == pytest.approx(qv / s2, rel=1e-10)


def test_stein_identity_five_point():
    rng = np.random.default_rng(8)
    for _ in range(100):
        prior = BernoulliGaussianPrior(rng.uniform(0.02, 1.0), 10.0 ** rng.uniform(-2, 2))
        s2 = 10.0 ** rng.uniform(-3, 3)
        r = arr(np.sqrt(prior.slab_var + s2) * rng.standard_normal())
        fd = oracles.fd_derivative(lambda x: denoise(prior, x, np.full_like(x, s2))[0],
                                   r, 1e-3 * np.sqrt(s2))
        div = denoiser_divergence(prior, r, arr(s2))
        assert div[0] == pytest.approx(fd[0], rel=1e-6, abs=1e-10)


def test_gaussian_prior():
    p = GaussianPrior(1.0, 2.0)
    x_hat, tau = denoise(p, arr([0.0, 3.0]), arr([2.0, 2.0]))
    np.testing.assert_allclose(x_hat, [0.5, 2.0])
    np.testing.assert_allclose(tau, [1.0, 1.0])
    with pytest.raises(ContractError):
        GaussianPrior(0.0, 0.0)


@pytest.mark.parametrize("rho,slab", [(0.0, None), (1.5, None), (0.1, -1.0)])
def test_invalid_prior(rho, slab):
    with pytest.raises(ContractError):
        BernoulliGaussianPrior(rho, slab)


@pytest.mark.parametrize("r,s2", [(np.nan, 1.0), (0.0, np.inf), (0.0, 0.0), (0.0, -1.0)])
def test_invalid_inputs(r, s2):
    with pytest.raises(ContractError):
        denoise(BernoulliGaussianPrior(0.1), arr(r), arr(s2))


def test_large_input_does_not_overflow():
    x_hat, tau = denoise(BernoulliGaussianPrior(0.1, 10.0), arr([1e6, -1e6]), arr([1e-10, 1e-10]))
    assert np.all(np.isfinite(x_hat)) and np.all(np.isfinite(tau))
    np.testing.assert_allclose(x_hat, [1e6, -1e6], rtol=1e-9)


@settings(max_examples=300, deadline=None)
@given(rho=st.floats(0.001, 1.0), lv0=st.floats(-3, 3), ls=st.floats(-4, 4), z=st.floats(-50, 50))
def test_symmetry_and_variance_bounds(rho, lv0, ls, z):
    v0, s2 = 10.0 ** lv0, 10.0 ** ls
    prior = BernoulliGaussianPrior(rho, v0)
    r = z * np.sqrt(s2)
    m_pos, t_pos = denoise(prior, arr(r), arr(s2))
    m_neg, t_neg = denoise(prior, arr(-r), arr(s2))
    assert m_neg[0] == -m_pos[0]
    assert t_neg[0] == t_pos[0]
    assert t_pos[0] >= 0
    assert t_pos[0] < s2 + v0
