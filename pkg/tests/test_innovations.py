import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from rsvol.innovations import (
    C_HALF_NORMAL,
    Family,
    InnovationSpec,
    az_k,
    az_moments,
    corr_eps_eta,
    draw_innovation,
    draw_standardized,
    fs_density,
    fs_m1_m2,
    fs_moments,
    fs_standardized_logpdf,
    inv_gamma_half_moment,
    mu_lambda,
    sigma_lambda2,
    standardized_pdf,
)

SPECS = [
    InnovationSpec(Family.NORMAL),
    InnovationSpec(Family.STUDENT_T, nu=7.0),
    InnovationSpec(Family.GH_SKEW_T, nu=12.0, beta=-0.8),
    InnovationSpec(Family.AZ_SKEW_NORMAL, delta=0.6),
    InnovationSpec(Family.AZ_SKEW_T, nu=9.0, delta=-0.6),
    InnovationSpec(Family.FS_SKEW_NORMAL, gamma=1.4),
    InnovationSpec(Family.FS_SKEW_T, nu=9.0, gamma=0.7),
]


def _moments(spec):
    f = lambda x: standardized_pdf(spec, x)
    m = [integrate.quad(lambda x: x**k * f(x), -np.inf, np.inf, limit=200)[0] for k in range(3)]
    return m


# -- frozen oracle values ------------------------------------------------------


def test_inv_gamma_half_moment_frozen():
    # E[lam^(1/2)] for IG(2, 2) is sqrt(2) Gamma(3/2) / Gamma(2)
    assert inv_gamma_half_moment(4.0, 1) == pytest.approx(1.2533141373155001, rel=1e-14)
    assert inv_gamma_half_moment(4.0, 1) == pytest.approx(np.sqrt(2.0) * special.gamma(1.5), rel=1e-14)


def test_inv_gamma_half_moment_matches_quadrature():
    nu = 7.0
    dist = stats.invgamma(nu / 2.0, scale=nu / 2.0)
    for m in (1, 2, 3):
        ref = integrate.quad(lambda v: v ** (m / 2.0) * dist.pdf(v), 0, np.inf)[0]
        assert inv_gamma_half_moment(nu, m) == pytest.approx(ref, rel=1e-8)
    assert inv_gamma_half_moment(nu, 2) == pytest.approx(mu_lambda(nu), rel=1e-12)


def test_mixing_moments():
    assert mu_lambda(10.0) == pytest.approx(1.25)
    assert sigma_lambda2(10.0) == pytest.approx(2 * 100 / (64 * 6))
    assert mu_lambda(np.inf) == 1.0
    with pytest.raises(ValueError):
        mu_lambda(2.0)
    with pytest.raises(ValueError):
        sigma_lambda2(4.0)


def test_fs_half_line_moments_frozen():
    assert fs_m1_m2(4.0) == pytest.approx((1.0, 2.0), rel=1e-12)
    assert fs_m1_m2(None) == pytest.approx((C_HALF_NORMAL, 1.0))


def test_az_moments_frozen():
    m3, m4 = az_moments(-0.6, 9.0)
    assert m3 == pytest.approx(-0.0783426663641017, rel=1e-12)
    assert m4 == pytest.approx(4.235047864756042, rel=1e-12)
    assert az_moments(0.0, 9.0) == pytest.approx((0.0, 3.0 * 7.0 / 5.0))
    assert az_moments(0.0) == pytest.approx((0.0, 3.0))


def test_az_moments_match_quadrature():
    for delta, nu in [(-0.6, 9.0), (0.8, 12.0), (0.3, None)]:
        fam = Family.AZ_SKEW_T if nu else Family.AZ_SKEW_NORMAL
        spec = InnovationSpec(fam, nu=nu, delta=delta)
        f = lambda x: standardized_pdf(spec, x)
        m3 = integrate.quad(lambda x: x**3 * f(x), -np.inf, np.inf, limit=200)[0]
        m4 = integrate.quad(lambda x: x**4 * f(x), -np.inf, np.inf, limit=200)[0]
        assert (m3, m4) == pytest.approx(az_moments(delta, nu), abs=2e-6)


# -- densities -----------------------------------------------------------------


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.family.value)
def test_standardized_density_moments(spec):
    m0, m1, m2 = _moments(spec)
    assert m0 == pytest.approx(1.0, abs=1e-7)
    assert m1 == pytest.approx(0.0, abs=1e-7)
    assert m2 == pytest.approx(1.0, abs=1e-6)


def test_fs_raw_density_integrates_and_matches_moments():
    gamma, nu = 0.7, 9.0
    mass = integrate.quad(lambda w: fs_density(w, gamma, nu), -np.inf, np.inf)[0]
    mean = integrate.quad(lambda w: w * fs_density(w, gamma, nu), -np.inf, np.inf)[0]
    mu, sd = fs_moments(gamma, nu)
    assert mass == pytest.approx(1.0, abs=1e-9)
    assert mean == pytest.approx(mu, abs=1e-9)
    var = integrate.quad(lambda w: (w - mu) ** 2 * fs_density(w, gamma, nu), -np.inf, np.inf)[0]
    assert var == pytest.approx(sd**2, rel=1e-8)


def test_gamma_one_fs_is_standardized_t():
    x = np.linspace(-5, 5, 41)
    nu = 6.0
    s = np.sqrt(nu / (nu - 2.0))
    ref = stats.t.logpdf(x * s, nu) + np.log(s)
    np.testing.assert_allclose(fs_standardized_logpdf(x, 1.0, nu), ref, atol=1e-12)


@given(st.floats(0.2, 5.0), st.floats(2.5, 60.0))
@settings(max_examples=30, deadline=None)
def test_fs_gamma_reflection(gamma, nu):
    # q(x | gamma) = q(-x | 1 / gamma)
    x = np.linspace(-4, 4, 17)
    np.testing.assert_allclose(fs_standardized_logpdf(x, gamma, nu),
                               fs_standardized_logpdf(-x, 1.0 / gamma, nu), atol=1e-10)


def test_reductions_to_student_t_density():
    x = np.linspace(-4, 4, 9)
    t = standardized_pdf(InnovationSpec(Family.STUDENT_T, nu=8.0), x)
    for spec in (InnovationSpec(Family.GH_SKEW_T, nu=8.0, beta=0.0),
                 InnovationSpec(Family.AZ_SKEW_T, nu=8.0, delta=0.0),
                 InnovationSpec(Family.FS_SKEW_T, nu=8.0, gamma=1.0)):
        np.testing.assert_allclose(standardized_pdf(spec, x), t, rtol=1e-7)


# -- sampling ------------------------------------------------------------------


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.family.value)
def test_draws_standardized(spec):
    rng = np.random.default_rng(11)
    eps = draw_innovation(spec, rng, 200_000).eps
    se_m = eps.std() / np.sqrt(eps.size)
    se_v = np.std(eps**2) / np.sqrt(eps.size)
    assert abs(eps.mean()) < 4 * se_m
    assert abs(eps.var() - 1.0) < 4 * se_v


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.family.value)
def test_draws_match_density(spec):
    rng = np.random.default_rng(3)
    eps = draw_innovation(spec, rng, 20_000).eps
    grid = np.linspace(-12, 12, 4001)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(grid) * (standardized_pdf(spec, grid[1:])
                                                                   + standardized_pdf(spec, grid[:-1])))])
    res = stats.kstest(eps, lambda x: np.interp(x, grid, cdf))
    assert res.pvalue > 1e-3


def test_leverage_variate_by_family():
    rng = np.random.default_rng(0)
    d = draw_standardized(Family.AZ_SKEW_T, rng, 5, nu=8.0, delta=0.5)
    np.testing.assert_array_equal(d.leverage, d.z)
    d = draw_standardized(Family.FS_SKEW_T, rng, 5, nu=8.0, gamma=0.5)
    np.testing.assert_array_equal(d.leverage, d.eps)


def test_array_parameters_broadcast():
    rng = np.random.default_rng(0)
    nu = np.array([5.0, 10.0, 50.0])
    d = draw_standardized(Family.FS_SKEW_T, rng, 3, nu=nu, gamma=np.array([0.5, 1.0, 2.0]))
    assert d.eps.shape == (3,)


def test_corr_eps_eta():
    assert corr_eps_eta(InnovationSpec(Family.NORMAL), -0.4) == -0.4
    assert corr_eps_eta(InnovationSpec(Family.FS_SKEW_T, nu=8.0, gamma=0.8), -0.4) == -0.4
    # mixtures attenuate the correlation; MC check for AZ-ST
    spec = InnovationSpec(Family.AZ_SKEW_T, nu=10.0, delta=-0.5)
    rng = np.random.default_rng(5)
    d = draw_innovation(spec, rng, 400_000)
    rho = -0.4
    eta = rho * d.z + np.sqrt(1 - rho**2) * rng.standard_normal(d.z.size)
    mc = np.corrcoef(d.eps, eta)[0, 1]
    assert mc == pytest.approx(corr_eps_eta(spec, rho), abs=6e-3)
    assert abs(corr_eps_eta(spec, rho)) < 0.4


def test_az_k_bounds():
    assert az_k(0.0) == 1.0
    assert 0 < az_k(0.9) < 1


@pytest.mark.parametrize("kwargs", [
    dict(family=Family.STUDENT_T),
    dict(family=Family.STUDENT_T, nu=2.0),
    dict(family=Family.GH_SKEW_T, nu=4.0),
    dict(family=Family.AZ_SKEW_NORMAL, delta=1.0),
    dict(family=Family.FS_SKEW_NORMAL, gamma=0.0),
])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        InnovationSpec(**kwargs)
