"""Acceptance checks run at their stated sizes and tolerances.

Each test carries a ``criterion(n)`` marker; the terminal summary prints one
PASS / FAIL line per criterion.
"""

import time

import numpy as np
import pytest
from conftest import record
from scipy import integrate, stats

from rsvol.backtest import BacktestConfig, run_backtest
from rsvol.evaluation import dq_test, fz0, fz0_diff, gw_conditional, gw_unconditional, mcs, qlike
from rsvol.innovations import Family, InnovationSpec, az_moments, draw_innovation, standardized_pdf
from rsvol.model import ModelParams, PriorSpec, log_joint, parse_model, simulate
from rsvol.realized import realized_kernel, realized_variance, simulate_noisy_day
from rsvol.samplers import ChainConfig, ChainState, make_sampler, run_chain
from rsvol.samplers.geweke import geweke_test

pytestmark = pytest.mark.slow

NU_GRID = (10.0, 15.0, 30.0)
SHAPE_GRID = {
    Family.GH_SKEW_T: ("beta", (-1.0, 0.0, 1.0)),
    Family.AZ_SKEW_T: ("delta", (-0.6, 0.0, 0.6)),
    Family.FS_SKEW_T: ("gamma", (0.7, 1.0, 1.4)),
}


# -- 1. distribution correctness ------------------------------------------------------


@pytest.mark.criterion(1)
@pytest.mark.parametrize("fam", list(SHAPE_GRID), ids=lambda f: f.value)
def test_distribution_correctness(fam):
    t0 = time.perf_counter()
    name, values = SHAPE_GRID[fam]
    rng = np.random.default_rng(101)
    n = 1_000_000
    worst_mass, worst_z = 0.0, 0.0
    for nu in NU_GRID:
        for val in values:
            spec = InnovationSpec(fam, nu=nu, **{name: val})
            mass = integrate.quad(lambda x: standardized_pdf(spec, x), -np.inf, np.inf, limit=200,
                                  epsabs=1e-11, epsrel=1e-11)[0]
            assert abs(mass - 1.0) < 1e-6, (nu, val, mass)
            worst_mass = max(worst_mass, abs(mass - 1.0))
            eps = draw_innovation(spec, rng, n).eps
            e2 = eps**2
            z_mean = eps.mean() / (eps.std() / np.sqrt(n))
            z_var = (e2.mean() - 1.0) / (e2.std() / np.sqrt(n))
            assert abs(z_mean) < 3.0 and abs(z_var) < 3.0, (nu, val, z_mean, z_var)
            worst_z = max(worst_z, abs(z_mean), abs(z_var))
            if fam is Family.AZ_SKEW_T:
                m3, m4 = az_moments(val, nu)
                e3, e4 = e2 * eps, e2 * e2
                z3 = (e3.mean() - m3) / (e3.std() / np.sqrt(n))
                z4 = (e4.mean() - m4) / (e4.std() / np.sqrt(n))
                assert abs(z3) < 3.0 and abs(z4) < 3.0, (nu, val, z3, z4)
                worst_z = max(worst_z, abs(z3), abs(z4))
    secs = time.perf_counter() - t0
    record(1, f"{fam.value}: max|mass-1|={worst_mass:.1e}, max|z|={worst_z:.2f}, {secs:.0f}s")
    assert secs < 120.0


# -- 2. reduction equivalences --------------------------------------------------------


@pytest.mark.criterion(2)
@pytest.mark.parametrize("spec", [InnovationSpec(Family.GH_SKEW_T, nu=8.0, beta=0.0),
                                  InnovationSpec(Family.AZ_SKEW_T, nu=8.0, delta=0.0),
                                  InnovationSpec(Family.FS_SKEW_T, nu=8.0, gamma=1.0)],
                         ids=lambda s: s.family.value)
def test_reductions_to_student_t(spec):
    eps = draw_innovation(spec, np.random.default_rng(202), 100_000).eps
    s = np.sqrt(spec.nu / (spec.nu - 2.0))
    p = stats.kstest(eps, lambda x: stats.t.cdf(x * s, spec.nu)).pvalue
    record(2, f"{spec.family.value} KS p={p:.3f}")
    assert p > 0.01


# -- 3. sampler kernels versus the joint density ------------------------------------------


def _kernel_errors(model_name: str, n_pairs: int, rng: np.random.Generator) -> dict[str, float]:
    model = parse_model(model_name)
    fam = model.family
    prior = PriorSpec(a_rho=2.0, b_rho=3.0, a_delta=2.0, b_delta=2.0)
    worst: dict[str, float] = {}

    for _ in range(n_pairs):
        shape = dict(nu=rng.uniform(6.0, 40.0))
        if fam.has_delta:
            shape["delta"] = rng.uniform(-0.8, 0.8)
        if fam.has_gamma:
            shape["gamma"] = np.exp(rng.normal(0.0, 0.3))
        p = ModelParams(rng.normal(0, 0.5), rng.uniform(0.5, 0.98), rng.uniform(-0.8, 0.5),
                        np.exp(rng.normal(-2.5, 0.5)), rng.normal(-0.2, 0.2), np.exp(rng.normal(-2.0, 0.4)),
                        InnovationSpec(fam, **shape))
        data, lat = simulate(p, 30, rng, with_rv=model.use_rv)
        st = ChainState.from_params(p, lat)
        st.h = st.h + 0.3 * rng.standard_normal(30)
        if st.lam is not None:
            st.lam = st.lam * np.exp(0.3 * rng.standard_normal(30))
        if st.z0 is not None:
            st.z0 = st.z0 * np.exp(0.3 * rng.standard_normal(30))
        sam = make_sampler(model, data, prior, st)
        s = sam.state

        def joint():
            return log_joint(s.params(fam), s.latent(), data, prior, model.use_rv)

        def check(label, setter, kernel, new, old):
            j0, k0 = joint(), kernel(old)
            setter(new)
            j1, k1 = joint(), kernel(new)
            setter(old)
            err = abs((k1 - k0) - (j1 - j0))
            worst[label] = max(worst.get(label, 0.0), err)

        def attr(a):
            return lambda v: setattr(s, a, v)

        step = lambda: 0.3 * rng.standard_normal()
        check("mu", attr("mu"), sam.mu_log_target, s.mu + step(), s.mu)
        check("phi", attr("phi"), sam.phi_log_target, np.tanh(np.arctanh(s.phi) + step()), s.phi)
        if model.use_rv:
            check("xi", attr("xi"), sam.xi_log_target, s.xi + step(), s.xi)
            check("sigma_u2", attr("sigma_u2"), sam.sigma_u2_log_target, s.sigma_u2 * np.exp(step()), s.sigma_u2)
        if fam.is_fs:
            check("rho", attr("rho"), sam.rho_log_target, np.tanh(np.arctanh(s.rho) + step()), s.rho)
            check("sigma_eta2", attr("sigma_eta2"), sam.sigma_eta2_log_target, s.sigma_eta2 * np.exp(step()),
                  s.sigma_eta2)
            check("gamma", attr("gamma"), sam.gamma_log_target, s.gamma * np.exp(step()), s.gamma)
        else:
            def set_rs(v):
                s.rho, s.sigma_eta2 = v
            check("rho_sigma", set_rs, lambda v: sam.rho_sigma_log_target(*v),
                  (np.tanh(np.arctanh(s.rho) + step()), s.sigma_eta2 * np.exp(step())), (s.rho, s.sigma_eta2))
            check("delta", attr("delta"), sam.delta_log_target, np.tanh(np.arctanh(s.delta) + step()), s.delta)
        floor = fam.nu_floor
        check("nu", attr("nu"), sam.nu_log_target, floor + (s.nu - floor) * np.exp(step()), s.nu)
        for t in (0, 1, 14, 28, 29):
            def set_h(v, t=t):
                s.h[t] = v
            check("h", set_h, lambda v, t=t: sam.h_log_target(t, v), s.h[t] + step(), s.h[t])
            if s.lam is not None:
                def set_l(v, t=t):
                    s.lam[t] = v
                check("lambda", set_l, lambda v, t=t: sam.lambda_log_target(t, v), s.lam[t] * np.exp(step()),
                      s.lam[t])
            if s.z0 is not None:
                def set_z(v, t=t):
                    s.z0[t] = v
                check("z0", set_z, lambda v, t=t: sam.z0_log_target(t, v), s.z0[t] * np.exp(step()), s.z0[t])
    return worst


@pytest.mark.criterion(3)
@pytest.mark.parametrize("name", ["RSV-AZ-ST", "SV-AZ-ST", "RSV-FS-ST", "SV-FS-ST"])
def test_kernels_match_joint(name):
    worst = _kernel_errors(name, 100, np.random.default_rng(303))
    record(3, f"{name} max err={max(worst.values()):.1e}")
    bad = {k: v for k, v in worst.items() if not v < 1e-10}
    assert not bad


# -- 4. Geweke -------------------------------------------------------------------------

GEWEKE_PRIOR = PriorSpec(m_mu=0.0, s2_mu=0.25, a_phi=20.0, b_phi=1.5, a_rho=4.0, b_rho=4.0, n_eta=10.0, S_eta=0.5,
                         m_xi=0.0, s2_xi=0.25, n_u=10.0, S_u=1.0, a_delta=2.0, b_delta=2.0, gamma_shape=4.0,
                         gamma_rate=4.0)


@pytest.mark.criterion(4)
@pytest.mark.parametrize("name,shape", [("RSV-AZ-ST", ("delta", "nu")), ("RSV-FS-ST", ("gamma", "nu"))])
def test_geweke(name, shape):
    t0 = time.perf_counter()
    res = geweke_test(parse_model(name), GEWEKE_PRIOR, n_obs=20, n_iter=50_000, rng=np.random.default_rng(3))
    secs = time.perf_counter() - t0
    checked = ("mu", "phi", "sigma_eta2") + shape
    z = {k: round(res.z(k), 2) for k in res.names}
    record(4, f"{name} z={z}, {secs:.0f}s")
    assert all(abs(z[k]) < 3.0 for k in checked), z
    assert secs < 600.0


# -- 5. simulate and recover ------------------------------------------------------------


@pytest.mark.criterion(5)
@pytest.mark.parametrize("name", ["RSV-AZ-ST", "RSV-FS-ST"])
def test_simulate_and_recover(name):
    fam = parse_model(name).family
    shape = dict(nu=15.0, delta=-0.5) if fam is Family.AZ_SKEW_T else dict(nu=15.0, gamma=0.8)
    p = ModelParams(0.0, 0.97, -0.4, 0.03, -0.2, 0.1, InnovationSpec(fam, **shape))
    truth = p.as_dict()
    t0 = time.perf_counter()
    good_reps = 0
    counts = []
    for rep in range(20):
        rng = np.random.default_rng([2024, rep])
        data, _ = simulate(p, 2000, rng)
        draws = run_chain(parse_model(name), data, config=ChainConfig(20_000, 5_000), rng=rng)
        covered = 0
        for k in draws.params:
            lo, hi = draws.interval(k, 0.95)
            covered += lo <= truth[k] <= hi
        counts.append(covered)
        good_reps += covered >= 6
    secs = time.perf_counter() - t0
    record(5, f"{name}: {good_reps}/20 reps with >=6/8 covered, per-rep {counts}, {secs / 60:.1f} min")
    assert len(draws.params) == 8
    assert good_reps >= 16
    assert secs < 1800.0


# -- 6. loss oracles --------------------------------------------------------------------


@pytest.mark.criterion(6)
def test_loss_oracles():
    assert abs(qlike(1.7, 1.7)) < 1e-10
    assert abs(qlike(2.0, 1.0) - (1.0 - np.log(2.0))) < 1e-10
    assert abs(qlike(0.5, 1.0) - (np.log(2.0) - 0.5)) < 1e-10
    base = -1.0 / -1.5 + np.log(1.5) - 1.0
    assert abs(fz0(1.0, -1.0, -1.5, 0.05) - base) < 1e-10
    assert abs(fz0(-2.0, -1.0, -1.5, 0.05) - (base + 1.0 / (0.05 * 1.5))) < 1e-10
    assert abs(fz0(-1.0, -1.0, -1.5, 0.05) - base) < 1e-10
    # published decimals carry five places (13.4054651 appears truncated as 13.40546)
    assert abs(qlike(2.0, 1.0) - 0.30685) < 1e-5 and abs(qlike(0.5, 1.0) - 0.19315) < 1e-5
    assert abs(fz0(1.0, -1.0, -1.5, 0.05) - 0.07213) < 1e-5
    assert abs(fz0(-2.0, -1.0, -1.5, 0.05) - 13.40546) < 1e-5

    rng = np.random.default_rng(606)
    n = 10_000
    y = 2.0 * rng.standard_normal(n)
    va, vb = -np.abs(rng.normal(2.0, 0.5, n)), -np.abs(rng.normal(2.5, 0.5, n))
    ea, eb = va * rng.uniform(1.05, 1.6, n), vb * rng.uniform(1.05, 1.6, n)
    for alpha in (0.01, 0.05):
        d = fz0_diff(y, va, ea, vb, eb, alpha)
        np.testing.assert_allclose(d, fz0(y, va, ea, alpha) - fz0(y, vb, eb, alpha), atol=1e-10)
        for c in (2.0, 0.5):
            assert np.array_equal(fz0_diff(c * y, c * va, c * ea, c * vb, c * eb, alpha), d)
    record(6, "oracles to 1e-10, FZ0 differences bit-identical under scaling by 2 and 0.5")


# -- 7. test sizes ------------------------------------------------------------------------


@pytest.mark.criterion(7)
def test_sizes():
    rng = np.random.default_rng(707)
    n_sims = 5000
    rej = {"gw_unconditional": 0, "gw_conditional": 0, "dq": 0}
    for _ in range(n_sims):
        d = rng.standard_normal(600)
        rej["gw_unconditional"] += gw_unconditional(d).pvalue < 0.05
        rej["gw_conditional"] += gw_conditional(d).pvalue < 0.05
        hits = (rng.random(1000) < 0.05).astype(float)
        var = -1.65 + 0.2 * rng.standard_normal(1000)
        rej["dq"] += dq_test(hits, var, 0.05).pvalue < 0.05
    sizes = {k: v / n_sims for k, v in rej.items()}
    record(7, ", ".join(f"{k}={v:.2%}" for k, v in sizes.items()) + f" over {n_sims} sims")
    assert all(0.03 <= v <= 0.07 for v in sizes.values()), sizes


# -- 8. MCS separation --------------------------------------------------------------------


@pytest.mark.criterion(8)
def test_mcs_separation():
    rng = np.random.default_rng(808)
    excluded = 0
    for _ in range(200):
        L = rng.standard_normal((3, 250))
        L[2] += 10.0
        res = mcs(L, level=0.9, n_boot=1000, block=10, rng=rng)
        excluded += not res.included[2]
    record(8, f"excluded in {excluded}/200")
    assert excluded / 200 >= 0.95


# -- 9. directional reproduction ----------------------------------------------------------


@pytest.mark.criterion(9)
def test_rsv_beats_sv_on_qlike():
    p = ModelParams(0.0, 0.97, -0.4, 0.03, -0.2, 0.1)
    window, n_fc = 250, 250
    wins = 0
    diffs = []
    for seed in range(10):
        data, _ = simulate(p, window + n_fc, np.random.default_rng([909, seed]))
        cfg = BacktestConfig(models=("RSV-N", "SV-N"), window=window, n_pred=2000,
                             chain=ChainConfig(n_iter=300, n_burn=100), n_forecasts=n_fc, seed=seed, mcs_boot=200)
        ev = run_backtest(data, cfg).tables["evaluation"].set_index("model")["mean_qlike_RV"]
        diffs.append(round(float(ev["SV-N"] - ev["RSV-N"]), 3))
        wins += ev["RSV-N"] < ev["SV-N"]
    record(9, f"RSV-N better in {wins}/10 runs, QLIKE gaps {diffs}")
    assert wins >= 8


# -- 10. realized measures ----------------------------------------------------------------


@pytest.mark.criterion(10)
def test_realized_kernel_noise_robustness():
    rng = np.random.default_rng(1010)
    wins = 0
    for _ in range(500):
        r = simulate_noisy_day(rng, m=780, iv=1.0, omega2=0.001)
        assert realized_kernel(r, 0) == realized_variance(r)
        wins += abs(realized_kernel(r, 20) - 1.0) < abs(realized_variance(r) - 1.0)
    record(10, f"|bias RK| < |bias RV| on {wins}/500 days")
    assert wins >= 450
