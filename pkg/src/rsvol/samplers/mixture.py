"""MCMC for the normal-mixture families: N, T, AZ-SN, AZ-ST and GH-ST.

Every mixture shock is written ``eps_t = m_t + s_t z_t`` with ``z_t`` standard
normal and ``(m_t, s_t)`` functions of the auxiliaries ``lam_t`` and ``z0_t``.
The volatility shock loads on ``z_t``, so after conditioning on the
auxiliaries the model is a Gaussian SV model in ``z``.  Shape parameters are
updated with mode-centred independence proposals whose targets are evaluated
from O(1) sufficient statistics; ``nu`` additionally gets a random-walk move
on ``log(nu - floor)`` so the chain cannot stall in the far right tail.
"""

from __future__ import annotations

import math

import numpy as np

from ..innovations import C_HALF_NORMAL, Family, az_k, sigma_lambda2
from ..model import Dataset, ModelSpec, PriorSpec, mixture_mean_scale
from .common import (
    BaseSampler,
    ChainConfig,
    ChainState,
    PosteriorDraws,
    _beta_pm1_logkernel,
    _inv_gamma_logpdf,
    _norm_logpdf,
    initial_state,
    newton_max_1d,
    newton_max_2d,
    run_sampler,
    tn_draw_positive,
    tn_draw_scalar,
    tn_logpdf,
    tn_logpdf_scalar,
)

__all__ = ["MixtureSampler", "run_chain_azst", "run_chain_mixture"]

_C = C_HALF_NORMAL
_LOG2 = math.log(2.0)
_MIXTURE = (Family.NORMAL, Family.STUDENT_T, Family.AZ_SKEW_NORMAL, Family.AZ_SKEW_T, Family.GH_SKEW_T)


class MixtureSampler(BaseSampler):
    """Gibbs/MH sampler for the mixture families.

    Step order per iteration: mu, phi, (rho, sigma_eta2), delta or beta, xi,
    sigma_u2, nu, z0, h, lambda.  Steps that do not apply to the family are
    skipped.
    """

    def __init__(self, model: ModelSpec, data: Dataset, prior: PriorSpec, state: ChainState):
        if model.family not in _MIXTURE:
            raise ValueError(f"{model.family.value} is not a mixture family")
        super().__init__(model, data, prior, state)
        fam = model.family
        steps = ["mu", "phi", "rho_sigma"]
        if fam.has_delta:
            steps.append("delta")
        if fam.has_beta:
            steps.append("beta")
        if model.use_rv:
            steps += ["xi", "sigma_u2"]
        if fam.has_nu:
            steps.append("nu")
        if fam.has_z0:
            steps.append("z0")
        steps.append("h")
        if fam.has_lambda:
            steps.append("lambda")
        self.steps = tuple(steps)
        self._ms_cache = None
        self._has_nu = fam.has_nu
        self._has_delta = fam.has_delta
        self._has_lambda = fam.has_lambda
        self._is_gh = fam is Family.GH_SKEW_T
        self._nu_floor = fam.nu_floor
        self.nu_rw_step = 0.3

    # -- family hooks ------------------------------------------------------

    def mean_scale(self):
        if self._ms_cache is not None:
            return self._ms_cache
        s = self.state
        return mixture_mean_scale(self.family, self.n, nu=s.nu, beta=s.beta, delta=s.delta, lam=s.lam, z0=s.z0)

    def sample_h(self, rng: np.random.Generator) -> None:
        # m_t and s_t do not depend on h, so compute them once per sweep
        self._ms_cache = None
        self._ms_cache = self.mean_scale()
        try:
            super().sample_h(rng)
        finally:
            self._ms_cache = None

    def lev_logp(self, w, idx):
        m, sc = self.mean_scale()
        z = (w - m[idx]) / sc[idx]
        return z, -0.5 * z * z

    def _kinv(self) -> np.ndarray:
        k = np.full(self.n, 1.0 / self.kappa)
        k[-1] = 1.0
        return k

    # -- (rho, sigma_eta2) ---------------------------------------------------

    def _rs_stats(self):
        s = self.state
        e = self.resid()
        v = self.leverage()[:-1]
        return {
            "See": float(e @ e),
            "Sev": float(e @ v),
            "Svv": float(v @ v),
            "d1sq": float((s.h[0] - s.mu) ** 2),
        }

    def _rs_log_target_nat(self, rho, sig2, kap, st) -> float:
        # conditional log density of (sigma_eta2, rho) with kap = 1 - rho^2
        s = self.state
        p = self.prior
        n = self.n
        sig = math.sqrt(sig2)
        log_sig2 = math.log(sig2)
        quad = st["See"] - 2.0 * rho * sig * st["Sev"] + rho * rho * sig2 * st["Svv"]
        return (
            -0.5 * (n - 1) * math.log(kap)
            - (0.5 * n + p.n_eta / 2.0 + 1.0) * log_sig2
            - ((1.0 - s.phi**2) * st["d1sq"] + p.S_eta) / (2.0 * sig2)
            - quad / (2.0 * kap * sig2)
            + _beta_pm1_logkernel(rho, p.a_rho, p.b_rho)
        )

    def rho_sigma_log_target(self, rho: float, sig2: float, st=None) -> float:
        """Conditional log density of ``(rho, sigma_eta2)`` (natural coordinates)."""
        if not (abs(rho) < 1.0 and sig2 > 0.0):
            return -np.inf
        st = self._rs_stats() if st is None else st
        return self._rs_log_target_nat(rho, sig2, 1.0 - rho**2, st)

    def _omega_log_target(self, om, st) -> float:
        # log target in omega = (log sigma, log((1 + rho) / (1 - rho))) incl. Jacobian
        o1, o2 = float(om[0]), float(om[1])
        if not (abs(o1) < 50.0 and abs(o2) < 60.0):
            return -math.inf
        sig2 = math.exp(2.0 * o1)
        rho = math.tanh(0.5 * o2)
        if abs(rho) >= 1.0:
            return -math.inf
        # log(1 - rho^2) = -2 log cosh(o2 / 2), evaluated stably
        a = 0.5 * abs(o2)
        log_kap = -2.0 * (a + math.log1p(math.exp(-2.0 * a)) - _LOG2)
        kap = math.exp(log_kap)
        return self._rs_log_target_nat(rho, sig2, kap, st) + 2.0 * o1 + log_kap

    def _omega_derivs(self, om, st):
        # analytic gradient and Hessian of _omega_log_target
        p = self.prior
        o1, o2 = float(om[0]), float(om[1])
        E = math.exp(-o1)
        E2 = E * E
        rho = math.tanh(0.5 * o2)
        kap = 1.0 - rho * rho
        u = 1.0 / kap
        ru = rho * u
        See, Sev, Svv = st["See"], st["Sev"], st["Svv"]
        B = 0.5 * ((1.0 - self.state.phi ** 2) * st["d1sq"] + p.S_eta)
        c1 = 2.0 - 2.0 * (0.5 * self.n + 0.5 * p.n_eta + 1.0)
        g1 = c1 + 2.0 * B * E2 + See * u * E2 - Sev * ru * E
        g2 = (0.5 * (self.n - 3) * rho + 0.5 * (p.a_rho - 1.0) * (1.0 - rho) - 0.5 * (p.b_rho - 1.0) * (1.0 + rho)
              - 0.5 * See * ru * E2 + Sev * (u - 0.5) * E - 0.5 * Svv * ru)
        h11 = -4.0 * B * E2 - 2.0 * See * u * E2 + Sev * ru * E
        h22 = (0.25 * kap * (self.n - 1.0 - p.a_rho - p.b_rho)
               - 0.5 * See * (u - 0.5) * E2 + Sev * ru * E - 0.5 * Svv * (u - 0.5))
        h12 = See * ru * E2 - Sev * (u - 0.5) * E
        return np.array([g1, g2]), np.array([[h11, h12], [h12, h22]])

    def rho_sigma_proposal(self, st=None):
        """Mean and covariance of the normal proposal on omega, or ``None`` on failure."""
        st = self._rs_stats() if st is None else st
        # start point depends on the other variables only
        rho0 = np.clip(st["Sev"] / np.sqrt(max(st["See"] * st["Svv"], 1e-300)), -0.9, 0.9)
        sig20 = max(st["See"] / max(self.n - 1, 1), 1e-4)
        x0 = np.array([0.5 * np.log(sig20), np.log1p(rho0) - np.log1p(-rho0)])
        mode, cov, ok = newton_max_2d(lambda om: self._omega_log_target(om, st), x0,
                                       derivs=lambda om: self._omega_derivs(om, st))
        if not ok:
            return None
        return mode, cov

    def sample_rho_sigma(self, rng: np.random.Generator) -> None:
        s = self.state
        st = self._rs_stats()
        prop = self.rho_sigma_proposal(st)
        cur = np.array([0.5 * np.log(s.sigma_eta2), np.log1p(s.rho) - np.log1p(-s.rho)])
        f_cur = self._omega_log_target(cur, st)
        if prop is not None:
            mean, cov = prop
            chol = np.linalg.cholesky(cov)
            cand = mean + chol @ rng.standard_normal(2)
            prec = np.linalg.inv(cov)

            def log_q(o):
                d = o - mean
                return -0.5 * d @ prec @ d

            log_a = self._omega_log_target(cand, st) - f_cur + log_q(cur) - log_q(cand)
        else:
            self._fallback("rho_sigma")
            cand = cur + 0.1 * rng.standard_normal(2)
            log_a = self._omega_log_target(cand, st) - f_cur
        ok = bool(np.log(rng.random()) < log_a)
        if ok:
            s.sigma_eta2 = float(np.exp(2.0 * cand[0]))
            s.rho = float(np.tanh(0.5 * cand[1]))
        self._record("rho_sigma", ok)

    # -- shape sufficient statistics ----------------------------------------

    def _shape_stats(self):
        s = self.state
        fam = self.family
        kinv = self._kinv()
        w = self.w()
        e = self.resid()
        out = {"kinv": float(kinv.sum())}
        if fam.has_lambda:
            out["Slog"] = float(np.sum(np.log(s.lam)))
            out["Sinv"] = float(np.sum(1.0 / s.lam))
        if fam is Family.GH_SKEW_T:
            u = 1.0 / np.sqrt(s.lam)
            v = np.sqrt(s.lam)
            wu = w * u
            out.update(
                S1=float(np.sum(kinv * wu * wu)), S2=float(np.sum(kinv * wu * u)), S3=float(np.sum(kinv * u * u)),
                S4=float(np.sum(kinv * w)), S5=float(np.sum(kinv * s.lam)),
                L1=float(e @ wu[:-1]), L2=float(e @ u[:-1]), L3=float(e @ v[:-1]),
            )
            return out
        pp = w / np.sqrt(s.lam) if fam.has_lambda else w
        bb = s.z0 - _C if fam.has_z0 else np.zeros(self.n)
        out.update(
            S_PP=float(np.sum(kinv * pp * pp)), S_PB=float(np.sum(kinv * pp * bb)), S_BB=float(np.sum(kinv * bb * bb)),
            L_P=float(e @ pp[:-1]), L_B=float(e @ bb[:-1]),
        )
        return out

    def _lam_prior_sum(self, nu, st) -> float:
        a = nu / 2.0
        return self.n * (a * math.log(a) - math.lgamma(a)) - a * st["Slog"] - a * st["Sinv"]

    def shape_log_target(self, st=None, delta=None, nu=None, beta=None) -> float:
        """Conditional log density (up to a constant) of the shape parameters."""
        s = self.state
        p = self.prior
        st = self._shape_stats() if st is None else st
        delta = s.delta if delta is None else delta
        nu = s.nu if nu is None else nu
        beta = s.beta if beta is None else beta
        n = self.n
        lev = s.rho / ((1.0 - s.rho**2) * math.sqrt(s.sigma_eta2))
        val = 0.0
        if self._has_nu:
            if not nu > self._nu_floor:
                return -math.inf
            val += self._lam_prior_sum(nu, st) + (p.nu_shape - 1.0) * math.log(nu) - p.nu_rate * nu
        if self._is_gh:
            mu_l = nu / (nu - 2.0)
            d = math.sqrt(beta**2 * 2.0 * nu * nu / ((nu - 2.0) ** 2 * (nu - 4.0)) + mu_l)
            szz = (d * d * st["S1"] + 2.0 * d * beta * mu_l * st["S2"] + beta**2 * mu_l**2 * st["S3"]
                   - 2.0 * beta * d * st["S4"] - 2.0 * beta**2 * mu_l * st["kinv"] + beta**2 * st["S5"])
            sez = d * st["L1"] + beta * mu_l * st["L2"] - beta * st["L3"]
            val += n * math.log(d) - 0.5 * szz + lev * sez - 0.5 * beta**2 / p.s2_beta
            return val
        if self._has_delta and not abs(delta) < 1.0:
            return -math.inf
        mu_l = nu / (nu - 2.0) if self._has_lambda else 1.0
        r = math.sqrt(1.0 - _C**2 * delta**2)
        q = math.sqrt(1.0 - delta**2)
        log_k = math.log(q) - math.log(r)
        sm = math.sqrt(mu_l)
        szz = (r * r * mu_l * st["S_PP"] - 2.0 * r * delta * sm * st["S_PB"] + delta**2 * st["S_BB"]) / (q * q)
        sez = (r * sm * st["L_P"] - delta * st["L_B"]) / q
        val += n * (0.5 * math.log(mu_l) - log_k) - 0.5 * szz + lev * sez
        if self._has_delta:
            val += _beta_pm1_logkernel(delta, p.a_delta, p.b_delta)
        return val

    # -- delta ---------------------------------------------------------------

    def delta_proposal(self, st=None):
        st = self._shape_stats() if st is None else st
        f = lambda d: self.shape_log_target(st, delta=d)
        mode, negc, ok = newton_max_1d(f, 0.0, -1.0, 1.0)
        if not ok:
            self._fallback("delta_newton")
        return mode, 1.0 / np.sqrt(negc)

    def delta_log_target(self, delta: float) -> float:
        return self.shape_log_target(delta=delta)

    def sample_delta(self, rng: np.random.Generator) -> None:
        s = self.state
        st = self._shape_stats()
        m, sd = self.delta_proposal(st)
        cand = tn_draw_scalar(rng, m, sd, -1.0, 1.0)
        log_a = (self.shape_log_target(st, delta=cand) - self.shape_log_target(st, delta=s.delta)
                 + tn_logpdf_scalar(s.delta, m, sd, -1.0, 1.0) - tn_logpdf_scalar(cand, m, sd, -1.0, 1.0))
        ok = bool(np.log(rng.random()) < log_a)
        if ok:
            s.delta = cand
        self._record("delta", ok)

    # -- beta (GH) -------------------------------------------------------------

    def beta_proposal(self, st=None):
        st = self._shape_stats() if st is None else st
        f = lambda b: self.shape_log_target(st, beta=b)
        mode, negc, ok = newton_max_1d(f, 0.0, -50.0, 50.0)
        if not ok:
            self._fallback("beta_newton")
        return mode, 1.0 / np.sqrt(negc)

    def beta_log_target(self, beta: float) -> float:
        return self.shape_log_target(beta=beta)

    def sample_beta(self, rng: np.random.Generator) -> None:
        s = self.state
        st = self._shape_stats()
        m, sd = self.beta_proposal(st)
        cand = float(m + sd * rng.standard_normal())
        log_a = (self.shape_log_target(st, beta=cand) - self.shape_log_target(st, beta=s.beta)
                 + _norm_logpdf(s.beta, m, sd**2) - _norm_logpdf(cand, m, sd**2))
        ok = bool(np.log(rng.random()) < log_a)
        if ok:
            s.beta = cand
        self._record("beta", ok)

    # -- nu ------------------------------------------------------------------

    def nu_proposal(self, st=None):
        """Mode and sd of the truncated-normal proposal, or ``None`` if the mode search fails."""
        st = self._shape_stats() if st is None else st
        lo = self.family.nu_floor
        f = lambda v: self.shape_log_target(st, nu=v)
        # start from the method-of-moments value implied by the mixing variables
        mean_inv = st["Sinv"] / self.n
        x0 = float(np.clip(2.0 * mean_inv / max(mean_inv - 1.0, 1e-3), lo + 1.0, lo + 100.0)) if mean_inv > 1.0 else lo + 20.0
        mode, negc, ok = newton_max_1d(f, x0, lo, np.inf)
        if not np.isfinite(f(mode)):
            return None
        if not ok:
            self._fallback("nu_newton")
        return mode, 1.0 / np.sqrt(negc)

    def nu_log_target(self, nu: float) -> float:
        return self.shape_log_target(nu=nu)

    def sample_nu(self, rng: np.random.Generator) -> None:
        s = self.state
        lo = self.family.nu_floor
        st = self._shape_stats()
        prop = self.nu_proposal(st)
        if prop is not None:
            m, sd = prop
            cand = tn_draw_scalar(rng, m, sd, lo, math.inf)
            log_a = (self.shape_log_target(st, nu=cand) - self.shape_log_target(st, nu=s.nu)
                     + tn_logpdf_scalar(s.nu, m, sd, lo, math.inf) - tn_logpdf_scalar(cand, m, sd, lo, math.inf))
        else:
            # random walk on log(nu - floor) with its Jacobian
            self._fallback("nu")
            cur_t = np.log(s.nu - lo)
            cand_t = cur_t + 0.1 * rng.standard_normal()
            cand = float(lo + np.exp(cand_t))
            log_a = (self.shape_log_target(st, nu=cand) + cand_t) - (self.shape_log_target(st, nu=s.nu) + cur_t)
        ok = bool(np.log(rng.random()) < log_a)
        if ok:
            s.nu = cand
        self._record("nu", ok)
        # the independence move can stall when nu sits in the heavy right tail
        # of its conditional; a random-walk move on log(nu - floor) follows
        cur_t = math.log(s.nu - lo)
        cand_t = cur_t + self.nu_rw_step * rng.standard_normal()
        cand = lo + math.exp(cand_t)
        log_a = (self.shape_log_target(st, nu=cand) + cand_t) - (self.shape_log_target(st, nu=s.nu) + cur_t)
        ok = bool(math.log(rng.random()) < log_a)
        if ok:
            s.nu = cand
        self._record("nu_rw", ok)

    # -- z0 ------------------------------------------------------------------

    def z0_conditional(self):
        """Mean and sd of the per-t truncated-normal full conditional of ``z0_t``."""
        s = self.state
        delta = s.delta
        r = np.sqrt(1.0 - _C**2 * delta**2)
        q = np.sqrt(1.0 - delta**2)
        a = np.sqrt(s.lam * (s.nu - 2.0) / s.nu) if self.family is Family.AZ_SKEW_T else np.ones(self.n)
        w = self.w()
        d = delta / q
        cc = (r * w / a + delta * _C) / q
        kinv = self._kinv()
        target = cc.copy()
        target[:-1] -= s.rho * self.resid() / np.sqrt(s.sigma_eta2)
        prec = 1.0 + d * d * kinv
        mean = d * kinv * target / prec
        return mean, 1.0 / np.sqrt(prec)

    def z0_log_target(self, t: int, val: float) -> float:
        m, sd = self.z0_conditional()
        return float(tn_logpdf(val, m[t], sd[t], 0.0, np.inf))

    def sample_z0(self, rng: np.random.Generator) -> None:
        m, sd = self.z0_conditional()
        self.state.z0 = tn_draw_positive(rng, m, sd)
        self._record("z0", self.n, self.n)

    # -- lambda --------------------------------------------------------------

    def _lam_pqr(self):
        s = self.state
        fam = self.family
        w = self.w()
        mu_l = s.nu / (s.nu - 2.0)
        zeros = np.zeros(self.n)
        if fam is Family.STUDENT_T:
            return w * np.sqrt(mu_l), zeros, zeros
        if fam is Family.AZ_SKEW_T:
            k = az_k(s.delta)
            r = np.sqrt(1.0 - _C**2 * s.delta**2)
            return w * np.sqrt(mu_l) / k, zeros, s.delta * (s.z0 - _C) / (r * k)
        d = np.sqrt(s.beta**2 * sigma_lambda2(s.nu) + mu_l)
        return w * d + s.beta * mu_l, np.full(self.n, s.beta), zeros

    def lambda_proposal(self):
        """Shape and scale arrays of the inverse-gamma proposal for each ``lam_t``."""
        s = self.state
        pp, _, _ = self._lam_pqr()
        kinv = self._kinv()
        a = s.nu + 1.0
        b = s.nu + pp * pp * kinv
        return np.full(self.n, a / 2.0), b / 2.0

    def _lam_log_corr(self, lam, pqr, kinv, lev):
        pp, qq, rr = pqr
        si = 1.0 / np.sqrt(lam)
        sq = np.sqrt(lam)
        out = -qq * qq * lam * kinv / 2.0 + (pp * rr * si - qq * rr * sq) * kinv
        out[:-1] += lev * (pp[:-1] * si[:-1] - qq[:-1] * sq[:-1])
        return out

    def lambda_log_target(self, t: int, val: float) -> float:
        s = self.state
        pqr = self._lam_pqr()
        kinv = self._kinv()
        lev = s.rho * self.resid() / (self.kappa * np.sqrt(s.sigma_eta2))
        lam = s.lam.copy()
        lam[t] = val
        a, b = self.lambda_proposal()
        return float(self._lam_log_corr(lam, pqr, kinv, lev)[t] + _inv_gamma_logpdf(val, a[t], b[t]))

    def sample_lambda(self, rng: np.random.Generator) -> None:
        s = self.state
        pqr = self._lam_pqr()
        kinv = self._kinv()
        lev = s.rho * self.resid() / (self.kappa * np.sqrt(s.sigma_eta2))
        a, b = self.lambda_proposal()
        cand = b / rng.gamma(a)
        log_a = self._lam_log_corr(cand, pqr, kinv, lev) - self._lam_log_corr(s.lam, pqr, kinv, lev)
        ok = np.log(rng.random(self.n)) < log_a
        s.lam = np.where(ok, cand, s.lam)
        self._record("lambda", int(ok.sum()), self.n)


def run_chain_mixture(
    model: ModelSpec,
    data: Dataset,
    prior: PriorSpec | None = None,
    config: ChainConfig | None = None,
    init: dict | ChainState | None = None,
    rng: np.random.Generator | None = None,
) -> PosteriorDraws:
    """Run the mixture-family sampler and return the retained draws.

    Parameters
    ----------
    init
        Either a full :class:`ChainState` or a mapping of starting values that
        override the data-based defaults (used for warm starts).
    """
    prior = PriorSpec() if prior is None else prior
    config = ChainConfig() if config is None else config
    state = init.copy() if isinstance(init, ChainState) else initial_state(model, data, init)
    sampler = MixtureSampler(model, data, prior, state)
    return run_sampler(sampler, config, rng)


def run_chain_azst(data: Dataset, prior: PriorSpec | None = None, config: ChainConfig | None = None, **kw) -> PosteriorDraws:
    """Sampler for RSV-AZ-ST (``use_rv`` inferred from the data)."""
    model = ModelSpec(Family.AZ_SKEW_T, use_rv=data.x is not None)
    return run_chain_mixture(model, data, prior, config, **kw)
