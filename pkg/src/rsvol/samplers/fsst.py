"""MCMC for the Fernandez-Steel families FS-SN and FS-ST.

The volatility shock loads directly on the standardized return shock
``eps_t = y_t exp(-h_t / 2)``, so no auxiliary mixing variables are needed.
``gamma`` and ``nu`` are updated by random-walk Metropolis on ``log gamma`` and
``log(nu - 2)``; step sizes adapt toward 30% acceptance during burn-in only.
"""

from __future__ import annotations

import math

import numpy as np

from ..innovations import Family, fs_standardized_logpdf
from ..model import Dataset, ModelSpec, PriorSpec
from .common import (
    BaseSampler,
    ChainConfig,
    ChainState,
    PosteriorDraws,
    _beta_pm1_logkernel,
    initial_state,
    newton_max_1d,
    run_sampler,
    tn_draw_scalar,
    tn_logpdf_scalar,
)

__all__ = ["FSSampler", "run_chain_fsst"]

_TARGET_ACC = 0.3


class FSSampler(BaseSampler):
    """Gibbs/MH sampler for FS-SN and FS-ST.

    Step order per iteration: mu, phi, rho, sigma_eta2, xi, sigma_u2, gamma,
    nu, h.
    """

    def __init__(self, model: ModelSpec, data: Dataset, prior: PriorSpec, state: ChainState,
                 step_gamma: float = 0.1, step_nu: float = 0.1):
        if not model.family.is_fs:
            raise ValueError(f"{model.family.value} is not a Fernandez-Steel family")
        super().__init__(model, data, prior, state)
        steps = ["mu", "phi", "rho", "sigma_eta2"]
        if model.use_rv:
            steps += ["xi", "sigma_u2"]
        steps.append("gamma")
        if model.family is Family.FS_SKEW_T:
            steps.append("nu")
        steps.append("h")
        self.steps = tuple(steps)
        self.step_sizes = {"gamma": float(step_gamma), "nu": float(step_nu)}
        self._last_acc = {"gamma": 0.0, "nu": 0.0}

    # -- family hooks ------------------------------------------------------

    def _nu(self, nu=None):
        if self.family is Family.FS_SKEW_NORMAL:
            return None
        return self.state.nu if nu is None else nu

    def lev_logp(self, w, idx):
        return w, fs_standardized_logpdf(w, self.state.gamma, self._nu())

    # -- rho ---------------------------------------------------------------

    def _stats(self):
        s = self.state
        e = self.resid()
        w = self.w()[:-1]
        return {"See": float(e @ e), "Sew": float(e @ w), "Sww": float(w @ w), "d1sq": float((s.h[0] - s.mu) ** 2)}

    def rho_log_target(self, rho: float, st=None) -> float:
        if not abs(rho) < 1.0:
            return -math.inf
        s = self.state
        st = self._stats() if st is None else st
        sig2 = s.sigma_eta2
        sig = math.sqrt(sig2)
        kap = 1.0 - rho * rho
        quad = st["See"] - 2.0 * rho * sig * st["Sew"] + rho * rho * sig2 * st["Sww"]
        return (-0.5 * (self.n - 1) * math.log(kap) - quad / (2.0 * kap * sig2)
                + _beta_pm1_logkernel(rho, self.prior.a_rho, self.prior.b_rho))

    def rho_proposal(self, st=None):
        st = self._stats() if st is None else st
        mode, negc, ok = newton_max_1d(lambda r: self.rho_log_target(r, st), 0.0, -1.0, 1.0)
        if not ok:
            self._fallback("rho_newton")
        return mode, 1.0 / np.sqrt(negc)

    def sample_rho(self, rng: np.random.Generator) -> None:
        s = self.state
        st = self._stats()
        m, sd = self.rho_proposal(st)
        cand = tn_draw_scalar(rng, m, sd, -1.0, 1.0)
        log_a = (self.rho_log_target(cand, st) - self.rho_log_target(s.rho, st)
                 + tn_logpdf_scalar(s.rho, m, sd, -1.0, 1.0) - tn_logpdf_scalar(cand, m, sd, -1.0, 1.0))
        ok = bool(np.log(rng.random()) < log_a)
        if ok:
            s.rho = cand
        self._record("rho", ok)

    # -- sigma_eta2 ----------------------------------------------------------

    def sigma_eta2_log_target(self, sig2: float, st=None) -> float:
        """Log full conditional of ``sigma_eta2`` (density w.r.t. ``sigma_eta2``)."""
        if not sig2 > 0.0:
            return -math.inf
        s = self.state
        p = self.prior
        st = self._stats() if st is None else st
        kap = 1.0 - s.rho**2
        scale = (1.0 - s.phi**2) * st["d1sq"] + p.S_eta + st["See"] / kap
        return (-(0.5 * (p.n_eta + self.n) + 1.0) * math.log(sig2) - scale / (2.0 * sig2)
                + s.rho * st["Sew"] / (kap * math.sqrt(sig2)))

    def sigma_eta2_proposal(self, st=None):
        """Mode and sd of the normal proposal on ``log sigma_eta2``."""
        st = self._stats() if st is None else st
        f = lambda tau: self.sigma_eta2_log_target(math.exp(tau), st) + tau
        x0 = math.log(max(st["See"] / max(self.n - 1, 1), 1e-6))
        mode, negc, ok = newton_max_1d(f, x0, -40.0, 40.0)
        if not ok:
            self._fallback("sigma_eta2_newton")
        return mode, 1.0 / math.sqrt(negc)

    def sample_sigma_eta2(self, rng: np.random.Generator) -> None:
        s = self.state
        st = self._stats()
        m, sd = self.sigma_eta2_proposal(st)
        cur = math.log(s.sigma_eta2)
        cand = m + sd * rng.standard_normal()
        log_a = (self.sigma_eta2_log_target(math.exp(cand), st) + cand
                 - self.sigma_eta2_log_target(s.sigma_eta2, st) - cur
                 + 0.5 * ((cand - m) ** 2 - (cur - m) ** 2) / sd**2)
        ok = bool(math.log(rng.random()) < log_a)
        if ok:
            s.sigma_eta2 = math.exp(cand)
        self._record("sigma_eta2", ok)

    # -- gamma and nu ----------------------------------------------------------

    def gamma_log_target(self, gamma: float, w=None) -> float:
        """Log conditional of ``gamma`` (density w.r.t. ``gamma``, no Jacobian)."""
        if not gamma > 0.0:
            return -np.inf
        p = self.prior
        w = self.w() if w is None else w
        return float(np.sum(fs_standardized_logpdf(w, gamma, self._nu()))
                     + (p.gamma_shape - 1.0) * np.log(gamma) - p.gamma_rate * gamma)

    def nu_log_target(self, nu: float, w=None) -> float:
        """Log conditional of ``nu`` (density w.r.t. ``nu``, no Jacobian)."""
        if not nu > 2.0:
            return -np.inf
        p = self.prior
        w = self.w() if w is None else w
        return float(np.sum(fs_standardized_logpdf(w, self.state.gamma, nu))
                     + (p.nu_shape - 1.0) * np.log(nu) - p.nu_rate * nu)

    def sample_gamma(self, rng: np.random.Generator) -> None:
        s = self.state
        w = self.w()
        cur = np.log(s.gamma)
        cand = cur + self.step_sizes["gamma"] * rng.standard_normal()
        log_a = (self.gamma_log_target(np.exp(cand), w) + cand) - (self.gamma_log_target(s.gamma, w) + cur)
        ok = bool(np.log(rng.random()) < log_a)
        if ok:
            s.gamma = float(np.exp(cand))
        self._last_acc["gamma"] = min(1.0, float(np.exp(min(log_a, 0.0))))
        self._record("gamma", ok)

    def sample_nu(self, rng: np.random.Generator) -> None:
        s = self.state
        w = self.w()
        cur = np.log(s.nu - 2.0)
        cand = cur + self.step_sizes["nu"] * rng.standard_normal()
        log_a = (self.nu_log_target(2.0 + np.exp(cand), w) + cand) - (self.nu_log_target(s.nu, w) + cur)
        ok = bool(np.log(rng.random()) < log_a)
        if ok:
            s.nu = float(2.0 + np.exp(cand))
        self._last_acc["nu"] = min(1.0, float(np.exp(min(log_a, 0.0))))
        self._record("nu", ok)

    def adapt(self, it: int) -> None:
        # Robbins-Monro on log step size; frozen once burn-in ends
        rate = 1.0 / (it + 1.0) ** 0.6
        for name in ("gamma", "nu"):
            if name in self.steps:
                self.step_sizes[name] *= float(np.exp(rate * (self._last_acc[name] - _TARGET_ACC)))


def run_chain_fsst(
    data: Dataset,
    prior: PriorSpec | None = None,
    config: ChainConfig | None = None,
    model: ModelSpec | None = None,
    init: dict | ChainState | None = None,
    rng: np.random.Generator | None = None,
) -> PosteriorDraws:
    """Run the FS sampler (FS-ST unless ``model`` says otherwise)."""
    prior = PriorSpec() if prior is None else prior
    config = ChainConfig() if config is None else config
    model = ModelSpec(Family.FS_SKEW_T, use_rv=data.x is not None) if model is None else model
    state = init.copy() if isinstance(init, ChainState) else initial_state(model, data, init)
    sampler = FSSampler(model, data, prior, state)
    out = run_sampler(sampler, config, rng)
    out.diagnostics["step_sizes"] = dict(sampler.step_sizes)
    return out
