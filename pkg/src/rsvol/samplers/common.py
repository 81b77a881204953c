"""Chain plumbing and the sampling steps shared by every model family.

Both samplers update the latent log-volatility one coordinate at a time.
Coordinates of the same parity are conditionally independent given the
others, so each half-sweep is vectorized.  The mixture and Fernandez-Steel
samplers plug in the family-specific leverage variate ``v_t`` and the
return log-density ``log p(w_t | aux)``.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from ..errors import NumericalError
from ..innovations import C_HALF_NORMAL, Family, InnovationSpec
from ..model import Dataset, LatentState, ModelParams, ModelSpec, PriorSpec

__all__ = [
    "BaseSampler",
    "ChainConfig",
    "ChainState",
    "PosteriorDraws",
    "batch_means_se",
    "initial_state",
    "newton_max_1d",
    "newton_max_2d",
    "run_sampler",
    "tn_draw",
    "tn_draw_positive",
    "tn_logpdf",
]


@dataclass(frozen=True)
class ChainConfig:
    n_iter: int = 20000
    n_burn: int = 5000
    thin: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_iter < 1:
            raise ValueError("n_iter must be positive")
        if not 0 <= self.n_burn < self.n_iter:
            raise ValueError("need 0 <= n_burn < n_iter")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")


@dataclass
class ChainState:
    """Mutable chain state: parameters plus latent paths."""

    mu: float
    phi: float
    rho: float
    sigma_eta2: float
    xi: float
    sigma_u2: float
    h: np.ndarray
    nu: float | None = None
    beta: float = 0.0
    delta: float = 0.0
    gamma: float = 1.0
    lam: np.ndarray | None = None
    z0: np.ndarray | None = None

    def copy(self) -> "ChainState":
        out = dataclasses.replace(self)
        out.h = self.h.copy()
        out.lam = None if self.lam is None else self.lam.copy()
        out.z0 = None if self.z0 is None else self.z0.copy()
        return out

    def params(self, family: Family) -> ModelParams:
        fam = Family(family)
        shape = InnovationSpec(
            fam,
            nu=self.nu if fam.has_nu else None,
            beta=self.beta if fam.has_beta else 0.0,
            delta=self.delta if fam.has_delta else 0.0,
            gamma=self.gamma if fam.has_gamma else 1.0,
        )
        return ModelParams(self.mu, self.phi, self.rho, self.sigma_eta2, self.xi, self.sigma_u2, shape)

    def latent(self) -> LatentState:
        return LatentState(h=self.h.copy(), lam=None if self.lam is None else self.lam.copy(),
                           z0=None if self.z0 is None else self.z0.copy())

    @classmethod
    def from_params(cls, params: ModelParams, latent: LatentState) -> "ChainState":
        s = params.shape
        return cls(
            mu=params.mu, phi=params.phi, rho=params.rho, sigma_eta2=params.sigma_eta2,
            xi=params.xi, sigma_u2=params.sigma_u2, h=np.array(latent.h, dtype=float),
            nu=s.nu, beta=s.beta, delta=s.delta, gamma=s.gamma,
            lam=None if latent.lam is None else np.array(latent.lam, dtype=float),
            z0=None if latent.z0 is None else np.array(latent.z0, dtype=float),
        )


@dataclass
class PosteriorDraws:
    """Thinned post-burn-in output of one chain.

    Attributes
    ----------
    params
        Parameter name -> array of draws.
    h_last
        ``h_n`` at each retained draw.
    lev_last
        Leverage variate at ``t = n`` (``z_n`` or ``eps_n``) at each retained draw.
    h_mean
        Posterior mean of the latent path.
    acceptance
        Mean acceptance rate per sampling block (Gibbs blocks report 1).
    """

    model: ModelSpec
    params: dict[str, np.ndarray]
    h_last: np.ndarray
    lev_last: np.ndarray
    h_mean: np.ndarray
    acceptance: dict[str, float]
    final_state: ChainState
    diagnostics: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.h_last.size

    def mean(self) -> dict[str, float]:
        return {k: float(np.mean(v)) for k, v in self.params.items()}

    def interval(self, name: str, level: float = 0.95) -> tuple[float, float]:
        q = (1.0 - level) / 2.0
        lo, hi = np.quantile(self.params[name], [q, 1.0 - q])
        return float(lo), float(hi)

    def param_at(self, i: int) -> ModelParams:
        d = {k: float(v[i]) for k, v in self.params.items()}
        fam = self.model.family
        shape = InnovationSpec(fam, **{k: d.pop(k) for k in fam.shape_names})
        return ModelParams(shape=shape, **d)


# ---------------------------------------------------------------------------
# numerical helpers


def _log_interval_mass(a, b):
    """``log(Phi(b) - Phi(a))`` for standardized bounds, stable in both tails."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    right = a > 0.0
    lo = np.where(right, -b, a)
    hi = np.where(right, -a, b)
    lhi = special.log_ndtr(hi)
    llo = special.log_ndtr(lo)
    with np.errstate(divide="ignore"):
        return lhi + np.log1p(-np.exp(llo - lhi))


def _log_interval_mass_scalar(a: float, b: float) -> float:
    if a > 0.0:
        a, b = -b, -a
    lhi = float(special.log_ndtr(b))
    llo = float(special.log_ndtr(a))
    diff = math.exp(llo - lhi)
    return lhi + math.log1p(-diff) if diff < 1.0 else -math.inf


def tn_logpdf_scalar(x: float, mean: float, sd: float, lo: float = -math.inf, hi: float = math.inf) -> float:
    if not lo < x < hi:
        return -math.inf
    z = (x - mean) / sd
    return -0.5 * math.log(2.0 * math.pi) - math.log(sd) - 0.5 * z * z - _log_interval_mass_scalar(
        (lo - mean) / sd, (hi - mean) / sd)


def tn_draw_scalar(rng: np.random.Generator, mean: float, sd: float, lo: float = -math.inf, hi: float = math.inf) -> float:
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    right = a > 0.0
    if right:
        a, b = -b, -a
    llo = float(special.log_ndtr(a))
    lmass = _log_interval_mass_scalar(a, b)
    lu = math.log(rng.random())
    top = max(llo, lu + lmass)
    z = float(special.ndtri_exp(top + math.log1p(math.exp(-abs(llo - lu - lmass)))))
    z = min(max(z, a), b)
    out = mean + sd * (-z if right else z)
    return min(max(out, math.nextafter(lo, math.inf)), math.nextafter(hi, -math.inf))


def tn_logpdf(x, mean, sd, lo=-np.inf, hi=np.inf):
    """Log density of ``N(mean, sd^2)`` truncated to ``(lo, hi)``."""
    x = np.asarray(x, dtype=float)
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    z = (x - mean) / sd
    val = -0.5 * np.log(2.0 * np.pi) - np.log(sd) - 0.5 * z * z - _log_interval_mass(a, b)
    return np.where((x > lo) & (x < hi), val, -np.inf)


def tn_draw(rng: np.random.Generator, mean, sd, lo=-np.inf, hi=np.inf, size=None):
    """Inverse-CDF draw from ``N(mean, sd^2)`` truncated to ``(lo, hi)``.

    Works in log space so bounds far in either tail are handled.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    a = np.asarray((lo - mean) / sd, dtype=float)
    b = np.asarray((hi - mean) / sd, dtype=float)
    if size is None:
        size = np.broadcast(a, b).shape
    right = a > 0.0
    lo_s = np.where(right, -b, a)
    hi_s = np.where(right, -a, b)
    llo = special.log_ndtr(lo_s)
    lmass = _log_interval_mass(lo_s, hi_s)
    lu = np.log(rng.random(size))
    with np.errstate(divide="ignore"):
        zs = special.ndtri_exp(np.logaddexp(llo, lu + lmass))
    zs = np.clip(zs, lo_s, hi_s)
    z = np.where(right, -zs, zs)
    out = mean + sd * z
    out = np.clip(out, np.nextafter(lo, np.inf), np.nextafter(hi, -np.inf))
    return out[()] if np.ndim(out) == 0 else out


def tn_draw_positive(rng: np.random.Generator, mean: np.ndarray, sd: np.ndarray) -> np.ndarray:
    """Vectorized draw from ``N(mean, sd^2)`` truncated to ``(0, inf)``."""
    alpha = -mean / sd
    u = rng.random(mean.shape)
    out = np.empty(mean.shape)
    easy = alpha < 5.0
    # plain inversion where the truncation point is not deep in the tail
    pa = special.ndtr(alpha[easy])
    out[easy] = special.ndtri(pa + u[easy] * (1.0 - pa))
    hard = ~easy
    if hard.any():
        out[hard] = -special.ndtri_exp(np.log(u[hard]) + special.log_ndtr(-alpha[hard]))
    out = np.maximum(out, alpha)
    res = mean + sd * out
    return np.maximum(res, np.finfo(float).tiny)


def newton_max_1d(f, x0: float, lo: float, hi: float, max_iter: int = 20, tol: float = 1e-8):
    """Safeguarded Newton maximization of a smooth scalar function on ``(lo, hi)``.

    Derivatives are central finite differences.  Steps that leave the interval
    are bisected toward the boundary and steps that fail to increase ``f`` are
    halved.  Falls back to bounded Brent search when Newton does not converge.

    Returns
    -------
    (mode, neg_curvature, converged_by_newton)
        ``neg_curvature`` is ``-f''(mode)`` floored at 1e-8.
    """
    hi_eff = hi if np.isfinite(hi) else lo + 500.0

    def fd(x):
        step = 1e-4 * max(1.0, abs(x))
        step = min(step, 0.25 * (x - lo), 0.25 * (hi - x))
        f0, fp, fm = f(x), f(x + step), f(x - step)
        return f0, (fp - fm) / (2.0 * step), (fp - 2.0 * f0 + fm) / step**2

    x = float(np.clip(x0, lo + 1e-6 * (hi_eff - lo), hi_eff - 1e-6 * (hi_eff - lo)))
    converged = False
    f0 = f(x)
    for _ in range(max_iter):
        step = min(1e-4 * max(1.0, abs(x)), 0.25 * (x - lo), 0.25 * (hi - x))
        fp, fm = f(x + step), f(x - step)
        g = (fp - fm) / (2.0 * step)
        h = (fp - 2.0 * f0 + fm) / step**2
        if not (math.isfinite(f0) and math.isfinite(g) and math.isfinite(h)):
            break
        delta = -g / h if h < 0.0 else math.copysign(0.1 * max(1.0, abs(x)), g)
        cand = x + delta
        for _ in range(80):
            if lo < cand < hi_eff:
                break
            cand = 0.5 * (x + cand)
        else:
            # x sits one ulp from the boundary; midpoints round onto it
            cand = x
        fc = f(cand)
        for _ in range(40):
            if fc >= f0:
                break
            cand = 0.5 * (x + cand)
            fc = f(cand)
        moved = abs(cand - x)
        x, f0 = cand, fc
        if moved < tol * max(1.0, abs(x)):
            converged = h < 0.0
            break
    if not converged:
        res = optimize.minimize_scalar(lambda v: -f(v), bounds=(lo, hi_eff), method="bounded",
                                       options={"xatol": 1e-10})
        x = float(res.x)
    _, _, h = fd(x)
    neg_curv = -h if np.isfinite(h) else 1e-8
    return x, max(neg_curv, 1e-8), converged


def newton_max_2d(f, x0, max_iter: int = 50, tol: float = 1e-8, derivs=None):
    """Newton maximization in two unconstrained coordinates with line search.

    ``derivs(x)`` may supply the analytic ``(gradient, hessian)``; otherwise
    both are approximated by central differences.  Returns
    ``(mode, covariance, ok)`` where ``covariance`` is the inverse of the
    negative Hessian at the mode.
    """
    x = np.asarray(x0, dtype=float).copy()
    eye = np.eye(2)

    def grad_hess(x):
        if derivs is not None:
            g, hmat = derivs(x)
            return f(x), g, hmat
        st = 1e-4 * np.maximum(1.0, np.abs(x))
        f0 = f(x)
        g = np.empty(2)
        hmat = np.empty((2, 2))
        fp = [f(x + st[i] * eye[i]) for i in range(2)]
        fm = [f(x - st[i] * eye[i]) for i in range(2)]
        for i in range(2):
            g[i] = (fp[i] - fm[i]) / (2.0 * st[i])
            hmat[i, i] = (fp[i] - 2.0 * f0 + fm[i]) / st[i] ** 2
        fpp = f(x + st[0] * eye[0] + st[1] * eye[1])
        fpm = f(x + st[0] * eye[0] - st[1] * eye[1])
        fmp = f(x - st[0] * eye[0] + st[1] * eye[1])
        fmm = f(x - st[0] * eye[0] - st[1] * eye[1])
        hmat[0, 1] = hmat[1, 0] = (fpp - fpm - fmp + fmm) / (4.0 * st[0] * st[1])
        return f0, g, hmat

    ok = False
    for _ in range(max_iter):
        f0, g, hmat = grad_hess(x)
        a, b, d = float(hmat[0, 0]), float(hmat[0, 1]), float(hmat[1, 1])
        g1, g2 = float(g[0]), float(g[1])
        if not all(math.isfinite(v) for v in (f0, g1, g2, a, b, d)):
            return x, None, False
        # closed-form 2x2 eigenvalues; shift to a negative definite matrix if needed
        m = 0.5 * (a + d)
        r = math.hypot(0.5 * (a - d), b)
        lo_ev, hi_ev = m - r, m + r
        shift = 0.0 if hi_ev < 0.0 else hi_ev + max(1.0, abs(lo_ev))
        a_s, d_s = a - shift, d - shift
        det = a_s * d_s - b * b
        step = np.array([-(d_s * g1 - b * g2) / det, -(a_s * g2 - b * g1) / det])
        t = 1.0
        for _ in range(40):
            if f(x + t * step) >= f0:
                break
            t *= 0.5
        step = t * step
        x = x + step
        if max(abs(step[0]), abs(step[1])) < tol * max(1.0, abs(x[0]), abs(x[1])):
            ok = True
            break
    _, _, hmat = grad_hess(x)
    a, b, d = float(hmat[0, 0]), float(hmat[0, 1]), float(hmat[1, 1])
    det = a * d - b * b
    # -H must be positive definite: -a > 0 and det > 0
    if not ok or not (math.isfinite(det) and a < 0.0 and det > 0.0):
        return x, None, False
    cov = np.array([[-d, b], [b, -a]]) / det
    return x, cov, True


def batch_means_se(x, n_batches: int = 50) -> float:
    """Standard error of the mean of a correlated series by batch means."""
    x = np.asarray(x, dtype=float)
    b = x.size // n_batches
    if b < 1:
        raise ValueError("series too short for batch means")
    means = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(n_batches))


def _norm_logpdf(x, mean, var):
    return -0.5 * np.log(2.0 * np.pi * var) - 0.5 * (x - mean) ** 2 / var


def _beta_pm1_logkernel(p, a, b):
    return (a - 1.0) * math.log1p(p) + (b - 1.0) * math.log1p(-p)


def _inv_gamma_logpdf(v, shape, scale):
    return shape * np.log(scale) - special.gammaln(shape) - (shape + 1.0) * np.log(v) - scale / v


# ---------------------------------------------------------------------------
# initial values


def _moving_average(v: np.ndarray, k: int = 5) -> np.ndarray:
    pad = k // 2
    padded = np.pad(v, pad, mode="edge")
    return np.convolve(padded, np.ones(k) / k, mode="valid")


def initial_state(model: ModelSpec, data: Dataset, overrides: dict | None = None) -> ChainState:
    """Deterministic starting point built from the data.

    The latent path starts at the smoothed log squared returns (shifted by
    the mean of ``log chi^2_1``) or, when the realized measure is modeled,
    at ``x`` recentered to the level of the returns.
    """
    fam = model.family
    y = data.y
    n = y.size
    h_y = _moving_average(np.log(np.maximum(y**2, 1e-8))) + 1.27
    if model.use_rv:
        xi0 = float(np.mean(data.x) - np.log(max(np.mean(y**2), 1e-8)))
        h0 = data.x - xi0
        su2 = float(max(np.var(data.x - xi0 - h_y) * 0.1, 0.05))
    else:
        xi0, su2 = 0.0, 0.1
        h0 = h_y
    st = ChainState(
        mu=float(np.mean(h0)), phi=0.97, rho=-0.3, sigma_eta2=0.05, xi=xi0, sigma_u2=su2, h=np.array(h0, dtype=float),
        nu=15.0 if fam.has_nu else None, beta=0.0, delta=0.0, gamma=1.0,
        lam=np.ones(n) if fam.has_lambda else None,
        z0=np.full(n, C_HALF_NORMAL) if fam.has_z0 else None,
    )
    if fam.has_nu:
        st.nu = max(st.nu, fam.nu_floor + 1.0)
    for key, val in (overrides or {}).items():
        if key in ("h", "lam", "z0"):
            if val is not None and np.size(val) == n:
                setattr(st, key, np.array(val, dtype=float))
        elif val is not None:
            setattr(st, key, float(val))
    return st


# ---------------------------------------------------------------------------
# base sampler


class BaseSampler:
    """Steps that are common to every family.

    Subclasses provide :meth:`lev_logp` returning the leverage variate and
    the return log-density kernel (without the ``-h/2`` Jacobian) for a set of
    time indices, and list their step order in :attr:`steps`.
    """

    steps: tuple[str, ...] = ()

    def __init__(self, model: ModelSpec, data: Dataset, prior: PriorSpec, state: ChainState):
        if model.use_rv and data.x is None:
            raise ValueError(f"{model.name} requires a realized measure")
        if len(data) < 2:
            raise ValueError("at least two observations are required")
        self.model = model
        self.family = model.family
        self.use_rv = model.use_rv
        self.data = data
        self.prior = prior
        self.y = data.y
        self.x = data.x
        self.n = len(data)
        self.state = state
        self.accepts: dict[str, float] = {}
        self.trials: dict[str, float] = {}
        self.fallbacks: dict[str, int] = {}

    def set_data(self, data: Dataset) -> None:
        """Swap in new observations of the same length (used by joint-distribution tests)."""
        if len(data) != self.n:
            raise ValueError("replacement data must keep the sample size")
        self.data = data
        self.y = data.y
        self.x = data.x

    # -- bookkeeping -------------------------------------------------------

    def _record(self, name: str, accepted, count: int = 1) -> None:
        self.accepts[name] = self.accepts.get(name, 0.0) + float(np.sum(accepted))
        self.trials[name] = self.trials.get(name, 0.0) + count

    def _fallback(self, name: str) -> None:
        self.fallbacks[name] = self.fallbacks.get(name, 0) + 1

    # -- family hooks ------------------------------------------------------

    def lev_logp(self, w: np.ndarray, idx: np.ndarray):
        raise NotImplementedError

    def leverage(self) -> np.ndarray:
        w = self.w()
        return self.lev_logp(w, np.arange(self.n))[0]

    # -- derived quantities ------------------------------------------------

    def w(self) -> np.ndarray:
        return self.y * np.exp(-0.5 * self.state.h)

    def resid(self) -> np.ndarray:
        """``e_t = h_{t+1} - mu - phi (h_t - mu)`` for ``t < n``."""
        s = self.state
        return s.h[1:] - s.mu - s.phi * (s.h[:-1] - s.mu)

    @property
    def kappa(self) -> float:
        return 1.0 - self.state.rho ** 2

    # -- mu ----------------------------------------------------------------

    def mu_conditional(self) -> tuple[float, float]:
        s = self.state
        p = self.prior
        sig2 = s.sigma_eta2
        sig = np.sqrt(sig2)
        kap = self.kappa
        v = self.leverage()
        h = s.h
        prec = 1.0 / p.s2_mu + ((1.0 - s.phi**2) + (self.n - 1) * (1.0 - s.phi) ** 2 / kap) / sig2
        lin = p.m_mu / p.s2_mu + (
            (1.0 - s.phi**2) * h[0]
            + (1.0 - s.phi) / kap * np.sum(h[1:] - s.phi * h[:-1] - s.rho * sig * v[:-1])
        ) / sig2
        return lin / prec, 1.0 / prec

    def mu_log_target(self, mu: float) -> float:
        m, v = self.mu_conditional()
        return float(_norm_logpdf(mu, m, v))

    def sample_mu(self, rng: np.random.Generator) -> None:
        m, v = self.mu_conditional()
        self.state.mu = float(m + np.sqrt(v) * rng.standard_normal())
        self._record("mu", 1)

    # -- phi ---------------------------------------------------------------

    def phi_proposal(self) -> tuple[float, float]:
        s = self.state
        sig2 = s.sigma_eta2
        sig = np.sqrt(sig2)
        kap = self.kappa
        d = s.h - s.mu
        v = self.leverage()
        denom = s.rho**2 * d[0] ** 2 + np.sum(d[1:-1] ** 2)
        denom = max(denom, 1e-12)
        var = sig2 * kap / denom
        mean = var / (sig2 * kap) * np.sum((d[1:] - s.rho * sig * v[:-1]) * d[:-1])
        return float(mean), float(var)

    def phi_log_g(self, phi: float) -> float:
        if not abs(phi) < 1.0:
            return -np.inf
        a, b = self.prior.a_phi, self.prior.b_phi
        return float((a - 0.5) * np.log1p(phi) + (b - 0.5) * np.log1p(-phi))

    def phi_log_target(self, phi: float) -> float:
        m, v = self.phi_proposal()
        return self.phi_log_g(phi) + float(_norm_logpdf(phi, m, v))

    def sample_phi(self, rng: np.random.Generator) -> None:
        m, v = self.phi_proposal()
        cand = m + np.sqrt(v) * rng.standard_normal()
        ok = False
        if abs(cand) < 1.0:
            log_a = self.phi_log_g(cand) - self.phi_log_g(self.state.phi)
            if np.log(rng.random()) < log_a:
                self.state.phi = float(cand)
                ok = True
        self._record("phi", ok)

    # -- xi and sigma_u2 ---------------------------------------------------

    def xi_conditional(self) -> tuple[float, float]:
        s = self.state
        p = self.prior
        prec = 1.0 / p.s2_xi + self.n / s.sigma_u2
        lin = p.m_xi / p.s2_xi + np.sum(self.x - s.h) / s.sigma_u2
        return float(lin / prec), float(1.0 / prec)

    def xi_log_target(self, xi: float) -> float:
        m, v = self.xi_conditional()
        return float(_norm_logpdf(xi, m, v))

    def sample_xi(self, rng: np.random.Generator) -> None:
        if not self.use_rv:
            return
        m, v = self.xi_conditional()
        self.state.xi = float(m + np.sqrt(v) * rng.standard_normal())
        self._record("xi", 1)

    def sigma_u2_conditional(self) -> tuple[float, float]:
        """Shape and scale of the inverse-gamma full conditional."""
        s = self.state
        p = self.prior
        n1 = p.n_u + self.n
        s1 = p.S_u + np.sum((self.x - s.xi - s.h) ** 2)
        return n1 / 2.0, float(s1 / 2.0)

    def sigma_u2_log_target(self, val: float) -> float:
        a, b = self.sigma_u2_conditional()
        return float(_inv_gamma_logpdf(val, a, b))

    def sample_sigma_u2(self, rng: np.random.Generator) -> None:
        if not self.use_rv:
            return
        a, b = self.sigma_u2_conditional()
        self.state.sigma_u2 = float(b / rng.gamma(a))
        self._record("sigma_u2", 1)

    # -- h -----------------------------------------------------------------

    def h_proposal(self, idx: np.ndarray, v: np.ndarray | None = None):
        """Mean and variance of the Gaussian proposal for ``h_t``, ``t in idx``.

        Built from the AR transitions (with the incoming leverage shift), the
        ``-h_t / 2`` term of the return density and the measurement equation.
        """
        s = self.state
        sig2 = s.sigma_eta2
        sig = np.sqrt(sig2)
        kap = self.kappa
        n = self.n
        h = s.h
        if v is None:
            v = self.leverage()
        first = idx == 0
        last = idx == n - 1
        prec = np.where(first, (1.0 - s.phi**2) / sig2, 1.0 / (kap * sig2))
        prec = prec + np.where(last, 0.0, s.phi**2 / (kap * sig2))
        im1 = np.maximum(idx - 1, 0)
        ip1 = np.minimum(idx + 1, n - 1)
        lin = np.where(
            first,
            (1.0 - s.phi**2) * s.mu / sig2,
            (s.mu + s.phi * (h[im1] - s.mu) + s.rho * sig * v[im1]) / (kap * sig2),
        )
        lin = lin + np.where(last, 0.0, s.phi * (h[ip1] - s.mu + s.phi * s.mu) / (kap * sig2)) - 0.5
        if self.use_rv:
            prec = prec + 1.0 / s.sigma_u2
            lin = lin + (self.x[idx] - s.xi) / s.sigma_u2
        return lin / prec, 1.0 / prec

    def h_log_k(self, idx: np.ndarray, hv: np.ndarray) -> np.ndarray:
        """Non-Gaussian part of the conditional of ``h_t`` at values ``hv``."""
        s = self.state
        sig = np.sqrt(s.sigma_eta2)
        kap = self.kappa
        w = self.y[idx] * np.exp(-0.5 * hv)
        lev, logp = self.lev_logp(w, idx)
        inner = idx < self.n - 1
        ip1 = np.minimum(idx + 1, self.n - 1)
        e = s.h[ip1] - s.mu - s.phi * (hv - s.mu)
        return logp + np.where(inner, -(s.rho**2) * lev**2 / (2.0 * kap) + s.rho * e * lev / (kap * sig), 0.0)

    def h_log_target(self, t: int, val: float) -> float:
        idx = np.array([t])
        m, v = self.h_proposal(idx)
        hv = np.array([val])
        return float(self.h_log_k(idx, hv)[0] + _norm_logpdf(val, m[0], v[0]))

    def sample_h(self, rng: np.random.Generator) -> None:
        h = self.state.h
        acc = 0
        for parity in (0, 1):
            idx = np.arange(parity, self.n, 2)
            m, v = self.h_proposal(idx)
            cand = m + np.sqrt(v) * rng.standard_normal(idx.size)
            log_a = self.h_log_k(idx, cand) - self.h_log_k(idx, h[idx])
            ok = np.log(rng.random(idx.size)) < log_a
            h[idx] = np.where(ok, cand, h[idx])
            acc += int(ok.sum())
        self._record("h", acc, self.n)

    # -- driver ------------------------------------------------------------

    def adapt(self, it: int) -> None:
        """Hook for burn-in adaptation; no-op by default."""

    def sweep(self, rng: np.random.Generator) -> None:
        for name in self.steps:
            getattr(self, "sample_" + name)(rng)

    def check_finite(self, it: int) -> None:
        s = self.state
        scalars = [s.mu, s.phi, s.rho, s.sigma_eta2, s.xi, s.sigma_u2]
        if s.nu is not None:
            scalars.append(s.nu)
        scalars += [s.beta, s.delta, s.gamma]
        bad = not np.all(np.isfinite(scalars)) or not np.all(np.isfinite(s.h))
        if s.lam is not None:
            bad = bad or not np.all(np.isfinite(s.lam)) or np.any(s.lam <= 0)
        if s.z0 is not None:
            bad = bad or not np.all(np.isfinite(s.z0)) or np.any(s.z0 <= 0)
        if bad:
            dump = {k: v for k, v in dataclasses.asdict(s).items() if np.ndim(v) == 0}
            dump["iteration"] = it
            raise NumericalError(f"non-finite chain state at iteration {it}", dump)


def run_sampler(sampler: BaseSampler, config: ChainConfig, rng: np.random.Generator | None = None) -> PosteriorDraws:
    """Run burn-in plus sampling and collect thinned draws."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    fam = sampler.family
    names = ["mu", "phi", "rho", "sigma_eta2"]
    if sampler.use_rv:
        names += ["xi", "sigma_u2"]
    names += list(fam.shape_names)
    n_keep = (config.n_iter - config.n_burn + config.thin - 1) // config.thin
    out = {k: np.empty(n_keep) for k in names}
    h_last = np.empty(n_keep)
    lev_last = np.empty(n_keep)
    h_sum = np.zeros(sampler.n)
    t0 = time.perf_counter()
    k = 0
    for it in range(config.n_iter):
        if it == config.n_burn:
            sampler.accepts.clear()
            sampler.trials.clear()
        sampler.sweep(rng)
        if it < config.n_burn:
            sampler.adapt(it)
        if it % 100 == 0 or it == config.n_iter - 1:
            sampler.check_finite(it)
        if it >= config.n_burn and (it - config.n_burn) % config.thin == 0:
            s = sampler.state
            for name in names:
                out[name][k] = getattr(s, name)
            h_last[k] = s.h[-1]
            lev_last[k] = sampler.leverage()[-1]
            h_sum += s.h
            k += 1
    acc = {name: sampler.accepts[name] / sampler.trials[name] for name in sampler.trials}
    diag = {"seconds": time.perf_counter() - t0, "fallbacks": dict(sampler.fallbacks)}
    if hasattr(sampler, "step_sizes"):
        diag["step_sizes"] = dict(sampler.step_sizes)
    return PosteriorDraws(
        model=sampler.model, params=out, h_last=h_last, lev_last=lev_last, h_mean=h_sum / max(k, 1),
        acceptance=acc, final_state=sampler.state.copy(), diagnostics=diag,
    )
