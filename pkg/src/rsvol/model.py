"""Model definitions, priors, joint log-density and simulation.

The state-space system is

    x_t     = xi + h_t + u_t,                 u_t ~ N(0, sigma_u2)
    y_t     = eps_t * exp(h_t / 2)
    h_{t+1} = mu + phi (h_t - mu) + eta_t

with ``h_1 ~ N(mu, sigma_eta2 / (1 - phi^2))``.  The volatility shock is
coupled to the return shock through ``eta_t | v_t ~ N(rho sigma_eta v_t,
(1 - rho^2) sigma_eta2)``, where the leverage variate ``v_t`` is the Gaussian
kernel ``z_t`` of the mixture families and ``eps_t`` itself for the
Fernandez-Steel families.  Plain SV models drop the ``x`` equation.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, special

from .innovations import (
    C_HALF_NORMAL,
    Family,
    InnovationSpec,
    az_k,
    draw_standardized,
    fs_moments,
    fs_standardized_logpdf,
    sigma_lambda2,
)

__all__ = [
    "Dataset",
    "LatentState",
    "ModelParams",
    "ModelSpec",
    "PriorSpec",
    "draw_prior",
    "log_joint",
    "log_prior",
    "mixture_mean_scale",
    "parse_model",
    "regenerate_data",
    "simulate",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class ModelParams:
    """Structural parameters plus the innovation shape."""

    mu: float
    phi: float
    rho: float
    sigma_eta2: float
    xi: float = 0.0
    sigma_u2: float = 0.1
    shape: InnovationSpec = field(default_factory=InnovationSpec)

    def __post_init__(self) -> None:
        if not abs(self.phi) < 1.0:
            raise ValueError(f"|phi| must be < 1, got {self.phi}")
        if not abs(self.rho) < 1.0:
            raise ValueError(f"|rho| must be < 1, got {self.rho}")
        if not self.sigma_eta2 > 0.0:
            raise ValueError(f"sigma_eta2 must be positive, got {self.sigma_eta2}")
        if not self.sigma_u2 > 0.0:
            raise ValueError(f"sigma_u2 must be positive, got {self.sigma_u2}")
        if not np.isfinite(self.mu) or not np.isfinite(self.xi):
            raise ValueError("mu and xi must be finite")

    @property
    def sigma_eta(self) -> float:
        return float(np.sqrt(self.sigma_eta2))

    def as_dict(self) -> dict[str, float]:
        out = {
            "mu": self.mu,
            "phi": self.phi,
            "rho": self.rho,
            "sigma_eta2": self.sigma_eta2,
            "xi": self.xi,
            "sigma_u2": self.sigma_u2,
        }
        for name in self.shape.family.shape_names:
            out[name] = getattr(self.shape, name)
        return out


@dataclass(frozen=True)
class PriorSpec:
    """Hyperparameters. Inverse-gamma priors are written IG(n/2, S/2);
    gamma priors use (shape, rate); beta-type priors act on (p + 1) / 2."""

    m_mu: float = 0.0
    s2_mu: float = 100.0
    a_phi: float = 1.0
    b_phi: float = 1.0
    a_rho: float = 1.0
    b_rho: float = 1.0
    n_eta: float = 0.1
    S_eta: float = 0.1
    m_xi: float = 0.0
    s2_xi: float = 10.0
    n_u: float = 5.0
    S_u: float = 0.2
    nu_shape: float = 5.0
    nu_rate: float = 0.5
    s2_beta: float = 1.0
    a_delta: float = 1.0
    b_delta: float = 1.0
    gamma_shape: float = 1.0
    gamma_rate: float = 1.0

    def __post_init__(self) -> None:
        for f in dataclasses.fields(self):
            if f.name.startswith("m_"):
                continue
            if not getattr(self, f.name) > 0.0:
                raise ValueError(f"prior hyperparameter {f.name} must be positive")


@dataclass(frozen=True)
class ModelSpec:
    """Innovation family plus whether the realized measure enters the likelihood."""

    family: Family
    use_rv: bool = True

    @property
    def name(self) -> str:
        return f"{'RSV' if self.use_rv else 'SV'}-{self.family.value}"

    def __str__(self) -> str:
        return self.name


_MODEL_RE = re.compile(r"^(RSV|SV)-(N|T|GH-ST|AZ-SN|AZ-ST|FS-SN|FS-ST)$", re.IGNORECASE)


def parse_model(name: str) -> ModelSpec:
    """Parse identifiers such as ``"RSV-AZ-ST"`` or ``"SV-N"``."""
    m = _MODEL_RE.match(name.strip())
    if m is None:
        raise ValueError(f"unknown model {name!r}")
    return ModelSpec(Family(m.group(2).upper()), m.group(1).upper() == "RSV")


@dataclass(frozen=True)
class Dataset:
    """Aligned daily returns ``y`` (percent) and optional log realized measure ``x``."""

    y: np.ndarray
    x: np.ndarray | None = None
    dates: np.ndarray | None = None

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise ValueError("y must be a non-empty 1-d array")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains missing or non-finite values")
        object.__setattr__(self, "y", y)
        if self.x is not None:
            x = np.asarray(self.x, dtype=float)
            if x.shape != y.shape:
                raise ValueError("x and y must have equal length")
            if not np.all(np.isfinite(x)):
                raise ValueError("x contains missing or non-finite values")
            object.__setattr__(self, "x", x)
        if self.dates is None:
            dates = np.busday_offset("2000-01-03", np.arange(y.size), roll="forward")
        else:
            dates = np.asarray(self.dates)
            if dates.shape != y.shape:
                raise ValueError("dates and y must have equal length")
            if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
                raise ValueError("dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)

    def __len__(self) -> int:
        return self.y.size

    def window(self, start: int, stop: int) -> "Dataset":
        x = None if self.x is None else self.x[start:stop]
        return Dataset(self.y[start:stop], x, self.dates[start:stop])


@dataclass(frozen=True)
class LatentState:
    """Latent log-volatility path and the mixture auxiliaries (if any)."""

    h: np.ndarray
    lam: np.ndarray | None = None
    z0: np.ndarray | None = None


# ---------------------------------------------------------------------------
# helpers shared with the samplers


def mixture_mean_scale(family: Family, n: int, nu=None, beta=0.0, delta=0.0, lam=None, z0=None):
    """Conditional mean ``m_t`` and scale ``s_t`` of ``eps_t`` given the auxiliaries.

    For the mixture families ``eps_t = m_t + s_t z_t`` with ``z_t ~ N(0, 1)``.
    """
    if family is Family.NORMAL:
        return np.zeros(n), np.ones(n)
    if family is Family.STUDENT_T:
        a = np.sqrt(lam * (nu - 2.0) / nu)
        return np.zeros(n), a
    if family is Family.GH_SKEW_T:
        mu_l = nu / (nu - 2.0)
        d = np.sqrt(beta**2 * sigma_lambda2(nu) + mu_l)
        return beta * (lam - mu_l) / d, np.sqrt(lam) / d
    if family in (Family.AZ_SKEW_NORMAL, Family.AZ_SKEW_T):
        r = np.sqrt(1.0 - C_HALF_NORMAL**2 * delta**2)
        a = np.sqrt(lam * (nu - 2.0) / nu) if family is Family.AZ_SKEW_T else 1.0
        return a * delta * (z0 - C_HALF_NORMAL) / r, a * az_k(delta) * np.ones(n)
    raise ValueError(f"{family.value} is not a mixture family")


def _norm_logpdf(x, mean, var):
    return -0.5 * (_LOG_2PI + np.log(var)) - 0.5 * (x - mean) ** 2 / var


def _beta_pm1_logpdf(p, a, b):
    # (p + 1) / 2 ~ Beta(a, b), density with respect to p
    if not abs(p) < 1.0:
        return -np.inf
    return (a - 1.0) * np.log1p(p) + (b - 1.0) * np.log1p(-p) - special.betaln(a, b) - (a + b - 1.0) * np.log(2.0)


def _inv_gamma_logpdf(v, shape, scale):
    if not v > 0.0:
        return -np.inf
    return shape * np.log(scale) - special.gammaln(shape) - (shape + 1.0) * np.log(v) - scale / v


def _gamma_logpdf(v, shape, rate):
    if not v > 0.0:
        return -np.inf
    return shape * np.log(rate) - special.gammaln(shape) + (shape - 1.0) * np.log(v) - rate * v


def log_prior(params: ModelParams, prior: PriorSpec, use_rv: bool = True) -> float:
    """Log prior density of the parameters (``nu`` prior left untruncated-normalized)."""
    spec = params.shape
    fam = spec.family
    lp = _norm_logpdf(params.mu, prior.m_mu, prior.s2_mu)
    lp += _beta_pm1_logpdf(params.phi, prior.a_phi, prior.b_phi)
    lp += _beta_pm1_logpdf(params.rho, prior.a_rho, prior.b_rho)
    lp += _inv_gamma_logpdf(params.sigma_eta2, prior.n_eta / 2.0, prior.S_eta / 2.0)
    if use_rv:
        lp += _norm_logpdf(params.xi, prior.m_xi, prior.s2_xi)
        lp += _inv_gamma_logpdf(params.sigma_u2, prior.n_u / 2.0, prior.S_u / 2.0)
    if fam.has_nu:
        lp += _gamma_logpdf(spec.nu, prior.nu_shape, prior.nu_rate) if spec.nu > fam.nu_floor else -np.inf
    if fam.has_beta:
        lp += _norm_logpdf(spec.beta, 0.0, prior.s2_beta)
    if fam.has_delta:
        lp += _beta_pm1_logpdf(spec.delta, prior.a_delta, prior.b_delta)
    if fam.has_gamma:
        lp += _gamma_logpdf(spec.gamma, prior.gamma_shape, prior.gamma_rate)
    return float(lp)


def _unpack(params) -> ModelParams | None:
    # accept dict-like parameter sets that may sit outside the support
    if isinstance(params, ModelParams):
        return params
    try:
        return ModelParams(**params)
    except (ValueError, TypeError):
        return None


def log_joint(
    params: ModelParams | dict,
    latent: LatentState,
    data: Dataset,
    prior: PriorSpec | None = None,
    use_rv: bool | None = None,
) -> float:
    """``log f(y, x, h, lam, z0 | theta) + log pi(theta)`` up to an additive constant.

    Parameters
    ----------
    params
        Parameter values. A mapping with out-of-support values yields ``-inf``.
    latent
        Latent path and mixture auxiliaries required by the family.
    data
        Observations. ``x`` is used when ``use_rv`` is true.
    prior
        Prior hyperparameters; ``None`` uses the defaults.
    use_rv
        Include the measurement equation. Defaults to ``data.x is not None``.
    """
    p = _unpack(params)
    if p is None:
        return -np.inf
    prior = PriorSpec() if prior is None else prior
    use_rv = data.x is not None if use_rv is None else use_rv
    spec = p.shape
    fam = spec.family
    h = np.asarray(latent.h, dtype=float)
    n = len(data)
    if h.shape != (n,):
        raise ValueError("latent path length does not match data")
    if use_rv and data.x is None:
        raise ValueError("use_rv requires x")
    if fam.has_nu and not spec.nu > fam.nu_floor:
        return -np.inf

    sig2, rho, phi, mu = p.sigma_eta2, p.rho, p.phi, p.mu
    sig = np.sqrt(sig2)
    kappa = 1.0 - rho**2
    w = data.y * np.exp(-0.5 * h)

    ll = _norm_logpdf(h[0], mu, sig2 / (1.0 - phi**2))
    if fam.is_fs:
        nu = spec.nu if fam is Family.FS_SKEW_T else None
        ll += np.sum(fs_standardized_logpdf(w, spec.gamma, nu) - 0.5 * h)
        lev = w
    else:
        lam = latent.lam
        z0 = latent.z0
        if fam.has_lambda:
            lam = np.asarray(lam, dtype=float)
            if lam.shape != (n,):
                raise ValueError("lam has the wrong length")
            if np.any(lam <= 0.0):
                return -np.inf
            a = spec.nu / 2.0
            ll += np.sum(a * np.log(a) - special.gammaln(a) - (a + 1.0) * np.log(lam) - a / lam)
        if fam.has_z0:
            z0 = np.asarray(z0, dtype=float)
            if z0.shape != (n,):
                raise ValueError("z0 has the wrong length")
            if np.any(z0 <= 0.0):
                return -np.inf
            ll += np.sum(np.log(2.0) - 0.5 * _LOG_2PI - 0.5 * z0**2)
        m, s = mixture_mean_scale(fam, n, nu=spec.nu, beta=spec.beta, delta=spec.delta, lam=lam, z0=z0)
        z = (w - m) / s
        ll += np.sum(-0.5 * h - np.log(s) - 0.5 * _LOG_2PI - 0.5 * z**2)
        lev = z

    if n > 1:
        mean_next = mu + phi * (h[:-1] - mu) + rho * sig * lev[:-1]
        ll += np.sum(_norm_logpdf(h[1:], mean_next, kappa * sig2))
    if use_rv:
        ll += np.sum(_norm_logpdf(data.x, p.xi + h, p.sigma_u2))
    lp = log_prior(p, prior, use_rv)
    total = float(ll + lp)
    return total if np.isfinite(total) or total == -np.inf else -np.inf


# ---------------------------------------------------------------------------
# simulation


def _ar_path(mu, phi, h1, eta):
    # h_{t+1} - mu = phi (h_t - mu) + eta_t
    inp = np.concatenate(([h1 - mu], eta[:-1]))
    return mu + signal.lfilter([1.0], [1.0, -phi], inp)


def simulate(
    params: ModelParams,
    n: int,
    rng: np.random.Generator,
    with_rv: bool = True,
) -> tuple[Dataset, LatentState]:
    """Simulate returns, log realized measures and the latent path.

    Returns
    -------
    (Dataset, LatentState)
        ``Dataset.x`` is ``None`` when ``with_rv`` is false.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    spec = params.shape
    draw = draw_standardized(spec.family, rng, n, nu=spec.nu, beta=spec.beta, delta=spec.delta, gamma=spec.gamma)
    sig = params.sigma_eta
    eta = params.rho * sig * draw.leverage + np.sqrt(1.0 - params.rho**2) * sig * rng.standard_normal(n)
    h1 = params.mu + sig / np.sqrt(1.0 - params.phi**2) * rng.standard_normal()
    h = _ar_path(params.mu, params.phi, h1, eta)
    y = draw.eps * np.exp(0.5 * h)
    x = params.xi + h + np.sqrt(params.sigma_u2) * rng.standard_normal(n) if with_rv else None
    return Dataset(y, x), LatentState(h=h, lam=draw.lam, z0=draw.z0)


def draw_prior(prior: PriorSpec, model: ModelSpec, rng: np.random.Generator) -> ModelParams:
    """Draw parameters from the prior (the ``nu`` prior truncated to its floor)."""
    fam = model.family

    def pm1(a, b):
        return 2.0 * rng.beta(a, b) - 1.0

    mu = rng.normal(prior.m_mu, np.sqrt(prior.s2_mu))
    phi = pm1(prior.a_phi, prior.b_phi)
    rho = pm1(prior.a_rho, prior.b_rho)
    sig2 = (prior.S_eta / 2.0) / rng.gamma(prior.n_eta / 2.0)
    xi = rng.normal(prior.m_xi, np.sqrt(prior.s2_xi))
    su2 = (prior.S_u / 2.0) / rng.gamma(prior.n_u / 2.0)
    kw = {}
    if fam.has_nu:
        nu = 0.0
        while not nu > fam.nu_floor:
            nu = rng.gamma(prior.nu_shape, 1.0 / prior.nu_rate)
        kw["nu"] = nu
    if fam.has_beta:
        kw["beta"] = rng.normal(0.0, np.sqrt(prior.s2_beta))
    if fam.has_delta:
        kw["delta"] = pm1(prior.a_delta, prior.b_delta)
    if fam.has_gamma:
        kw["gamma"] = rng.gamma(prior.gamma_shape, 1.0 / prior.gamma_rate)
    return ModelParams(mu, phi, rho, sig2, xi, su2, InnovationSpec(fam, **kw))


def _fs_eps_given_eta(spec: InnovationSpec, rho, sig, eta, rng):
    """Exact draw of eps_t | eta_t for the FS families by rejection."""
    nu = spec.nu if spec.family is Family.FS_SKEW_T else None
    kappa = 1.0 - rho**2
    mu_s, sd_s = fs_moments(spec.gamma, nu)
    log_qmax = float(fs_standardized_logpdf(-mu_s / sd_s, spec.gamma, nu))
    out = np.empty(eta.size)
    todo = np.arange(eta.size)
    batch = 16
    while todo.size:
        # several candidates per pending index; keep the first accepted one
        e = eta[todo][:, None]
        shape = (todo.size, batch)
        if rho**2 <= kappa:
            # propose from q, accept with the Gaussian factor
            cand = draw_standardized(spec.family, rng, shape, nu=nu, gamma=spec.gamma).eps
            log_acc = -0.5 * (e - rho * sig * cand) ** 2 / (kappa * sig**2)
        else:
            cand = rng.normal(e / (rho * sig), np.sqrt(kappa) / abs(rho), shape)
            log_acc = fs_standardized_logpdf(cand, spec.gamma, nu) - log_qmax
        ok = np.log(rng.random(shape)) < log_acc
        hit = ok.any(axis=1)
        first = ok.argmax(axis=1)
        out[todo[hit]] = cand[hit, first[hit]]
        todo = todo[~hit]
    return out


def regenerate_data(
    params: ModelParams,
    latent: LatentState,
    n: int,
    rng: np.random.Generator,
    with_rv: bool = True,
) -> Dataset:
    """Draw ``(y, x)`` from their conditional given the latent variables and parameters."""
    spec = params.shape
    fam = spec.family
    h = latent.h
    sig = params.sigma_eta
    rho = params.rho
    eta = h[1:] - params.mu - params.phi * (h[:-1] - params.mu)
    if fam.is_fs:
        eps = np.empty(n)
        eps[:-1] = _fs_eps_given_eta(spec, rho, sig, eta, rng)
        nu = spec.nu if fam is Family.FS_SKEW_T else None
        eps[-1] = draw_standardized(fam, rng, 1, nu=nu, gamma=spec.gamma).eps[0]
    else:
        z = np.empty(n)
        z[:-1] = rho * eta / sig + np.sqrt(1.0 - rho**2) * rng.standard_normal(n - 1)
        z[-1] = rng.standard_normal()
        m, s = mixture_mean_scale(fam, n, nu=spec.nu, beta=spec.beta, delta=spec.delta, lam=latent.lam, z0=latent.z0)
        eps = m + s * z
    y = eps * np.exp(0.5 * h)
    x = params.xi + h + np.sqrt(params.sigma_u2) * rng.standard_normal(n) if with_rv else None
    return Dataset(y, x)
