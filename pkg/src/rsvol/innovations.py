"""Standardized return-innovation distributions.

Every family here produces a shock with mean zero and unit variance, so that
``y_t = eps_t * exp(h_t / 2)`` keeps ``exp(h_t)`` as the conditional variance.
The Student-t, GH skew-t and Azzalini skew-t families are built as normal
scale (or mean-variance) mixtures over an inverse-gamma variable ``lam``;
the Fernandez-Steel families are two-piece scale-distorted densities.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

__all__ = [
    "C_HALF_NORMAL",
    "Family",
    "InnovationDraw",
    "InnovationSpec",
    "az_k",
    "az_moments",
    "corr_eps_eta",
    "draw_innovation",
    "draw_standardized",
    "fs_density",
    "fs_m1_m2",
    "fs_moments",
    "fs_standardized_density",
    "fs_standardized_logpdf",
    "inv_gamma_half_moment",
    "mu_lambda",
    "sigma_lambda2",
    "standardized_pdf",
    "t_logpdf",
]

#: Mean of a half-normal variable, ``E[z0] = sqrt(2 / pi)``.
C_HALF_NORMAL = float(np.sqrt(2.0 / np.pi))


class Family(str, enum.Enum):
    NORMAL = "N"
    STUDENT_T = "T"
    GH_SKEW_T = "GH-ST"
    AZ_SKEW_NORMAL = "AZ-SN"
    AZ_SKEW_T = "AZ-ST"
    FS_SKEW_NORMAL = "FS-SN"
    FS_SKEW_T = "FS-ST"

    @property
    def has_nu(self) -> bool:
        return self in (Family.STUDENT_T, Family.GH_SKEW_T, Family.AZ_SKEW_T, Family.FS_SKEW_T)

    @property
    def has_lambda(self) -> bool:
        """Inverse-gamma mixing variables are part of the latent state."""
        return self in (Family.STUDENT_T, Family.GH_SKEW_T, Family.AZ_SKEW_T)

    @property
    def has_z0(self) -> bool:
        return self in (Family.AZ_SKEW_NORMAL, Family.AZ_SKEW_T)

    @property
    def has_delta(self) -> bool:
        return self.has_z0

    @property
    def has_beta(self) -> bool:
        return self is Family.GH_SKEW_T

    @property
    def has_gamma(self) -> bool:
        return self.is_fs

    @property
    def is_fs(self) -> bool:
        return self in (Family.FS_SKEW_NORMAL, Family.FS_SKEW_T)

    @property
    def nu_floor(self) -> float:
        """Lower end of the support used for ``nu`` by priors and samplers."""
        if self is Family.GH_SKEW_T:
            return 4.001
        if self is Family.FS_SKEW_T:
            return 2.0
        return 2.001

    @property
    def shape_names(self) -> tuple[str, ...]:
        names = []
        if self.has_beta:
            names.append("beta")
        if self.has_delta:
            names.append("delta")
        if self.has_gamma:
            names.append("gamma")
        if self.has_nu:
            names.append("nu")
        return tuple(names)


@dataclass(frozen=True)
class InnovationSpec:
    """Family plus shape parameters. Unused shape fields are ignored."""

    family: Family = Family.NORMAL
    nu: float | None = None
    beta: float = 0.0
    delta: float = 0.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if fam.has_nu:
            if self.nu is None:
                raise ValueError(f"{fam.value} requires nu")
            lower = 4.0 if fam is Family.GH_SKEW_T else 2.0
            if not self.nu > lower:
                raise ValueError(f"nu must exceed {lower} for {fam.value}, got {self.nu}")
        if fam.has_delta and not abs(self.delta) < 1.0:
            raise ValueError(f"|delta| must be < 1, got {self.delta}")
        if fam.has_gamma and not self.gamma > 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if fam.has_beta and not np.isfinite(self.beta):
            raise ValueError("beta must be finite")


# ---------------------------------------------------------------------------
# mixing-variable moments


def mu_lambda(nu):
    """Mean ``nu / (nu - 2)`` of an IG(nu/2, nu/2) variable; 1 in the limit."""
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= 2.0):
        raise ValueError("mu_lambda requires nu > 2")
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(nu), 1.0, nu / (nu - 2.0))
    return out[()] if out.ndim == 0 else out


def sigma_lambda2(nu):
    """Variance ``2 nu^2 / ((nu - 2)^2 (nu - 4))`` of an IG(nu/2, nu/2) variable."""
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= 4.0):
        raise ValueError("sigma_lambda2 requires nu > 4")
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(nu), 0.0, 2.0 * nu**2 / ((nu - 2.0) ** 2 * (nu - 4.0)))
    return out[()] if out.ndim == 0 else out


def inv_gamma_half_moment(nu, m):
    """``E[lam^(m/2)]`` for ``lam ~ IG(nu/2, nu/2)``.

    Equals ``(nu/2)^(m/2) Gamma((nu-m)/2) / Gamma(nu/2)``; requires ``nu > m``.
    """
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= m):
        raise ValueError(f"E[lam^(m/2)] requires nu > m = {m}")
    finite = np.isfinite(nu)
    nu_f = np.where(finite, nu, m + 1.0)
    val = np.exp(
        0.5 * m * np.log(nu_f / 2.0) + special.gammaln((nu_f - m) / 2.0) - special.gammaln(nu_f / 2.0)
    )
    out = np.where(finite, val, 1.0)
    return out[()] if out.ndim == 0 else out


def az_k(delta):
    """``k(delta) = sqrt((1 - delta^2) / (1 - c^2 delta^2))``."""
    delta = np.asarray(delta, dtype=float)
    out = np.sqrt((1.0 - delta**2) / (1.0 - C_HALF_NORMAL**2 * delta**2))
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# densities


def t_logpdf(w, nu):
    """Log density of the (unit-scale) Student-t with ``nu`` degrees of freedom."""
    w = np.asarray(w, dtype=float)
    log_c = special.gammaln((nu + 1.0) / 2.0) - special.gammaln(nu / 2.0) - 0.5 * np.log(np.pi * nu)
    return log_c - 0.5 * (nu + 1.0) * np.log1p(w * w / nu)


def _base_logpdf(w, nu):
    if nu is None or np.isinf(nu):
        return -0.5 * np.log(2.0 * np.pi) - 0.5 * np.asarray(w, dtype=float) ** 2
    return t_logpdf(w, nu)


def fs_m1_m2(nu=None):
    """Half-line moments ``M1 = 2 int_0^inf w f(w) dw`` and ``M2`` of the base density.

    ``nu=None`` selects the standard normal base (skew-normal variant).
    """
    if nu is None or np.isinf(nu):
        return C_HALF_NORMAL, 1.0
    nu = float(nu)
    if nu <= 2.0:
        raise ValueError("FS moments require nu > 2")
    c_nu = np.exp(special.gammaln((nu + 1.0) / 2.0) - special.gammaln(nu / 2.0) - special.gammaln(0.5)) / np.sqrt(nu)
    return 2.0 * c_nu * nu / (nu - 1.0), nu / (nu - 2.0)


def fs_moments(gamma, nu=None):
    """Mean ``mu_*`` and standard deviation ``sigma_*`` of the raw FS density."""
    m1, m2 = fs_m1_m2(nu)
    gamma = np.asarray(gamma, dtype=float)
    g_inv = 1.0 / gamma
    mean = m1 * (gamma - g_inv)
    var = m2 * (gamma**3 + g_inv**3) / (gamma + g_inv) - mean**2
    sd = np.sqrt(var)
    if mean.ndim == 0:
        return float(mean), float(sd)
    return mean, sd


def fs_density(w, gamma, nu=None):
    """Raw (unstandardized) Fernandez-Steel skew density ``p(w | gamma, nu)``."""
    w = np.asarray(w, dtype=float)
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    arg = np.where(w >= 0.0, w / gamma, w * gamma)
    return 2.0 / (gamma + 1.0 / gamma) * np.exp(_base_logpdf(arg, nu))


def fs_standardized_logpdf(x, gamma, nu=None):
    """Log of the standardized FS density ``q(x | gamma, nu)`` (mean 0, variance 1).

    ``gamma`` and ``nu`` may be scalars; ``nu=None`` gives the FS skew-normal.
    """
    x = np.asarray(x, dtype=float)
    mu_s, sd_s = fs_moments(gamma, nu)
    u = sd_s * x + mu_s
    arg = np.where(u >= 0.0, u / gamma, u * gamma)
    return np.log(2.0 * sd_s / (gamma + 1.0 / gamma)) + _base_logpdf(arg, nu)


def fs_standardized_density(x, gamma, nu=None):
    return np.exp(fs_standardized_logpdf(x, gamma, nu))


def _student_std_pdf(x, nu):
    scale = np.sqrt(nu / (nu - 2.0))
    return scale * np.exp(t_logpdf(x * scale, nu))


def _az_shifted_sn_pdf(v, delta):
    # density of SN(delta) - c*delta, where SN = delta*z0 + sqrt(1-delta^2)*z
    s = v + C_HALF_NORMAL * delta
    alpha = delta / np.sqrt(1.0 - delta**2)
    return 2.0 * np.exp(-0.5 * s * s) / np.sqrt(2.0 * np.pi) * special.ndtr(alpha * s)


def _az_pdf(x, delta, nu):
    x = np.asarray(x, dtype=float)
    r = np.sqrt(1.0 - C_HALF_NORMAL**2 * delta**2)
    if nu is None:
        return r * _az_shifted_sn_pdf(r * x, delta)
    mu_l = nu / (nu - 2.0)
    a = nu / 2.0

    # integrate over u = 1/lam ~ Gamma(nu/2, rate nu/2)
    def integrand(u):
        scale = r * np.sqrt(u * mu_l)
        log_w = a * np.log(a) - special.gammaln(a) + (a - 1.0) * np.log(u) - a * u if u > 0 else -np.inf
        return np.exp(log_w) * scale * _az_shifted_sn_pdf(scale * x, delta)

    val, _ = integrate.quad_vec(integrand, 0.0, np.inf, epsabs=1e-14, epsrel=1e-11, limit=400)
    return val


def _gh_pdf(x, beta, nu):
    x = np.asarray(x, dtype=float)
    mu_l = nu / (nu - 2.0)
    d = np.sqrt(beta**2 * sigma_lambda2(nu) + mu_l)
    # eps = (X - beta*mu_l) / d where X = beta*lam + sqrt(lam)*z
    xx = d * x + beta * mu_l
    q = nu + xx * xx
    if abs(beta) < 1e-12:
        return d * np.exp(t_logpdf(xx, nu))
    p = 0.5 * (nu + 1.0)
    s = abs(beta) * np.sqrt(q)
    log_px = (
        -0.5 * np.log(2.0 * np.pi)
        + 0.5 * nu * np.log(nu / 2.0)
        - special.gammaln(nu / 2.0)
        + beta * xx
        + np.log(2.0)
        + 0.5 * p * (2.0 * np.log(abs(beta)) - np.log(q))
        + np.log(special.kve(p, s))
        - s
    )
    return d * np.exp(log_px)


def standardized_pdf(spec: InnovationSpec, x):
    """Density of the standardized innovation ``eps`` under ``spec``.

    Normal, Student-t, GH skew-t and both FS families have closed forms.
    The Azzalini skew-t density is integrated numerically over the
    inverse-gamma mixing variable.
    """
    fam = spec.family
    x = np.asarray(x, dtype=float)
    if fam is Family.NORMAL:
        return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    if fam is Family.STUDENT_T:
        return _student_std_pdf(x, spec.nu)
    if fam is Family.GH_SKEW_T:
        return _gh_pdf(x, spec.beta, spec.nu)
    if fam is Family.AZ_SKEW_NORMAL:
        return _az_pdf(x, spec.delta, None)
    if fam is Family.AZ_SKEW_T:
        return _az_pdf(x, spec.delta, spec.nu)
    if fam is Family.FS_SKEW_NORMAL:
        return fs_standardized_density(x, spec.gamma, None)
    return fs_standardized_density(x, spec.gamma, spec.nu)


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class InnovationDraw:
    """A standardized shock together with the auxiliaries used to build it."""

    eps: np.ndarray
    z: np.ndarray | None = None
    lam: np.ndarray | None = None
    z0: np.ndarray | None = None

    @property
    def leverage(self) -> np.ndarray:
        """Variable the volatility shock is correlated with (``z`` or ``eps``)."""
        return self.z if self.z is not None else self.eps


def _half_normal(rng: np.random.Generator, size):
    # inverse CDF of |N(0, 1)|
    return special.ndtri(0.5 + 0.5 * rng.random(size))


def _inverse_gamma(rng: np.random.Generator, nu, size):
    a = 0.5 * np.asarray(nu, dtype=float)
    return a / rng.gamma(a, 1.0, size)


def draw_standardized(family, rng: np.random.Generator, size, nu=None, beta=0.0, delta=0.0, gamma=1.0) -> InnovationDraw:
    """Vectorized draw where shape parameters may be arrays broadcast to ``size``."""
    fam = Family(family)
    if fam is Family.NORMAL:
        z = rng.standard_normal(size)
        return InnovationDraw(eps=z, z=z)
    if fam.is_fs:
        g = np.broadcast_to(np.asarray(gamma, dtype=float), size)
        if fam is Family.FS_SKEW_T:
            nu_arr = np.broadcast_to(np.asarray(nu, dtype=float), size)
            base = np.abs(rng.standard_t(nu_arr, size))
            m1, m2 = fs_m1_m2_array(nu_arr)
        else:
            base = np.abs(rng.standard_normal(size))
            m1, m2 = C_HALF_NORMAL, 1.0
        positive = rng.random(size) < g**2 / (1.0 + g**2)
        w = np.where(positive, base * g, -base / g)
        mean = m1 * (g - 1.0 / g)
        sd = np.sqrt(m2 * (g**3 + g**-3) / (g + 1.0 / g) - mean**2)
        return InnovationDraw(eps=(w - mean) / sd)

    z = rng.standard_normal(size)
    lam = None
    if fam.has_lambda:
        nu_arr = np.asarray(nu, dtype=float)
        lam = _inverse_gamma(rng, nu_arr, size)
        mu_l = nu_arr / (nu_arr - 2.0)
    if fam is Family.STUDENT_T:
        return InnovationDraw(eps=z * np.sqrt(lam / mu_l), z=z, lam=lam)
    if fam is Family.GH_SKEW_T:
        b = np.asarray(beta, dtype=float)
        d = np.sqrt(b**2 * sigma_lambda2(nu_arr) + mu_l)
        return InnovationDraw(eps=(b * (lam - mu_l) + np.sqrt(lam) * z) / d, z=z, lam=lam)
    d_ = np.asarray(delta, dtype=float)
    z0 = _half_normal(rng, size)
    eps = (d_ * (z0 - C_HALF_NORMAL) + np.sqrt(1.0 - d_**2) * z) / np.sqrt(1.0 - C_HALF_NORMAL**2 * d_**2)
    if fam is Family.AZ_SKEW_T:
        eps = eps * np.sqrt(lam / mu_l)
    return InnovationDraw(eps=eps, z=z, lam=lam, z0=z0)


def fs_m1_m2_array(nu):
    nu = np.asarray(nu, dtype=float)
    log_c = special.gammaln((nu + 1.0) / 2.0) - special.gammaln(nu / 2.0) - special.gammaln(0.5) - 0.5 * np.log(nu)
    return 2.0 * np.exp(log_c) * nu / (nu - 1.0), nu / (nu - 2.0)


def draw_innovation(spec: InnovationSpec, rng: np.random.Generator, size=None) -> InnovationDraw:
    """Draw standardized innovations (and their auxiliaries) from ``spec``."""
    return draw_standardized(spec.family, rng, size, nu=spec.nu, beta=spec.beta, delta=spec.delta, gamma=spec.gamma)


# ---------------------------------------------------------------------------
# moment identities


def az_moments(delta, nu=None):
    """Third and fourth moments of the standardized Azzalini skew-t shock.

    ``nu=None`` returns the skew-normal limits.
    """
    c = C_HALF_NORMAL
    r2 = 1.0 - c**2 * delta**2
    if nu is None or np.isinf(nu):
        tail3, tail4 = 1.0, 1.0
    else:
        if nu <= 4.0:
            raise ValueError("fourth moment requires nu > 4")
        tail3 = ((nu - 2.0) / 2.0) ** 1.5 * np.exp(special.gammaln((nu - 3.0) / 2.0) - special.gammaln(nu / 2.0))
        tail4 = (nu - 2.0) / (nu - 4.0)
    m3 = (4.0 - np.pi) / 2.0 * c**3 * delta**3 / r2**1.5 * tail3
    m4 = (3.0 + 2.0 * (np.pi - 3.0) * c**4 * delta**4 / r2**2) * tail4
    return float(m3), float(m4)


def corr_eps_eta(spec: InnovationSpec, rho: float) -> float:
    """Correlation between the return shock and the volatility shock."""
    if not abs(rho) < 1.0:
        raise ValueError("|rho| must be < 1")
    fam = spec.family
    if fam is Family.NORMAL or fam.is_fs:
        return float(rho)
    nu = spec.nu if fam.has_nu else np.inf
    e_sqrt = inv_gamma_half_moment(nu, 1)
    mu_l = mu_lambda(nu)
    if fam is Family.STUDENT_T:
        return float(e_sqrt / np.sqrt(mu_l) * rho)
    if fam is Family.GH_SKEW_T:
        return float(e_sqrt / np.sqrt(spec.beta**2 * sigma_lambda2(nu) + mu_l) * rho)
    k = az_k(spec.delta)
    return float(k / np.sqrt(mu_l) * e_sqrt * rho)
