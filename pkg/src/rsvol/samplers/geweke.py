"""Joint-distribution ("getting it right") check of a posterior sampler.

Two simulators of ``p(theta, data)`` are compared.  The marginal-conditional
simulator draws ``theta`` from the prior directly; the successive-conditional
simulator alternates one sampler sweep ``theta, latents | data`` with a fresh
draw ``data | theta, latents``.  If every sampling step leaves the posterior
invariant, both produce the prior as the marginal of ``theta``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import Dataset, ModelSpec, PriorSpec, draw_prior, regenerate_data, simulate
from . import make_sampler
from .common import ChainState, batch_means_se

__all__ = ["GewekeResult", "geweke_test"]


@dataclass
class GewekeResult:
    names: list[str]
    prior_mean: dict[str, float]
    prior_se: dict[str, float]
    chain_mean: dict[str, float]
    chain_se: dict[str, float]

    def z(self, name: str) -> float:
        se = np.hypot(self.prior_se[name], self.chain_se[name])
        return float((self.chain_mean[name] - self.prior_mean[name]) / se)

    def passed(self, names=None, bound: float = 3.0) -> bool:
        names = self.names if names is None else names
        return all(abs(self.z(k)) < bound for k in names)


def _param_vector(params, names):
    d = params.as_dict()
    return [d[k] for k in names]


def geweke_test(
    model: ModelSpec,
    prior: PriorSpec,
    n_obs: int,
    n_iter: int,
    rng: np.random.Generator,
    n_prior: int | None = None,
    n_batches: int = 50,
) -> GewekeResult:
    """Compare prior means with successive-conditional chain means.

    Parameters
    ----------
    n_obs
        Length of each simulated data set.
    n_iter
        Iterations of the successive-conditional simulator.
    n_prior
        Independent prior draws (defaults to ``n_iter``).
    """
    n_prior = n_iter if n_prior is None else n_prior
    fam = model.family
    names = ["mu", "phi", "rho", "sigma_eta2"]
    if model.use_rv:
        names += ["xi", "sigma_u2"]
    names += list(fam.shape_names)

    prior_draws = np.array([_param_vector(draw_prior(prior, model, rng), names) for _ in range(n_prior)])

    params = draw_prior(prior, model, rng)
    data, latent = simulate(params, n_obs, rng, with_rv=model.use_rv)
    sampler = make_sampler(model, data, prior, ChainState.from_params(params, latent))
    chain = np.empty((n_iter, len(names)))
    for it in range(n_iter):
        sampler.sweep(rng)
        st = sampler.state
        params = st.params(fam)
        sampler.set_data(regenerate_data(params, st.latent(), n_obs, rng, with_rv=model.use_rv))
        chain[it] = [getattr(st, k) for k in names]

    return GewekeResult(
        names=names,
        prior_mean={k: float(prior_draws[:, i].mean()) for i, k in enumerate(names)},
        prior_se={k: float(prior_draws[:, i].std(ddof=1) / np.sqrt(n_prior)) for i, k in enumerate(names)},
        chain_mean={k: float(chain[:, i].mean()) for i, k in enumerate(names)},
        chain_se={k: batch_means_se(chain[:, i], n_batches) for i, k in enumerate(names)},
    )
