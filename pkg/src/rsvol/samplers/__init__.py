"""Posterior samplers for the SV and RSV model families."""

from ..model import Dataset, ModelSpec, PriorSpec
from .common import ChainConfig, ChainState, PosteriorDraws, batch_means_se, initial_state
from .fsst import FSSampler, run_chain_fsst
from .mixture import MixtureSampler, run_chain_azst, run_chain_mixture

__all__ = [
    "ChainConfig",
    "ChainState",
    "FSSampler",
    "MixtureSampler",
    "PosteriorDraws",
    "batch_means_se",
    "initial_state",
    "make_sampler",
    "run_chain",
    "run_chain_azst",
    "run_chain_fsst",
    "run_chain_mixture",
]


def make_sampler(model: ModelSpec, data: Dataset, prior: PriorSpec, state: ChainState):
    """Instantiate the sampler class matching ``model.family``."""
    cls = FSSampler if model.family.is_fs else MixtureSampler
    return cls(model, data, prior, state)


def run_chain(model: ModelSpec, data: Dataset, prior: PriorSpec | None = None,
              config: ChainConfig | None = None, init=None, rng=None) -> PosteriorDraws:
    """Dispatch to the sampler for ``model``."""
    if model.family.is_fs:
        return run_chain_fsst(data, prior, config, model=model, init=init, rng=rng)
    return run_chain_mixture(model, data, prior, config, init=init, rng=rng)
