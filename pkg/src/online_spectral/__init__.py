"""Online spectral learning for single-topic bag-of-words models."""

from .baseline_em import StepwiseEM
from .data import StreamConfig, gen_nonstochastic, gen_stochastic, load_corpus, oracle_stream
from .linalg import Whitener, build_whitener, sym_eig, unwhiten
from .model import TopicParams
from .moments import ExactModel, Reservoir, empirical_m2, empirical_whitened_t3
from .spectral import (
    OracleSpectralLearner,
    PowerConfig,
    SpectralLearner,
    offline_recover,
    recover_params,
    tensor_power_method,
)
from .tensor_core import OneHotTriple

__all__ = [
    "ExactModel",
    "OneHotTriple",
    "OracleSpectralLearner",
    "PowerConfig",
    "Reservoir",
    "SpectralLearner",
    "StepwiseEM",
    "StreamConfig",
    "TopicParams",
    "Whitener",
    "build_whitener",
    "empirical_m2",
    "empirical_whitened_t3",
    "gen_nonstochastic",
    "gen_stochastic",
    "load_corpus",
    "offline_recover",
    "oracle_stream",
    "recover_params",
    "sym_eig",
    "tensor_power_method",
    "unwhiten",
]
