"""Causal Markov boundaries and fusion of observational with experimental data."""

__version__ = "0.1.0"

from .data import DiscreteDataset
from .errors import CapacityError, CausalMBError, GraphError, SchemaError, ZeroProbabilityEvidence
from .fusion import FusedModel, HypothesisWeight, find_imb, hypothesis_posteriors, posterior_predictive
from .graph import Smcm, latent_projection, m_separated, observational_mb
from .identification import enumerate_cmbs, interventional_mb, is_cmb, is_subset_of_backdoor
from .scoring import PriorSpec, fges_mb, log_bd_score, tabulate
from .simulation import DiscreteBayesNet, exact_posterior, m_bias_net, random_net, sample

__all__ = [
    "CapacityError", "CausalMBError", "DiscreteBayesNet", "DiscreteDataset", "FusedModel",
    "GraphError", "HypothesisWeight", "PriorSpec", "SchemaError", "Smcm",
    "ZeroProbabilityEvidence", "enumerate_cmbs", "exact_posterior", "fges_mb", "find_imb",
    "hypothesis_posteriors", "interventional_mb", "is_cmb", "is_subset_of_backdoor",
    "latent_projection", "log_bd_score", "m_bias_net", "m_separated", "observational_mb",
    "posterior_predictive", "random_net", "sample", "tabulate",
]
