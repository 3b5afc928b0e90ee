"""Constraint-based structure learners generic over a CI oracle."""

from .fci import fci_learn, possible_dsep
from .federated import (
    fci_centralized,
    fci_cit_voting,
    fci_voting,
    fedfci,
    fedpc,
    pc_centralized,
    pc_cit_voting,
    pc_voting,
    vote_patterns,
)
from .oracle import (
    CiOracle,
    OracleError,
    chi2_oracle,
    cit_voting_oracle,
    d_separation_oracle,
    fed_oracle,
    m_separation_oracle,
    vote,
)
from .pc import AUTO, LearnResult, default_max_cond, orient_pc, pc_learn, skeleton

__all__ = [
    "AUTO",
    "CiOracle",
    "LearnResult",
    "OracleError",
    "chi2_oracle",
    "cit_voting_oracle",
    "d_separation_oracle",
    "default_max_cond",
    "fci_centralized",
    "fci_cit_voting",
    "fci_learn",
    "fci_voting",
    "fed_oracle",
    "fedfci",
    "fedpc",
    "m_separation_oracle",
    "orient_pc",
    "pc_centralized",
    "pc_cit_voting",
    "pc_learn",
    "pc_voting",
    "possible_dsep",
    "skeleton",
    "vote",
    "vote_patterns",
]
