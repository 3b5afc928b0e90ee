"""Causal graph types, separation oracles, equivalence classes and SHD."""

from .equivalence import dag_to_cpdag, dag_to_mag, mag_to_pag
from .io import dumps, loads, read_graph, write_graph
from .separation import d_separated, m_separated
from .shd import ShdReport, shd
from .types import (
    CPDAG,
    PAG,
    CausalDag,
    GraphError,
    Mag,
    Mark,
    Pattern,
    VariableMeta,
    random_er_dag,
)

__all__ = [
    "CPDAG",
    "PAG",
    "CausalDag",
    "GraphError",
    "Mag",
    "Mark",
    "Pattern",
    "ShdReport",
    "VariableMeta",
    "d_separated",
    "dag_to_cpdag",
    "dag_to_mag",
    "dumps",
    "loads",
    "m_separated",
    "mag_to_pag",
    "random_er_dag",
    "read_graph",
    "shd",
    "write_graph",
]
