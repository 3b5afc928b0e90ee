"""Ground-truth equivalence classes: DAG -> CPDAG, DAG -> MAG, MAG -> PAG."""

from __future__ import annotations

from itertools import combinations
from typing import Iterable

import numpy as np

from .orientation import apply_fci_rules, apply_meek, unshielded_triples
from .separation import d_separated
from .types import CPDAG, PAG, CausalDag, GraphError, Mag, Mark, Pattern


def dag_to_cpdag(g: CausalDag) -> Pattern:
    """CPDAG of the Markov equivalence class of ``g``.

    Keeps the v-structures of ``g`` on its skeleton and completes with Meek's rules.
    """
    adj = g.skeleton()
    M = np.where(adj, Mark.TAIL, Mark.NONE).astype(np.int8)
    for x, z, y in unshielded_triples(adj):
        if g.marks[x, z] == Mark.ARROW and g.marks[y, z] == Mark.ARROW:
            M[x, z] = M[y, z] = Mark.ARROW
    apply_meek(M)
    return Pattern(M, CPDAG, g.names)


def dag_to_mag(g: CausalDag, latent: Iterable[int] = ()) -> Mag:
    """Marginalize ``g`` over ``latent`` into a MAG over the remaining nodes.

    Two observed nodes are adjacent iff no set of observed nodes d-separates
    them; it suffices to test their observed ancestors.  The mark at ``a`` is a
    tail when ``a`` is an ancestor of the other endpoint, an arrowhead otherwise.
    """
    latent = {int(v) for v in latent}
    g.check_node(*latent)
    observed = [v for v in range(g.d) if v not in latent]
    if not observed:
        raise GraphError("at least one node must stay observed")
    obs_set = set(observed)
    k = len(observed)
    anc = [g.ancestors([v]) for v in range(g.d)]
    M = np.zeros((k, k), dtype=np.int8)
    for i, j in combinations(range(k), 2):
        a, b = observed[i], observed[j]
        cond = ((anc[a] | anc[b]) & obs_set) - {a, b}
        if d_separated(g, a, b, cond):
            continue
        M[j, i] = Mark.TAIL if a in anc[b] else Mark.ARROW
        M[i, j] = Mark.TAIL if b in anc[a] else Mark.ARROW
    return Mag(M, [g.names[v] for v in observed])


def mag_to_pag(m: Mag) -> Pattern:
    """PAG of the Markov equivalence class of ``m``.

    Starts from the circle skeleton, marks the unshielded colliders of ``m``,
    then closes under the FCI rules with discriminating-path decisions read
    off ``m`` itself.
    """
    adj = m.skeleton()
    M = np.where(adj, Mark.CIRCLE, Mark.NONE).astype(np.int8)
    for x, z, y in unshielded_triples(adj):
        if m.marks[x, z] == Mark.ARROW and m.marks[y, z] == Mark.ARROW:
            M[x, z] = M[y, z] = Mark.ARROW

    def noncollider(theta, a, b, c):
        return not (m.marks[a, b] == Mark.ARROW and m.marks[c, b] == Mark.ARROW)

    apply_fci_rules(M, noncollider)
    return Pattern(M, PAG, m.names)
