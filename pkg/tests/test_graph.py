from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedcausal.graph import (
    CPDAG,
    PAG,
    CausalDag,
    GraphError,
    Mag,
    Mark,
    Pattern,
    d_separated,
    dag_to_cpdag,
    dag_to_mag,
    dumps,
    loads,
    m_separated,
    mag_to_pag,
    random_er_dag,
    shd,
)

from oracles import brute_connected, brute_cpdag_marks, brute_mag_adjacent, literal_shd, mec_members, powerset

A, B, C = 0, 1, 2


def _all_queries(d):
    for x, y in combinations(range(d), 2):
        rest = [v for v in range(d) if v not in (x, y)]
        for cond in powerset(rest):
            yield x, y, set(cond)


# --- d-separation ----------------------------------------------------------


def test_chain_blocked_by_middle():
    g = CausalDag(3, [(A, B), (B, C)])
    assert d_separated(g, A, C, {B})
    assert not d_separated(g, A, C, set())


def test_collider_rule():
    g = CausalDag(3, [(A, B), (C, B)])
    assert d_separated(g, A, C, set())
    assert not d_separated(g, A, C, {B})


def test_collider_opened_by_descendant():
    g = CausalDag(4, [(A, B), (C, B), (B, 3)])
    assert not d_separated(g, A, C, {3})


def test_observed_confounder():
    z, x, y = 0, 1, 2
    g = CausalDag(3, [(z, x), (z, y)])
    assert d_separated(g, x, y, {z})
    assert not d_separated(g, x, y, set())


def test_separation_argument_errors():
    g = CausalDag(3, [(A, B)])
    with pytest.raises(GraphError):
        d_separated(g, A, 5, set())
    with pytest.raises(GraphError):
        d_separated(g, A, A, set())
    with pytest.raises(GraphError):
        d_separated(g, A, B, {A})


@settings(max_examples=40, deadline=None)
@given(d=st.integers(2, 6), p=st.floats(0.2, 0.8), seed=st.integers(0, 10_000))
def test_d_separation_matches_path_enumeration(d, p, seed):
    g = random_er_dag(d, p, seed)
    for x, y, cond in _all_queries(d):
        assert d_separated(g, x, y, cond) == (not brute_connected(g.marks, x, y, cond))


# --- m-separation ----------------------------------------------------------


def _bidirected(d, pairs, directed=()):
    M = np.zeros((d, d), dtype=np.int8)
    for a, b in pairs:
        M[a, b] = M[b, a] = Mark.ARROW
    for a, b in directed:
        M[a, b], M[b, a] = Mark.ARROW, Mark.TAIL
    return Mag(M)


def test_m_separation_examples():
    x, z, y, w = 0, 1, 2, 3
    assert not m_separated(_bidirected(2, [(0, 1)]), 0, 1, set())
    m = _bidirected(3, [(x, z), (z, y)])
    assert m_separated(m, x, y, set())
    assert not m_separated(m, x, y, {z})
    # X -> W <-> Y with W conditioned: W is a collider in the conditioning set
    m = _bidirected(4, [(w, y)], directed=[(x, w)])
    assert not m_separated(m, x, y, {w})
    assert m_separated(m, x, y, set())


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n_latent=st.integers(0, 2))
def test_m_separation_matches_path_enumeration(seed, n_latent):
    g = random_er_dag(6, 0.5, seed)
    latent = np.random.default_rng(seed).choice(6, size=n_latent, replace=False)
    m = dag_to_mag(g, latent)
    for x, y, cond in _all_queries(m.d):
        assert m_separated(m, x, y, cond) == (not brute_connected(m.marks, x, y, cond))


def test_mag_rejects_almost_directed_cycle():
    with pytest.raises(GraphError):
        _bidirected(3, [(0, 2)], directed=[(0, 1), (1, 2)])
    with pytest.raises(GraphError):
        _bidirected(3, [], directed=[(0, 1), (1, 2), (2, 0)])


# --- CPDAG -----------------------------------------------------------------


def test_v_structure_is_kept():
    p = dag_to_cpdag(CausalDag(3, [(A, B), (C, B)]))
    assert p.directed_edges() == {(A, B), (C, B)}
    assert not p.undirected_edges()


def test_chain_becomes_undirected():
    p = dag_to_cpdag(CausalDag(3, [(A, B), (B, C)]))
    assert p.undirected_edges() == {(A, B), (B, C)}


def test_meek_r1_propagates():
    # A -> B <- C, B -> D must be compelled
    p = dag_to_cpdag(CausalDag(4, [(A, B), (C, B), (B, 3)]))
    assert (B, 3) in p.directed_edges()


@settings(max_examples=40, deadline=None)
@given(d=st.integers(2, 6), seed=st.integers(0, 10_000))
def test_cpdag_matches_mec_enumeration(d, seed):
    g = random_er_dag(d, 0.5, seed)
    assert np.array_equal(dag_to_cpdag(g).marks, brute_cpdag_marks(g))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_cpdag_invariant_across_mec(seed):
    g = random_er_dag(5, 0.5, seed)
    ref = dag_to_cpdag(g)
    for member in mec_members(g):
        assert dag_to_cpdag(member) == ref


# --- MAG / PAG -------------------------------------------------------------


def test_mag_without_latents_is_the_dag():
    g = random_er_dag(6, 0.5, 3)
    m = dag_to_mag(g, ())
    assert np.array_equal(m.marks, g.marks)


def test_latent_confounder_gives_bidirected_edge():
    z, x, y = 0, 1, 2
    m = dag_to_mag(CausalDag(3, [(z, x), (z, y)], names=["Z", "X", "Y"]), {z})
    assert m.names == ("X", "Y")
    assert m.marks[0, 1] == Mark.ARROW and m.marks[1, 0] == Mark.ARROW


def test_dag_to_mag_needs_an_observed_node():
    with pytest.raises(GraphError):
        dag_to_mag(CausalDag(2, [(0, 1)]), {0, 1})


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), p=st.floats(0.3, 0.7))
def test_mag_adjacency_matches_subset_enumeration(seed, p):
    g = random_er_dag(6, p, seed)
    latent = int(np.random.default_rng(seed).integers(6))
    m = dag_to_mag(g, {latent})
    observed = [v for v in range(6) if v != latent]
    anc = [g.ancestors([v]) for v in range(6)]
    for i, j in combinations(range(5), 2):
        a, b = observed[i], observed[j]
        assert m.adjacent(i, j) == brute_mag_adjacent(g, a, b, observed)
        if m.adjacent(i, j):
            assert (m.marks[j, i] == Mark.TAIL) == (a in anc[b])
            assert (m.marks[i, j] == Mark.TAIL) == (b in anc[a])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_mag_preserves_observed_separations(seed):
    g = random_er_dag(6, 0.5, seed)
    m = dag_to_mag(g, {0})
    for x, y, cond in _all_queries(5):
        assert m_separated(m, x, y, cond) == d_separated(g, x + 1, y + 1, {c + 1 for c in cond})


def test_pag_of_single_bidirected_edge():
    p = mag_to_pag(_bidirected(2, [(0, 1)]))
    assert p.kind == PAG
    assert p.marks[0, 1] == Mark.CIRCLE and p.marks[1, 0] == Mark.CIRCLE


def test_pag_keeps_unshielded_collider():
    x, z, y = 0, 1, 2
    p = mag_to_pag(_bidirected(3, [(z, y)], directed=[(x, z)]))
    assert p.marks[x, z] == Mark.ARROW and p.marks[y, z] == Mark.ARROW
    assert p.marks[z, x] == Mark.CIRCLE


def test_pag_orients_away_from_collider():
    # X -> Z <- Y, Z -> W: the PAG is X o-> Z <-o Y, Z -> W
    x, y, z, w = 0, 1, 2, 3
    p = mag_to_pag(CausalDag(4, [(x, z), (y, z), (z, w)]).to_mag())
    assert p.marks[z, w] == Mark.ARROW and p.marks[w, z] == Mark.TAIL


def test_pag_of_dag_refines_cpdag():
    """Arrowheads and tails of the PAG of a latent-free DAG agree with its CPDAG."""
    exceptions = 0
    for seed in range(60):
        g = random_er_dag(6, 0.4, seed)
        cp = dag_to_cpdag(g)
        pag = mag_to_pag(dag_to_mag(g, ()))
        assert np.array_equal(cp.skeleton(), pag.skeleton())
        definite = pag.marks != Mark.CIRCLE
        assert np.array_equal(pag.marks[definite], cp.marks[definite])
        relabeled = np.where(pag.marks == Mark.CIRCLE, Mark.TAIL, pag.marks)
        exceptions += not np.array_equal(relabeled, cp.marks)
    # exceptions are graphs where the CPDAG compels arrowheads a PAG cannot
    assert exceptions < 60


# --- SHD -------------------------------------------------------------------


def _pattern(d, spec, kind=CPDAG):
    M = np.zeros((d, d), dtype=np.int8)
    for a, b, ma, mb in spec:
        M[b, a], M[a, b] = ma, mb
    return Pattern(M, kind)


T, R, O = Mark.TAIL, Mark.ARROW, Mark.CIRCLE


def test_shd_examples():
    base = _pattern(3, [(0, 1, T, T)])
    assert shd(base, base).shd == 0
    plus = _pattern(3, [(0, 1, T, T), (1, 2, T, T)])
    r = shd(plus, base)
    assert (r.shd, r.extra, r.missing) == (1, 1, 0)
    directed = _pattern(3, [(0, 1, T, R)])
    assert shd(directed, base).mismatched == 1


def test_shd_rejects_mismatched_schema():
    with pytest.raises(GraphError):
        shd(Pattern.empty(3), Pattern.empty(4))
    with pytest.raises(GraphError):
        shd(Pattern.empty(3), Pattern.empty(3, PAG))


def _all_three_node_patterns():
    options = [None, (T, T), (T, R), (R, T)]
    for combo in product(options, repeat=3):
        spec = [(a, b, *e) for (a, b), e in zip(combinations(range(3), 2), combo) if e]
        yield _pattern(3, spec)


def test_shd_matches_literal_definition_on_all_three_node_patterns():
    pats = list(_all_three_node_patterns())
    for a in pats:
        for b in pats:
            r = shd(a, b)
            assert r.shd == literal_shd(a.marks, b.marks)
            assert r.shd == shd(b, a).shd
            assert r.shd == r.missing + r.extra + r.mismatched


@settings(max_examples=50, deadline=None)
@given(seeds=st.tuples(st.integers(0, 999), st.integers(0, 999), st.integers(0, 999)))
def test_shd_triangle_inequality(seeds):
    a, b, c = (dag_to_cpdag(random_er_dag(7, 0.4, s)) for s in seeds)
    assert shd(a, c).shd <= shd(a, b).shd + shd(b, c).shd
    assert shd(a, a).shd == 0


# --- ER generator ----------------------------------------------------------


def test_er_extremes():
    assert random_er_dag(6, 0.0, 1).n_edges() == 0
    assert random_er_dag(6, 1.0, 1).n_edges() == 15
    with pytest.raises(GraphError):
        random_er_dag(0, 0.5, 1)
    with pytest.raises(GraphError):
        random_er_dag(4, 1.5, 1)


def test_er_is_seed_deterministic():
    assert random_er_dag(10, 0.3, 7) == random_er_dag(10, 0.3, 7)


def test_er_edge_count_statistics():
    d, p = 50, 0.1
    pairs = d * (d - 1) // 2
    counts = np.array([random_er_dag(d, p, s).n_edges() for s in range(100)])
    sigma = np.sqrt(pairs * p * (1 - p) / len(counts))
    assert abs(counts.mean() - pairs * p) < 3 * sigma


def test_er_default_density_is_degree_two():
    counts = [random_er_dag(20, seed=s).n_edges() for s in range(50)]
    assert abs(np.mean(counts) - 20) < 3


# --- file format -----------------------------------------------------------


def test_graph_format_round_trip():
    g = random_er_dag(6, 0.5, 11)
    for obj in (g, dag_to_cpdag(g), dag_to_mag(g, {2}), mag_to_pag(dag_to_mag(g, {2}))):
        assert loads(dumps(obj)) == obj


def test_graph_format_parses_examples():
    g = loads("nodes: A,B,C,D\nA -> B\nB <-> C\nC o-o D\n")
    assert g.kind == PAG
    assert g.marks[0, 1] == Mark.ARROW and g.marks[1, 0] == Mark.TAIL
    assert g.marks[1, 2] == Mark.ARROW and g.marks[2, 1] == Mark.ARROW
    assert g.marks[2, 3] == Mark.CIRCLE


@pytest.mark.parametrize("text", ["A -> B\n", "nodes: A,B\nA => B\n", "nodes: A,B\nA -> Q\n", "nodes: A,B\nA -> B\nB -> A\n"])
def test_graph_format_errors(text):
    with pytest.raises(GraphError):
        loads(text)
