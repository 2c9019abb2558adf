import itertools
import json

import networkx as nx
import pytest
from networkx.algorithms.isomorphism import MultiDiGraphMatcher

from ymlab.diagrams import (
    STRONG,
    WEAK,
    VacuumGraph,
    canonical_form,
    classify_connectivity,
    enumerate_vacuum_graphs,
    eom_expansion,
    isomorphic_bruteforce,
    to_json,
)
from ymlab.errors import InvalidGraphError, SizeError


def signature(g):
    return sorted(g.vertices), sorted(k for k, *_ in g.edges)


def test_one_loop_has_no_vacuum_graphs():
    assert enumerate_vacuum_graphs(1) == []
    assert enumerate_vacuum_graphs(1, "all") == []


def test_two_loop_census():
    graphs = enumerate_vacuum_graphs(2)
    assert len(graphs) == 3
    sigs = sorted(tuple(sorted(g.vertices)) for g in graphs)
    assert sigs == [("G3", "G3"), ("G4",), ("O3", "O3")]
    by = {tuple(sorted(g.vertices)): g for g in graphs}
    assert by[("G4",)].edges == (("gluon", 0, 0), ("gluon", 0, 0))
    assert by[("G3", "G3")].edges == (("gluon", 0, 1),) * 3
    ghost = by[("O3", "O3")]
    assert sorted(k for k, *_ in ghost.edges) == ["ghost", "ghost", "gluon"]
    assert all(g.loops == 2 and g.g_power == 2 and g.connectivity == STRONG for g in graphs)


def test_all_connected_includes_dumbbells():
    allg = enumerate_vacuum_graphs(2, "all")
    assert len(allg) == 6
    assert sum(g.connectivity == WEAK for g in allg) == 3


@pytest.mark.parametrize("L", [2, 3, 4])
def test_g_power_law_exhaustive(L):
    for g in enumerate_vacuum_graphs(L, "all"):
        assert g.g_power == 2 * (g.loops - 1)
        assert g.loops == len(g.edges) - len(g.vertices) + 1
        g.validate()


def test_ghost_lines_form_cycles():
    for g in enumerate_vacuum_graphs(4, "all"):
        succ = {t: h for k, t, h in g.edges if k == "ghost"}
        assert sorted(succ) == sorted(succ.values())          # permutation of O3 vertices
        assert sorted(succ) == [i for i, v in enumerate(g.vertices) if v == "O3"]


def _nx(g):
    G = nx.MultiDiGraph()
    for i, v in enumerate(g.vertices):
        G.add_node(i, kind=v, ext=g.stubs.count(i))
    for k, u, w in g.edges:
        G.add_edge(u, w, kind=k)
        if k == "gluon" and u != w:
            G.add_edge(w, u, kind=k)
    return G


def _nx_iso(a, b):
    return MultiDiGraphMatcher(_nx(a), _nx(b), node_match=lambda x, y: x == y,
                               edge_match=lambda x, y: sorted(d["kind"] for d in x.values())
                               == sorted(d["kind"] for d in y.values())).is_isomorphic()


@pytest.mark.parametrize("L", [2, 3])
def test_dedup_agrees_with_bruteforce(L):
    graphs = [g for g in enumerate_vacuum_graphs(L, "all")]
    for a, b in itertools.combinations(graphs, 2):
        assert not isomorphic_bruteforce(a, b)
        if signature(a) == signature(b):
            assert not _nx_iso(a, b)


def test_canonical_form_invariant_under_relabeling():
    import random
    rnd = random.Random(1)
    for g in enumerate_vacuum_graphs(3, "all"):
        V = len(g.vertices)
        for _ in range(3):
            p = list(range(V))
            rnd.shuffle(p)
            inv = {old: new for new, old in enumerate(p)}
            h = VacuumGraph([g.vertices[o] for o in p], [(k, inv[u], inv[w]) for k, u, w in g.edges],
                            [inv[s] for s in g.stubs])
            assert canonical_form(h) == canonical_form(g)
            assert isomorphic_bruteforce(g, h) and _nx_iso(g, h)


def test_completeness_against_bruteforce_pairings():
    # independent enumeration at L = 2 by matching legs explicitly
    found = []
    for verts in [("G4",), ("G3", "G3"), ("G3", "O3"), ("O3", "O3")]:
        legs = [(i, "g") for i, v in enumerate(verts) for _ in range({"G3": 3, "G4": 4, "O3": 1}[v])]
        oms = [i for i, v in enumerate(verts) if v == "O3"]

        def matchings(items):
            if not items:
                yield []
                return
            a = items[0]
            for j in range(1, len(items)):
                for rest in matchings(items[1:j] + items[j + 1:]):
                    yield [(a, items[j])] + rest

        for perm in itertools.permutations(oms):
            for m in matchings(legs):
                edges = [("gluon", a[0], b[0]) for a, b in m] + [("ghost", t, h) for t, h in zip(oms, perm)]
                g = VacuumGraph(verts, edges)
                if classify_connectivity(g) == "disconnected":
                    continue
                if not any(isomorphic_bruteforce(g, f) for f in found):
                    found.append(g)
    assert len(found) == len(enumerate_vacuum_graphs(2, "all"))


def test_classification_examples():
    eight = VacuumGraph(("G4",), [("gluon", 0, 0)] * 2)
    assert classify_connectivity(eight) == STRONG
    # two sunsets, each with a G3 inserted on one line, joined through those G3's
    half = [("gluon", 0, 1), ("gluon", 0, 1), ("gluon", 0, 2), ("gluon", 1, 2)]
    joined = VacuumGraph(("G3",) * 6, half + [(k, u + 3, w + 3) for k, u, w in half] + [("gluon", 2, 5)])
    assert classify_connectivity(joined) == WEAK
    ring = VacuumGraph(("G3",) * 4, [("gluon", 0, 1)] * 2 + [("gluon", 2, 3)] * 2
                       + [("gluon", 0, 2), ("gluon", 1, 3)])
    assert classify_connectivity(ring) == STRONG
    split = VacuumGraph(("G4", "G4"), [("gluon", 0, 0)] * 2 + [("gluon", 1, 1)] * 2)
    assert classify_connectivity(split) == "disconnected"


def test_invalid_graph():
    with pytest.raises(InvalidGraphError):
        classify_connectivity(VacuumGraph(("G3",), [("gluon", 0, 0)]))


def test_eom_one_loop():
    graphs = eom_expansion(1)
    assert graphs[0].vertices == ("G1",) and graphs[0].g_power == -1 and graphs[0].loops == 0
    loops = [g for g in graphs if g.loops == 1]
    assert len(loops) == 2
    assert sorted(g.vertices for g in loops) == [("G3",), ("O3",)]
    assert all(g.g_power == 1 for g in loops)


@pytest.mark.parametrize("L", [2, 3])
def test_eom_graphs_strong_with_one_stub(L):
    for g in eom_expansion(L)[1:]:
        assert g.n_external == 1
        assert classify_connectivity(g) == STRONG
        assert g.g_power == 2 * g.loops - 1


def test_budget():
    with pytest.raises(SizeError):
        enumerate_vacuum_graphs(6)
    with pytest.raises(SizeError):
        eom_expansion(5)


def test_json_and_text():
    graphs = enumerate_vacuum_graphs(2)
    data = json.loads(to_json(graphs))
    assert {d["class"] for d in data} == {STRONG}
    assert all("L=2 g^2" in g.text_art() for g in graphs)


def test_deterministic_order():
    a = [g.canonical() for g in enumerate_vacuum_graphs(3, "all")]
    b = [g.canonical() for g in enumerate_vacuum_graphs(3, "all")]
    assert a == b
