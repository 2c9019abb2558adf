"""Vacuum graphs and one-external-line (equation-of-motion) graphs of the loop expansion.

Vertices: G1 (one gluon leg, g^-1), G3 (three gluon legs, g), G4 (four gluon
legs, g^2) and O3 (one gluon leg, one ghost line out, one in, g).  Gluon edges
are undirected, ghost edges run from an O3 "out" leg to an O3 "in" leg.
Graphs are enumerated up to isomorphism without symmetry factors.

For closed graphs without G1 the leg count fixes L = (n3 + 2 n4 + nO)/2 + 1,
hence g-power 2(L - 1); with one external gluon stub the power is 2L - 1.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ymlab.errors import InvalidGraphError, SizeError


@dataclass(frozen=True)
class VertexKind:
    tag: str
    gluon_legs: int
    ghost_out: int
    ghost_in: int
    g_power: int
    label: str


VERTEX_KINDS = {
    "G1": VertexKind("G1", 1, 0, 0, -1, "Γ1"),
    "G3": VertexKind("G3", 3, 0, 0, 1, "Γ3"),
    "G4": VertexKind("G4", 4, 0, 0, 2, "Γ4"),
    "O3": VertexKind("O3", 1, 1, 1, 1, "Ω3"),
}
_ORDER = {"G1": 0, "G3": 1, "G4": 2, "O3": 3}

MAX_VACUUM_LOOPS = 5
MAX_EOM_LOOPS = 4

DISCONNECTED = "disconnected"
WEAK = "weakly connected"
STRONG = "strongly connected"


@dataclass
class VacuumGraph:
    """Typed multigraph; edges are ("gluon", u, v) with u <= v or ("ghost", tail, head)."""

    vertices: tuple
    edges: tuple
    stubs: tuple = ()                 # vertex index per external gluon line
    connectivity: str | None = None

    def __post_init__(self):
        self.vertices = tuple(self.vertices)
        self.edges = tuple(sorted(_norm_edge(e) for e in self.edges))
        self.stubs = tuple(sorted(self.stubs))

    @property
    def n_external(self) -> int:
        return len(self.stubs)

    @property
    def loops(self) -> int:
        """L = E - V + (number of components)."""
        return len(self.edges) - len(self.vertices) + _components(self)

    @property
    def g_power(self) -> int:
        return sum(VERTEX_KINDS[v].g_power for v in self.vertices)

    def validate(self) -> None:
        V = len(self.vertices)
        glu = [0] * V
        out = [0] * V
        inn = [0] * V
        for v in self.vertices:
            if v not in VERTEX_KINDS:
                raise InvalidGraphError(f"unknown vertex kind {v!r}")
        for kind, u, w in self.edges:
            if not (0 <= u < V and 0 <= w < V):
                raise InvalidGraphError(f"edge ({kind}, {u}, {w}) references a missing vertex")
            if kind == "gluon":
                glu[u] += 1
                glu[w] += 1
            elif kind == "ghost":
                out[u] += 1
                inn[w] += 1
            else:
                raise InvalidGraphError(f"unknown edge kind {kind!r}")
        for s in self.stubs:
            if not 0 <= s < V:
                raise InvalidGraphError(f"stub on missing vertex {s}")
            glu[s] += 1
        for i, v in enumerate(self.vertices):
            k = VERTEX_KINDS[v]
            if (glu[i], out[i], inn[i]) != (k.gluon_legs, k.ghost_out, k.ghost_in):
                raise InvalidGraphError(
                    f"vertex {i} ({v}) has legs gluon={glu[i]}, out={out[i]}, in={inn[i]}; "
                    f"expected {k.gluon_legs}, {k.ghost_out}, {k.ghost_in}")

    def canonical(self) -> tuple:
        return canonical_form(self)

    def to_dict(self) -> dict:
        return {
            "vertices": [VERTEX_KINDS[v].label for v in self.vertices],
            "edges": [list(e) for e in self.edges],
            "external": list(self.stubs),
            "loops": self.loops,
            "g_power": self.g_power,
            "class": self.connectivity or classify_connectivity(self),
        }

    def text_art(self) -> str:
        """One-line adjacency summary, e.g. ``L=2 g^2 [strongly connected] 0:Γ4 | 0=0 0=0``."""
        verts = " ".join(f"{i}:{VERTEX_KINDS[v].label}" for i, v in enumerate(self.vertices))
        edges = " ".join(f"{u}={w}" if k == "gluon" else f"{u}->{w}" for k, u, w in self.edges)
        ext = " ".join(f"{s}~ext" for s in self.stubs)
        parts = [f"L={self.loops} g^{self.g_power} [{self.connectivity or classify_connectivity(self)}]",
                 verts, "|", edges]
        if ext:
            parts += ["|", ext]
        return " ".join(p for p in parts if p)


def _norm_edge(e):
    kind, u, w = e
    if kind == "gluon" and u > w:
        u, w = w, u
    return (kind, int(u), int(w))


# ------------------------------------------------------------------ connectivity

def _adjacency(graph, skip=None):
    V = len(graph.vertices)
    nbr = [set() for _ in range(V)]
    for idx, (_, u, w) in enumerate(graph.edges):
        if idx != skip:
            nbr[u].add(w)
            nbr[w].add(u)
    return nbr


def _components(graph, skip=None) -> int:
    V = len(graph.vertices)
    nbr = _adjacency(graph, skip)
    seen = [False] * V
    count = 0
    for s in range(V):
        if seen[s]:
            continue
        count += 1
        stack = [s]
        seen[s] = True
        while stack:
            x = stack.pop()
            for y in nbr[x]:
                if not seen[y]:
                    seen[y] = True
                    stack.append(y)
    return count


def classify_connectivity(graph: VacuumGraph) -> str:
    """Strongly connected = connected and bridgeless; weakly = connected with a bridge."""
    graph.validate()
    if _components(graph) != 1:
        return DISCONNECTED
    for idx, (_, u, w) in enumerate(graph.edges):
        if u != w and _components(graph, skip=idx) > 1:
            return WEAK
    return STRONG


# ------------------------------------------------------------------ canonical form

def _invariants(graph):
    V = len(graph.vertices)
    A = np.zeros((V, V), dtype=int)   # gluon multiplicities, loops counted once on the diagonal
    G = np.zeros((V, V), dtype=int)   # ghost tail -> head
    for kind, u, w in graph.edges:
        if kind == "gluon":
            A[u, w] += 1
            if u != w:
                A[w, u] += 1
        else:
            G[u, w] += 1
    ext = np.zeros(V, dtype=int)
    for s in graph.stubs:
        ext[s] += 1
    return A, G, ext


def _refine(colors, A, G):
    """Iterated color refinement on the typed multigraph (1-WL)."""
    V = len(colors)
    while True:
        sigs = []
        for v in range(V):
            sig = (colors[v],
                   tuple(sorted((colors[u], A[v, u]) for u in range(V) if A[v, u])),
                   tuple(sorted((colors[u], G[v, u]) for u in range(V) if G[v, u])),
                   tuple(sorted((colors[u], G[u, v]) for u in range(V) if G[u, v])))
            sigs.append(sig)
        ranks = {s: r for r, s in enumerate(sorted(set(sigs)))}
        new = [ranks[s] for s in sigs]
        if len(set(new)) == len(set(colors)):
            return new
        colors = new


def canonical_form(graph: VacuumGraph) -> tuple:
    """Certificate equal for isomorphic graphs: refinement plus backtracking over ties."""
    A, G, ext = _invariants(graph)
    V = len(graph.vertices)
    init = [(_ORDER[graph.vertices[v]], int(ext[v])) for v in range(V)]
    ranks = {s: r for r, s in enumerate(sorted(set(init)))}
    best = None

    def certificate(order):
        p = np.array(order)
        return (tuple(graph.vertices[v] for v in order), tuple(int(ext[v]) for v in order),
                tuple(A[np.ix_(p, p)].ravel()), tuple(G[np.ix_(p, p)].ravel()))

    def search(colors):
        nonlocal best
        colors = _refine(colors, A, G)
        if len(set(colors)) == V:
            order = sorted(range(V), key=lambda v: colors[v])
            c = certificate(order)
            if best is None or c < best:
                best = c
            return
        counts = {}
        for c in colors:
            counts[c] = counts.get(c, 0) + 1
        target = min(c for c, k in counts.items() if k > 1)
        for v in range(V):
            if colors[v] == target:
                branched = [2 * c + 1 for c in colors]
                branched[v] = 2 * target      # individualize v ahead of its cell
                search(branched)

    if V == 0:
        return ((), (), (), ())
    search([ranks[s] for s in init])
    return best


def isomorphic_bruteforce(g1: VacuumGraph, g2: VacuumGraph) -> bool:
    """Reference isomorphism test over all vertex permutations."""
    if sorted(g1.vertices) != sorted(g2.vertices) or len(g1.edges) != len(g2.edges):
        return False
    A1, G1, e1 = _invariants(g1)
    A2, G2, e2 = _invariants(g2)
    V = len(g1.vertices)
    for perm in itertools.permutations(range(V)):
        p = np.array(perm, dtype=int)
        if any(g1.vertices[perm[i]] != g2.vertices[i] for i in range(V)):
            continue
        if (np.array_equal(A1[np.ix_(p, p)], A2) and np.array_equal(G1[np.ix_(p, p)], G2)
                and np.array_equal(e1[p], e2)):
            return True
    return False


# ------------------------------------------------------------------ enumeration

def _gluon_matrices(deg):
    """All symmetric multiplicity matrices (loops count 2 toward the degree) with given degrees."""
    V = len(deg)
    A = np.zeros((V, V), dtype=int)
    rem = list(deg)

    def fill(i, j):
        if i == V:
            yield A.copy()
            return
        if j == V:
            if rem[i] == 0:
                yield from fill(i + 1, i + 1)
            return
        if j == i:
            for k in range(rem[i] // 2, -1, -1):
                A[i, i] = k
                rem[i] -= 2 * k
                yield from fill(i, i + 1)
                rem[i] += 2 * k
            A[i, i] = 0
            return
        for k in range(min(rem[i], rem[j]), -1, -1):
            A[i, j] = A[j, i] = k
            rem[i] -= k
            rem[j] -= k
            yield from fill(i, j + 1)
            rem[i] += k
            rem[j] += k
        A[i, j] = A[j, i] = 0

    yield from fill(0, 0)


def _cycle_permutations(n):
    """One ghost permutation per cycle type (O3 vertices are interchangeable)."""
    for parts in _partitions(n):
        perm, start = [], 0
        for p in parts:
            perm += [start + (k + 1) % p for k in range(p)]
            start += p
        yield perm


def _partitions(n, largest=None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in _partitions(n - k, k):
            yield (k,) + rest


def _multisets(g_total):
    """(n3, n4, nO) with n3 + 2 n4 + nO = g_total."""
    for n4 in range(g_total // 2 + 1):
        for n3 in range(g_total - 2 * n4 + 1):
            yield n3, n4, g_total - 2 * n4 - n3


def _graphs_for(n3, n4, nO, n_stubs):
    verts = ("G3",) * n3 + ("G4",) * n4 + ("O3",) * nO
    V = len(verts)
    if V == 0:
        return
    deg0 = [VERTEX_KINDS[v].gluon_legs for v in verts]
    stub_choices = [()] if n_stubs == 0 else [(s,) for s in range(V)]
    for stubs in stub_choices:
        deg = list(deg0)
        for s in stubs:
            deg[s] -= 1
        if sum(deg) % 2:
            continue
        for perm in _cycle_permutations(nO):
            ghost = [("ghost", n3 + n4 + i, n3 + n4 + perm[i]) for i in range(nO)]
            for A in _gluon_matrices(deg):
                edges = list(ghost)
                for i in range(V):
                    for j in range(i, V):
                        edges += [("gluon", i, j)] * int(A[i, j])
                yield VacuumGraph(verts, edges, stubs)


def _enumerate(loops_max, n_stubs, loop_offset):
    found = {}
    for L in range(1, loops_max + 1):
        g_total = 2 * L - loop_offset
        for n3, n4, nO in _multisets(g_total):
            for graph in _graphs_for(n3, n4, nO, n_stubs):
                if _components(graph) != 1:
                    continue
                key = canonical_form(graph)
                if key not in found:
                    found[key] = graph
    out = []
    for key, graph in found.items():
        graph.connectivity = classify_connectivity(graph)
        out.append((graph.loops, len(graph.vertices), key, graph))
    out.sort(key=lambda x: x[:3])
    return [g for *_, g in out]


@lru_cache(maxsize=None)
def _vacuum_all(max_loops):
    return tuple(_enumerate(max_loops, 0, 2))


def enumerate_vacuum_graphs(max_loops: int, connectivity: str = "strong") -> list:
    """Isomorphism classes of closed connected graphs (no G1) with 1 <= L <= max_loops.

    ``connectivity="strong"`` keeps bridgeless graphs (the ones entering the
    exponent of the effective action); ``"all"`` also returns weakly connected ones.
    """
    if max_loops > MAX_VACUUM_LOOPS:
        raise SizeError(f"max_loops {max_loops} exceeds the budget {MAX_VACUUM_LOOPS}")
    if connectivity not in ("strong", "all"):
        raise ValueError(f"connectivity must be 'strong' or 'all', got {connectivity!r}")
    graphs = list(_vacuum_all(max(int(max_loops), 0))) if max_loops >= 1 else []
    if connectivity == "strong":
        graphs = [g for g in graphs if g.connectivity == STRONG]
    return graphs


def eom_expansion(max_loops: int) -> list:
    """Order-zero G1 term plus strongly connected one-stub graphs with L <= max_loops."""
    if max_loops > MAX_EOM_LOOPS:
        raise SizeError(f"max_loops {max_loops} exceeds the budget {MAX_EOM_LOOPS}")
    tree = VacuumGraph(("G1",), (), (0,), STRONG)
    graphs = [g for g in _enumerate(max(int(max_loops), 0), 1, 1) if g.connectivity == STRONG]
    return [tree] + graphs


def to_json(graphs) -> str:
    return json.dumps([g.to_dict() for g in graphs], indent=2, ensure_ascii=False)
