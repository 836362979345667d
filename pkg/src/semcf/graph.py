"""Path diagrams: acyclic graphs with linear coefficients and correlated errors.

A :class:`PathDiagram` is immutable once built.  Vertex order is the
declaration order and every matrix elsewhere in the package is laid out by it.
Bidirected edges stand for correlated disturbances; d-separation treats each
one as a hidden common parent.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import (
    CycleError,
    DuplicateEdge,
    MissingEdge,
    NonfiniteCoefficient,
    OverlappingSets,
    PlanCovariateIsDescendant,
    ResponseNotDescendant,
    UnknownVertex,
    ZeroCoefficient,
)


class PathDiagram:
    """Validated DAG with path coefficients and bidirected (error) edges.

    Use :func:`build_diagram` to construct one.  A coefficient of ``None``
    marks an edge whose value is unknown; such diagrams are fine for
    graphical queries but cannot back a :class:`~semcf.sem.LinearSEM`.
    """

    __slots__ = (
        "_vertices", "_index", "_directed", "_bidirected",
        "_parents", "_children", "_siblings", "_topo",
    )

    def __init__(self, vertices, directed, bidirected, parents, children, siblings, topo):
        self._vertices = vertices
        self._index = {v: i for i, v in enumerate(vertices)}
        self._directed = directed
        self._bidirected = bidirected
        self._parents = parents
        self._children = children
        self._siblings = siblings
        self._topo = topo

    @property
    def vertices(self) -> tuple:
        return self._vertices

    @property
    def directed_edges(self) -> tuple:
        """``(from, to, coefficient)`` triples in declaration order."""
        return self._directed

    @property
    def bidirected_edges(self) -> tuple:
        """``(u, v, error_covariance)`` triples in declaration order."""
        return self._bidirected

    @property
    def topological_order(self) -> tuple:
        return self._topo

    def index(self, v) -> int:
        try:
            return self._index[v]
        except KeyError:
            raise UnknownVertex(f"unknown vertex {v!r}") from None

    def __contains__(self, v) -> bool:
        return v in self._index

    def __len__(self) -> int:
        return len(self._vertices)

    def parents(self, v) -> tuple:
        self.index(v)
        return self._parents[v]

    def children(self, v) -> tuple:
        self.index(v)
        return self._children[v]

    def siblings(self, v) -> tuple:
        """Vertices joined to ``v`` by a bidirected edge."""
        self.index(v)
        return self._siblings[v]

    def coefficient(self, source, target) -> Optional[float]:
        for u, v, c in self._directed:
            if u == source and v == target:
                return c
        raise MissingEdge(f"no edge {source} -> {target}")

    def has_edge(self, source, target) -> bool:
        return target in self._children.get(source, ())

    def sort(self, vs: Iterable) -> tuple:
        """Return ``vs`` as a tuple in declaration order."""
        vs = set(vs)
        for v in vs:
            self.index(v)
        return tuple(v for v in self._vertices if v in vs)

    def __repr__(self):
        edges = ", ".join(f"{u}->{v}" for u, v, _ in self._directed)
        bi = ", ".join(f"{u}<->{v}" for u, v, _ in self._bidirected)
        return f"PathDiagram(vertices={list(self._vertices)}, edges=[{edges}], bidirected=[{bi}])"

    def __eq__(self, other):
        if not isinstance(other, PathDiagram):
            return NotImplemented
        return (
            self._vertices == other._vertices
            and set(self._directed) == set(other._directed)
            and {(frozenset((u, v)), c) for u, v, c in self._bidirected}
            == {(frozenset((u, v)), c) for u, v, c in other._bidirected}
        )

    __hash__ = None


def _check_value(value, what, allow_zero):
    if value is None:
        return None
    value = float(value)
    if not math.isfinite(value):
        raise NonfiniteCoefficient(f"{what} has non-finite value {value}")
    if value == 0.0 and not allow_zero:
        raise ZeroCoefficient(f"{what} has a zero path coefficient")
    return value


def build_diagram(vertices, directed_edges=(), bidirected_edges=()) -> PathDiagram:
    """Validate and freeze a path diagram.

    ``directed_edges`` holds ``(from, to)`` or ``(from, to, coefficient)``
    tuples; ``bidirected_edges`` holds ``(u, v)`` or ``(u, v, covariance)``.

    >>> g = build_diagram(["Z", "X", "Y"], [("Z", "X", 1.0), ("Z", "Y", 1.0), ("X", "Y", 0.5)])
    >>> g.topological_order
    ('Z', 'X', 'Y')
    """
    vertices = tuple(vertices)
    if len(set(vertices)) != len(vertices):
        raise DuplicateEdge("duplicate vertex names")
    known = set(vertices)

    def check(v):
        if v not in known:
            raise UnknownVertex(f"edge endpoint {v!r} is not a declared vertex")

    parents = {v: [] for v in vertices}
    children = {v: [] for v in vertices}
    siblings = {v: [] for v in vertices}
    directed = []
    seen = set()
    for edge in directed_edges:
        u, v, *rest = edge
        check(u)
        check(v)
        if u == v:
            raise CycleError([u, u])
        if (u, v) in seen:
            raise DuplicateEdge(f"duplicate edge {u} -> {v}")
        seen.add((u, v))
        coef = _check_value(rest[0] if rest else None, f"edge {u}->{v}", allow_zero=False)
        directed.append((u, v, coef))
        parents[v].append(u)
        children[u].append(v)

    bidirected = []
    seen_bi = set()
    for edge in bidirected_edges:
        u, v, *rest = edge
        check(u)
        check(v)
        if u == v:
            raise DuplicateEdge(f"bidirected self-loop on {u}")
        key = frozenset((u, v))
        if key in seen_bi:
            raise DuplicateEdge(f"duplicate bidirected edge {u} <-> {v}")
        seen_bi.add(key)
        cov = _check_value(rest[0] if rest else None, f"error covariance {u}<->{v}", allow_zero=True)
        bidirected.append((u, v, cov))
        siblings[u].append(v)
        siblings[v].append(u)

    topo = _topological_sort(vertices, parents, children)
    order = {v: i for i, v in enumerate(vertices)}

    def freeze(d):
        return {k: tuple(sorted(vs, key=order.__getitem__)) for k, vs in d.items()}

    return PathDiagram(
        vertices, tuple(directed), tuple(bidirected),
        freeze(parents), freeze(children), freeze(siblings), topo,
    )


def _topological_sort(vertices, parents, children):
    # Kahn's algorithm; ties broken by declaration order.
    order = {v: i for i, v in enumerate(vertices)}
    indegree = {v: len(parents[v]) for v in vertices}
    ready = sorted((v for v in vertices if indegree[v] == 0), key=order.__getitem__)
    out = []
    while ready:
        v = ready.pop(0)
        out.append(v)
        for c in children[v]:
            indegree[c] -= 1
            if indegree[c] == 0:
                ready.append(c)
                ready.sort(key=order.__getitem__)
    if len(out) != len(vertices):
        raise CycleError(_find_cycle([v for v in vertices if indegree[v] > 0], children))
    return tuple(out)


def _find_cycle(remaining, children):
    remaining = set(remaining)
    start = next(iter(sorted(remaining, key=str)))
    path, on_path = [start], {start: 0}
    while True:
        nxt = next(c for c in children[path[-1]] if c in remaining)
        if nxt in on_path:
            return path[on_path[nxt]:] + [nxt]
        on_path[nxt] = len(path)
        path.append(nxt)


def _as_set(G, vs):
    if isinstance(vs, str) or not isinstance(vs, Iterable):
        vs = (vs,)
    vs = frozenset(vs)
    for v in vs:
        G.index(v)
    return vs


def descendants(G: PathDiagram, v) -> frozenset:
    """Vertices reachable from ``v`` by a directed path, excluding ``v``."""
    G.index(v)
    seen = set()
    queue = deque(G._children[v])
    while queue:
        u = queue.popleft()
        if u not in seen:
            seen.add(u)
            queue.extend(G._children[u])
    return frozenset(seen)


def ancestors(G: PathDiagram, vs) -> frozenset:
    """Vertices with a directed path into ``vs``, including ``vs`` itself."""
    seen = set(_as_set(G, vs))
    queue = deque(seen)
    while queue:
        u = queue.popleft()
        for p in G._parents[u]:
            if p not in seen:
                seen.add(p)
                queue.append(p)
    return frozenset(seen)


def _reachable(G, sources, given, removed=frozenset()):
    """Vertices d-connected to ``sources`` given ``given`` (Bayes-ball).

    Directed edges listed in ``removed`` are ignored.  Each bidirected edge
    u<->v is a hidden parent of u and v; hidden nodes are never conditioned
    on and never reported.
    """
    parents = {v: [p for p in G._parents[v] if (p, v) not in removed] for v in G._vertices}
    children = {v: [c for c in G._children[v] if (v, c) not in removed] for v in G._vertices}
    for k, (u, v, _) in enumerate(G._bidirected):
        latent = ("__latent__", k)
        parents[latent] = []
        children[latent] = [u, v]
        parents[u].append(latent)
        parents[v].append(latent)

    # Ancestors of the conditioning set decide whether a collider is open.
    anc = set(given)
    queue = deque(given)
    while queue:
        u = queue.popleft()
        for p in parents[u]:
            if p not in anc:
                anc.add(p)
                queue.append(p)

    reached = set()
    visited = set()
    queue = deque((s, "up") for s in sources)
    while queue:
        node, direction = queue.popleft()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in given:
            reached.add(node)
        if direction == "up":
            if node in given:
                continue
            queue.extend((p, "up") for p in parents[node])
            queue.extend((c, "down") for c in children[node])
        else:
            if node not in given:
                queue.extend((c, "down") for c in children[node])
            if node in anc:
                queue.extend((p, "up") for p in parents[node])
    return {v for v in reached if not isinstance(v, tuple)}


def _dsep(G, a, b, z, removed=frozenset()):
    return not (_reachable(G, a, z, removed) & b)


def _disjoint(*sets):
    total = sum(len(s) for s in sets)
    if len(frozenset().union(*sets)) != total:
        raise OverlappingSets("vertex sets must be pairwise disjoint")


def d_separated(G: PathDiagram, a, b, z=()) -> bool:
    """True iff ``z`` blocks every path between ``a`` and ``b``.

    >>> g = build_diagram(["X", "C", "Y"], [("X", "C", 1.0), ("Y", "C", 1.0)])
    >>> d_separated(g, "X", "Y"), d_separated(g, "X", "Y", {"C"})
    (True, False)
    """
    a, b, z = _as_set(G, a), _as_set(G, b), _as_set(G, z)
    _disjoint(a, b, z)
    return _dsep(G, a, b, z)


def _outgoing(G, x):
    return frozenset((x, c) for c in G._children[x])


def backdoor_admissible(G: PathDiagram, x, y, t=()) -> bool:
    """Back-door test: ``t`` holds no descendant of ``x`` and blocks ``x``
    from ``y`` once the arrows out of ``x`` are deleted."""
    t = _as_set(G, t)
    G.index(x)
    G.index(y)
    _disjoint({x}, {y}, t)
    if t & descendants(G, x):
        return False
    return _dsep(G, {x}, {y}, t, removed=_outgoing(G, x))


def conditional_iv(G: PathDiagram, x, y, z, t=()) -> bool:
    """Conditional instrument test for ``z`` given ``t`` relative to (x, y).

    Requires ``t`` to avoid descendants of ``y`` and of ``x``, and ``z`` to
    be a nondescendant of ``x``.  With arrows out of ``x`` deleted, ``t``
    must separate ``z`` from ``y`` but leave ``z`` connected to ``x``.
    An instrument equal to ``x`` or ``y`` is never valid.
    """
    t = _as_set(G, t)
    for v in (x, y, z):
        G.index(v)
    if z in (x, y):
        return False
    _disjoint({x}, {y}, {z}, t)
    desc_x = descendants(G, x)
    if z in desc_x or t & (descendants(G, y) | desc_x):
        return False
    removed = _outgoing(G, x)
    return _dsep(G, {z}, {y}, t, removed) and not _dsep(G, {z}, {x}, t, removed)


def single_door(G: PathDiagram, vi, vj, z=()) -> bool:
    """Single-door test for the coefficient of edge ``vi -> vj``."""
    z = _as_set(G, z)
    G.index(vi)
    G.index(vj)
    if not G.has_edge(vi, vj):
        raise MissingEdge(f"no edge {vi} -> {vj}")
    _disjoint({vi}, {vj}, z)
    if z & descendants(G, vj):
        return False
    return _dsep(G, {vi}, {vj}, z, removed=frozenset({(vi, vj)}))


@dataclass(frozen=True)
class VertexPartition:
    """Split of the vertices into descendants of X (response first), X, and
    the rest; the rest is divided into plan covariates ``w`` and ``z``."""

    s: tuple
    x: object
    z: tuple
    w: tuple

    @property
    def t(self) -> tuple:
        return self.z + self.w

    @property
    def y(self):
        return self.s[0]

    @property
    def u(self) -> tuple:
        return self.s[1:]


def partition(G: PathDiagram, x, y, w=()) -> VertexPartition:
    """Partition ``G`` for treatment ``x`` and response ``y``.

    ``w`` keeps the caller's order (it indexes plan coefficients); every other
    block follows declaration order.
    """
    G.index(x)
    G.index(y)
    w = (w,) if isinstance(w, str) else tuple(dict.fromkeys(w))
    for v in w:
        G.index(v)
    desc = descendants(G, x)
    if y not in desc:
        raise ResponseNotDescendant(f"{y!r} is not a descendant of {x!r}")
    bad = [v for v in w if v in desc or v == x]
    if bad:
        raise PlanCovariateIsDescendant(f"plan covariates {bad} are {x!r} or its descendants")
    s = (y,) + tuple(v for v in G.vertices if v in desc and v != y)
    wset = set(w)
    z = tuple(v for v in G.vertices if v not in desc and v != x and v not in wset)
    return VertexPartition(s=s, x=x, z=z, w=w)
