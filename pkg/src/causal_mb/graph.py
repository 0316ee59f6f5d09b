"""Semi-Markovian causal models (mixed graphs) and their graph primitives.

Node names are interned into dense indices and every node set is handled
internally as a Python ``int`` bitmask, which has no size limit, so the same
code path serves small and large graphs.  Public functions accept and return
``frozenset`` objects of node names.
"""

from __future__ import annotations

import json
import re
from collections.abc import Iterable
from pathlib import Path

from .errors import GraphError


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class Smcm:
    """A mixed graph with directed (causal) and bidirected (confounding) edges.

    Parameters
    ----------
    nodes : iterable of str
        Variable identifiers; order is preserved.
    directed : iterable of (parent, child) pairs
    bidirected : iterable of unordered pairs
    treatment, outcome : str, optional
        When both are given the graph must contain ``treatment -> outcome`` and
        every other node must be a non-descendant of the treatment.
    latent : iterable of str
        Nodes that are unobserved.  See :func:`latent_projection`.

    Instances are immutable.
    """

    __slots__ = (
        "nodes", "directed", "bidirected", "treatment", "outcome", "latent",
        "_index", "_pa", "_ch", "_sp",
    )

    def __init__(self, nodes, directed=(), bidirected=(), treatment=None,
                 outcome=None, latent=(), *, _check_roles=True):
        nodes = tuple(nodes)
        index = {}
        for i, v in enumerate(nodes):
            if v in index:
                raise GraphError(f"duplicate node {v!r}")
            index[v] = i
        n = len(nodes)
        pa = [0] * n
        ch = [0] * n
        sp = [0] * n
        dset = set()
        for edge in directed:
            u, v = edge
            iu, iv = self._lookup(index, u), self._lookup(index, v)
            if iu == iv:
                raise GraphError(f"self-loop on {u!r}")
            if (u, v) in dset:
                raise GraphError(f"duplicate directed edge {u!r} -> {v!r}")
            dset.add((u, v))
            pa[iv] |= 1 << iu
            ch[iu] |= 1 << iv
        bset = set()
        for edge in bidirected:
            u, v = edge
            iu, iv = self._lookup(index, u), self._lookup(index, v)
            if iu == iv:
                raise GraphError(f"self-loop on {u!r}")
            key = (u, v) if iu < iv else (v, u)
            if key in bset:
                raise GraphError(f"duplicate bidirected edge {u!r} <-> {v!r}")
            bset.add(key)
            sp[iu] |= 1 << iv
            sp[iv] |= 1 << iu

        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_pa", tuple(pa))
        object.__setattr__(self, "_ch", tuple(ch))
        object.__setattr__(self, "_sp", tuple(sp))
        object.__setattr__(self, "directed", frozenset(dset))
        object.__setattr__(self, "bidirected", frozenset(bset))
        for role in (treatment, outcome):
            if role is not None:
                self._lookup(index, role)
        object.__setattr__(self, "treatment", treatment)
        object.__setattr__(self, "outcome", outcome)
        latent = frozenset(latent)
        for v in latent:
            self._lookup(index, v)
        if latent & {treatment, outcome} - {None}:
            raise GraphError("treatment and outcome cannot be latent")
        object.__setattr__(self, "latent", latent)

        if self._topological_order() is None:
            raise GraphError("directed part contains a cycle")
        if _check_roles and treatment is not None and outcome is not None:
            self._check_roles()

    def __setattr__(self, name, value):
        raise AttributeError("Smcm is immutable")

    @staticmethod
    def _lookup(index, v):
        try:
            return index[v]
        except KeyError:
            raise GraphError(f"unknown node {v!r}") from None

    def _topological_order(self):
        n = len(self.nodes)
        indeg = [bin(self._pa[i]).count("1") for i in range(n)]
        stack = [i for i in range(n) if indeg[i] == 0]
        order = []
        while stack:
            i = stack.pop()
            order.append(i)
            for c in _bits(self._ch[i]):
                indeg[c] -= 1
                if indeg[c] == 0:
                    stack.append(c)
        return order if len(order) == n else None

    def _check_roles(self):
        x, y = self.treatment, self.outcome
        if x == y:
            raise GraphError("treatment and outcome must differ")
        if (x, y) not in self.directed:
            raise GraphError(f"graph must contain {x!r} -> {y!r}")
        ix = self._index[x]
        others = self._desc_mask(1 << ix) & ~(1 << ix) & ~(1 << self._index[y])
        if others:
            bad = sorted(self.nodes[i] for i in _bits(others))
            raise GraphError(f"covariates must be pre-treatment; descendants of {x!r}: {bad}")

    # -- bitmask helpers -------------------------------------------------

    def index(self, v) -> int:
        return self._lookup(self._index, v)

    def mask(self, names: Iterable) -> int:
        m = 0
        for v in names:
            m |= 1 << self._lookup(self._index, v)
        return m

    def names(self, mask: int) -> frozenset:
        return frozenset(self.nodes[i] for i in _bits(mask))

    def _desc_mask(self, mask):
        seen, frontier = mask, mask
        while frontier:
            nxt = 0
            for i in _bits(frontier):
                nxt |= self._ch[i]
            frontier = nxt & ~seen
            seen |= frontier
        return seen

    def _anc_mask(self, mask):
        seen, frontier = mask, mask
        while frontier:
            nxt = 0
            for i in _bits(frontier):
                nxt |= self._pa[i]
            frontier = nxt & ~seen
            seen |= frontier
        return seen

    def _district_mask(self, i):
        seen, frontier = 1 << i, 1 << i
        while frontier:
            nxt = 0
            for j in _bits(frontier):
                nxt |= self._sp[j]
            frontier = nxt & ~seen
            seen |= frontier
        return seen

    # -- simple queries ----------------------------------------------------

    def parents(self, v) -> frozenset:
        return self.names(self._pa[self.index(v)])

    def children(self, v) -> frozenset:
        return self.names(self._ch[self.index(v)])

    def spouses(self, v) -> frozenset:
        """Nodes sharing a bidirected edge with ``v``."""
        return self.names(self._sp[self.index(v)])

    @property
    def observed(self) -> tuple:
        return tuple(v for v in self.nodes if v not in self.latent)

    def topological_order(self) -> tuple:
        return tuple(self.nodes[i] for i in self._topological_order())

    def edge_count(self) -> int:
        return len(self.directed) + len(self.bidirected)

    def _derive(self, directed=None, bidirected=None, *, keep_roles=False):
        return Smcm(
            self.nodes,
            self.directed if directed is None else directed,
            self.bidirected if bidirected is None else bidirected,
            treatment=self.treatment if keep_roles else None,
            outcome=self.outcome if keep_roles else None,
            latent=self.latent,
            _check_roles=False,
        )

    def with_roles(self, treatment, outcome) -> "Smcm":
        return Smcm(self.nodes, self.directed, self.bidirected,
                    treatment=treatment, outcome=outcome, latent=self.latent)

    def __eq__(self, other):
        if not isinstance(other, Smcm):
            return NotImplemented
        return (set(self.nodes) == set(other.nodes)
                and self.directed == other.directed
                and {frozenset(e) for e in self.bidirected}
                == {frozenset(e) for e in other.bidirected}
                and self.treatment == other.treatment
                and self.outcome == other.outcome
                and self.latent == other.latent)

    def __hash__(self):
        return hash((frozenset(self.nodes), self.directed,
                     frozenset(frozenset(e) for e in self.bidirected)))

    def __repr__(self):
        edges = sorted(f"{u}->{v}" for u, v in self.directed)
        edges += sorted(f"{u}<->{v}" for u, v in self.bidirected)
        return f"Smcm({', '.join(edges) or 'no edges'}; nodes={list(self.nodes)})"

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        order = self._index
        return {
            "nodes": list(self.nodes),
            "directed": sorted([list(e) for e in self.directed],
                               key=lambda e: (order[e[0]], order[e[1]])),
            "bidirected": sorted([list(e) for e in self.bidirected],
                                 key=lambda e: (order[e[0]], order[e[1]])),
            "treatment": self.treatment,
            "outcome": self.outcome,
            "latent": [v for v in self.nodes if v in self.latent],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Smcm":
        directed = [tuple(e) for e in d.get("directed", [])]
        bidirected = [tuple(e) for e in d.get("bidirected", [])]
        nodes = d.get("nodes")
        if nodes is None:
            nodes = []
            for e in directed + bidirected:
                for v in e:
                    if v not in nodes:
                        nodes.append(v)
        return cls(nodes, directed, bidirected, treatment=d.get("treatment"),
                   outcome=d.get("outcome"), latent=d.get("latent", ()))


_EDGE_RE = re.compile(r"^\s*(\S+)\s*(<->|->|<-)\s*(\S+)\s*$")
_ROLE_RE = re.compile(r"^\s*(treatment|outcome|latent|nodes)\s*[:=]\s*(.*)$")


def parse_text(text: str) -> Smcm:
    """Parse the line-oriented graph form.

    Each non-blank line is one of ``A -> B``, ``A <- B``, ``A <-> B``, or a
    directive ``treatment: X``, ``outcome: Y``, ``latent: A, B``,
    ``nodes: A, B, C`` (the last declares isolated nodes or fixes order).
    ``#`` starts a comment.
    """
    nodes, directed, bidirected = [], [], []
    roles = {"treatment": None, "outcome": None, "latent": []}

    def add(v):
        if v not in nodes:
            nodes.append(v)

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _ROLE_RE.match(line)
        if m:
            key, rest = m.groups()
            items = [s.strip() for s in rest.split(",") if s.strip()]
            if key in ("treatment", "outcome"):
                if len(items) != 1:
                    raise GraphError(f"line {lineno}: {key} takes one node")
                roles[key] = items[0]
                add(items[0])
            else:
                for v in items:
                    add(v)
                if key == "latent":
                    roles["latent"].extend(items)
            continue
        m = _EDGE_RE.match(line)
        if not m:
            raise GraphError(f"line {lineno}: cannot parse {raw!r}")
        u, op, v = m.groups()
        add(u)
        add(v)
        if op == "->":
            directed.append((u, v))
        elif op == "<-":
            directed.append((v, u))
        else:
            bidirected.append((u, v))
    return Smcm(nodes, directed, bidirected, **roles)


def load_graph(path) -> Smcm:
    """Read a graph from ``.json`` or from the text form (any other suffix)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return Smcm.from_dict(json.loads(text))
    return parse_text(text)


def save_graph(g: Smcm, path) -> None:
    Path(path).write_text(json.dumps(g.to_dict(), indent=2) + "\n")


# -- graph primitives ------------------------------------------------------


def descendants(g: Smcm, s) -> frozenset:
    """``s`` together with every node reachable from it along directed edges."""
    return g.names(g._desc_mask(g.mask(s)))


def ancestors(g: Smcm, s) -> frozenset:
    return g.names(g._anc_mask(g.mask(s)))


def district(g: Smcm, y) -> frozenset:
    """Nodes joined to ``y`` by a purely bidirected path (always contains ``y``)."""
    return g.names(g._district_mask(g.index(y)))


def remove_incoming(g: Smcm, x) -> Smcm:
    """Graph with every arrowhead into ``x`` removed (the do(x) graph)."""
    g.index(x)
    directed = [e for e in g.directed if e[1] != x]
    bidirected = [e for e in g.bidirected if x not in e]
    return g._derive(directed, bidirected)


def remove_outgoing(g: Smcm, x) -> Smcm:
    """Graph with every directed edge out of ``x`` removed."""
    g.index(x)
    return g._derive([e for e in g.directed if e[0] != x], g.bidirected)


def m_separated(g: Smcm, a, b, z) -> bool:
    """Return True iff ``z`` m-separates the node sets ``a`` and ``b`` in ``g``.

    Reachability search over (node, arrived-with-arrowhead) states: a walk may
    pass a non-collider only if it is outside ``z`` and a collider only if it
    is an ancestor of ``z``.
    """
    am, bm, zm = g.mask(a), g.mask(b), g.mask(z)
    if am & bm or am & zm or bm & zm:
        raise GraphError("a, b and z must be pairwise disjoint")
    if not am or not bm:
        return True
    anc_z = g._anc_mask(zm)
    pa, ch, sp = g._pa, g._ch, g._sp

    new_into = new_out = 0
    for i in _bits(am):
        new_into |= ch[i] | sp[i]
        new_out |= pa[i]
    seen_into = seen_out = 0
    while True:
        new_into &= ~seen_into
        new_out &= ~seen_out
        if not (new_into | new_out):
            return True
        if (new_into | new_out) & bm:
            return False
        seen_into |= new_into
        seen_out |= new_out
        nxt_into = nxt_out = 0
        for i in _bits(new_into):
            bit = 1 << i
            if not bit & zm:
                nxt_into |= ch[i]
            if bit & anc_z:
                nxt_into |= sp[i]
                nxt_out |= pa[i]
        for i in _bits(new_out & ~zm):
            nxt_into |= ch[i] | sp[i]
            nxt_out |= pa[i]
        new_into, new_out = nxt_into, nxt_out


def observational_mb(g: Smcm, y) -> frozenset:
    """Markov boundary of a childless ``y``.

    Parents of ``y``, the rest of its district, and the parents of every
    district member.  Latent nodes, if any, are projected out first.
    """
    g = observed_view(g)
    iy = g.index(y)
    if g._ch[iy]:
        raise GraphError(f"{y!r} has children {sorted(g.children(y))}; "
                         "covariates must be pre-treatment")
    dis = g._district_mask(iy)
    mb = g._pa[iy] | dis
    for i in _bits(dis):
        mb |= g._pa[i]
    return g.names(mb & ~(1 << iy))


def latent_projection(g: Smcm) -> Smcm:
    """Project latent nodes out of ``g``.

    ``u -> v`` survives when a directed path from ``u`` to ``v`` has only latent
    intermediates.  ``u <-> v`` appears when ``u`` and ``v`` share a latent
    ancestor through latent-only directed paths, or when such latent-only
    directed paths start at the two ends of an existing bidirected edge.
    """
    if not g.latent:
        return g
    lat = g.mask(g.latent)
    obs = [i for i in range(len(g.nodes)) if not (lat >> i) & 1]

    # latent nodes (plus the node itself) with a latent-only directed path into i
    origins = {}
    for i in obs:
        seen, frontier = 0, g._pa[i] & lat
        while frontier:
            seen |= frontier
            nxt = 0
            for j in _bits(frontier):
                nxt |= g._pa[j] & lat
            frontier = nxt & ~seen
        origins[i] = seen

    directed = []
    for i in obs:
        reach = g._pa[i] & ~lat
        for j in _bits(origins[i]):
            reach |= g._pa[j] & ~lat
        for j in _bits(reach):
            directed.append((g.nodes[j], g.nodes[i]))

    bidirected = []
    for a_pos, i in enumerate(obs):
        src_i = origins[i] | (1 << i)
        sp_i = 0
        for s in _bits(src_i):
            sp_i |= g._sp[s]
        for k in obs[a_pos + 1:]:
            src_k = origins[k] | (1 << k)
            if (origins[i] & origins[k]) or (sp_i & src_k):
                bidirected.append((g.nodes[i], g.nodes[k]))

    return Smcm([g.nodes[i] for i in obs], directed, bidirected,
                treatment=g.treatment, outcome=g.outcome)


def observed_view(g: Smcm) -> Smcm:
    return latent_projection(g) if g.latent else g
