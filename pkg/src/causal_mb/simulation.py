"""Discrete Bayesian networks with latents: generation, sampling, exact inference.

Randomness comes from numpy's counter-based Philox generator keyed by the
integer seed, so a seed reproduces the same nets and samples on every
platform.
"""

from __future__ import annotations

import json
from itertools import product
from math import prod
from pathlib import Path

import numpy as np

from .data import DiscreteDataset
from .errors import GraphError, SchemaError, ZeroProbabilityEvidence
from .graph import Smcm, latent_projection

CPT_TOL = 1e-12
POSITIVITY_FLOOR = 1e-6


def make_rng(seed) -> np.random.Generator:
    """Philox-backed generator; ``seed`` may be an int or a SeedSequence."""
    return np.random.Generator(np.random.Philox(seed))


class DiscreteBayesNet:
    """DAG over categorical nodes with one conditional table per node.

    ``cpts[v]`` has shape ``(prod(parent arities), arity[v])``.  Row index is
    the mixed-radix code of the parent values in ``parents[v]`` order, last
    parent fastest.  ``nodes`` is kept in a topological order.
    """

    def __init__(self, nodes, parents, arities, cpts, latent=(), treatment=None,
                 outcome=None):
        self.parents = {v: tuple(parents.get(v, ())) for v in nodes}
        self.arities = {v: int(arities[v]) for v in nodes}
        self.latent = frozenset(latent)
        self.treatment = treatment
        self.outcome = outcome
        directed = [(p, v) for v in nodes for p in self.parents[v]]
        self.dag = Smcm(nodes, directed, latent=self.latent, treatment=treatment,
                        outcome=outcome)
        self.nodes = self.dag.topological_order() if not self._is_ordered(nodes) \
            else tuple(nodes)
        self.cpts = {}
        for v in self.nodes:
            cpt = np.array(cpts[v], dtype=float)
            shape = (prod(self.arities[p] for p in self.parents[v]), self.arities[v])
            if cpt.shape != shape:
                raise SchemaError(f"CPT of {v!r} has shape {cpt.shape}, expected {shape}")
            if (cpt < 0).any() or np.abs(cpt.sum(axis=1) - 1).max() > CPT_TOL:
                raise SchemaError(f"CPT rows of {v!r} must be nonnegative and sum to 1")
            cpt.setflags(write=False)
            self.cpts[v] = cpt

    def _is_ordered(self, nodes):
        seen = set()
        for v in nodes:
            if not set(self.parents[v]) <= seen:
                return False
            seen.add(v)
        return True

    @property
    def observed(self) -> tuple:
        return tuple(v for v in self.nodes if v not in self.latent)

    @property
    def covariates(self) -> tuple:
        return tuple(v for v in self.observed if v not in (self.treatment, self.outcome))

    def smcm(self) -> Smcm:
        """The latent-projected graph over observed nodes."""
        return latent_projection(self.dag)

    def parent_codes(self, v, values: dict) -> np.ndarray:
        code = 0
        for p in self.parents[v]:
            code = code * self.arities[p] + values[p]
        return code

    def intervened(self, node, value=None) -> "DiscreteBayesNet":
        """Mutilated net: ``node`` loses its parents and gets a point mass at
        ``value`` (or a uniform distribution when ``value`` is None)."""
        if node not in self.arities:
            raise GraphError(f"unknown node {node!r}")
        r = self.arities[node]
        if value is None:
            cpt = np.full((1, r), 1.0 / r)
        else:
            if not 0 <= value < r:
                raise SchemaError(f"value {value} out of range for {node!r}")
            cpt = np.zeros((1, r))
            cpt[0, value] = 1.0
        parents = dict(self.parents)
        parents[node] = ()
        cpts = dict(self.cpts)
        cpts[node] = cpt
        return DiscreteBayesNet(self.nodes, parents, self.arities, cpts, self.latent,
                                self.treatment, self.outcome)

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "arities": self.arities,
            "parents": {v: list(p) for v, p in self.parents.items()},
            "cpts": {v: c.tolist() for v, c in self.cpts.items()},
            "latent": [v for v in self.nodes if v in self.latent],
            "treatment": self.treatment,
            "outcome": self.outcome,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteBayesNet":
        return cls(d["nodes"], d["parents"], d["arities"], d["cpts"], d.get("latent", ()),
                   d.get("treatment"), d.get("outcome"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "DiscreteBayesNet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def edge_probability(n_nodes: int, mean_in_degree: float) -> float:
    """Bernoulli rate over ordered pairs that yields the target mean in-degree,
    accounting for the forced treatment -> outcome edge."""
    pairs = n_nodes * (n_nodes - 1) // 2
    if pairs <= 1:
        raise GraphError("need at least three nodes to sample edges")
    p = (mean_in_degree * n_nodes - 1) / (pairs - 1)
    if not 0 <= p <= 1:
        raise GraphError(f"mean in-degree {mean_in_degree} is infeasible for {n_nodes} nodes")
    return p


def _dirichlet_rows(rng, n_rows, r, floor):
    rows = rng.dirichlet(np.ones(r), size=n_rows)
    if floor:
        rows = np.maximum(rows, floor)
        rows /= rows.sum(axis=1, keepdims=True)
    return rows


def random_net(n_obs: int, n_lat: int, mean_in_degree: float = 2.0,
               arity_choices=(2, 3), seed=0) -> DiscreteBayesNet:
    """Random network with binary treatment ``X`` and outcome ``Y`` (X -> Y).

    ``n_obs`` counts the observed nodes including X and Y.  Covariates
    ``V0..`` precede X, which precedes Y; every other pair in that order gets
    an edge independently with the rate from :func:`edge_probability`.
    ``n_lat`` covariates, chosen uniformly, are marked latent.  CPT rows are
    flat-Dirichlet draws floored at 1e-6 and renormalised (strict positivity).
    """
    if n_obs < 2:
        raise GraphError("need at least the treatment and the outcome")
    if n_lat < 0:
        raise GraphError("latent count must be nonnegative")
    rng = make_rng(seed)
    n = n_obs + n_lat
    covs = [f"V{i}" for i in range(n - 2)]
    order = covs + ["X", "Y"]
    p = edge_probability(n, mean_in_degree) if n > 2 else 0.0
    parents = {v: [] for v in order}
    for j, v in enumerate(order):
        for u in order[:j]:
            if (u, v) == ("X", "Y"):
                parents[v].append(u)
            elif u != "X" and rng.random() < p:
                parents[v].append(u)
    arities = {v: int(rng.choice(arity_choices)) for v in covs}
    arities["X"] = arities["Y"] = 2
    latent = sorted(rng.choice(len(covs), size=n_lat, replace=False).tolist()) if n_lat else []
    cpts = {}
    for v in order:
        q = prod(arities[u] for u in parents[v])
        cpts[v] = _dirichlet_rows(rng, q, arities[v], POSITIVITY_FLOOR)
    return DiscreteBayesNet(order, parents, arities, cpts, [covs[i] for i in latent],
                            treatment="X", outcome="Y")


def m_bias_net(alpha: float) -> DiscreteBayesNet:
    """Five-node m-bias network A -> X -> Y, A -> M <- B -> Y with A, B latent.

    X, M and Y are noisy-AND gates: 1 with probability ``alpha`` when all
    parents are 1, otherwise 0.  P(A=1) = P(B=1) = 0.8.
    """
    if not 0.5 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0.5, 1], got {alpha}")

    def noisy_and(n_parents):
        rows = np.zeros((2 ** n_parents, 2))
        rows[:, 0] = 1.0
        rows[-1] = (1 - alpha, alpha)
        return rows

    parents = {"A": (), "B": (), "M": ("A", "B"), "X": ("A",), "Y": ("X", "B")}
    cpts = {
        "A": [[0.2, 0.8]],
        "B": [[0.2, 0.8]],
        "M": noisy_and(2),
        "X": noisy_and(1),
        "Y": noisy_and(2),
    }
    return DiscreteBayesNet(["A", "B", "M", "X", "Y"], parents, dict.fromkeys("ABMXY", 2),
                            cpts, latent=("A", "B"), treatment="X", outcome="Y")


def sample(net: DiscreteBayesNet, n: int, intervene=None, seed=0,
           provenance=None) -> DiscreteDataset:
    """Ancestral sample of ``n`` rows over the observed nodes.

    ``intervene`` is ``(node, policy)``: ``"uniform"`` draws the node i.i.d.
    uniformly; ``"balanced"`` assigns each category to n // arity rows (the
    remainder spread from category 0) in random order.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = make_rng(seed)
    node = policy = None
    if intervene is not None:
        node, policy = intervene
        if node not in net.arities:
            raise GraphError(f"unknown node {node!r}")
        if policy not in ("uniform", "balanced"):
            raise ValueError(f"unknown policy {policy!r}")
    values = {}
    for v in net.nodes:
        r = net.arities[v]
        if v == node:
            if policy == "balanced":
                values[v] = rng.permutation(np.arange(n) % r)
            else:
                values[v] = rng.integers(0, r, n)
            continue
        cum = np.cumsum(net.cpts[v], axis=1)[:, :-1]
        code = net.parent_codes(v, values)
        u = rng.random(n)
        if np.ndim(code) == 0:
            values[v] = (u[:, None] >= cum[code][None, :]).sum(axis=1)
        else:
            values[v] = (u[:, None] >= cum[code]).sum(axis=1)
    obs = net.observed
    if provenance is None:
        provenance = "observational" if intervene is None else "experimental"
    data = np.column_stack([values[v] for v in obs]) if n else None
    return DiscreteDataset([(v, net.arities[v]) for v in obs], data, provenance)


# -- exact inference -------------------------------------------------------


class _Factor:
    __slots__ = ("scope", "table")

    def __init__(self, scope, table):
        self.scope = tuple(scope)
        self.table = table


def _cpt_factor(net, v, evidence):
    pa = net.parents[v]
    table = net.cpts[v].reshape(*[net.arities[p] for p in pa], net.arities[v])
    scope = list(pa) + [v]
    index = tuple(evidence[s] if s in evidence else slice(None) for s in scope)
    return _Factor([s for s in scope if s not in evidence], table[index])


def _min_degree_order(factors, keep):
    neighbours = {}
    for f in factors:
        for s in f.scope:
            neighbours.setdefault(s, set()).update(f.scope)
    for s in neighbours:
        neighbours[s].discard(s)
    order = []
    remaining = {s for s in neighbours if s not in keep}
    while remaining:
        v = min(remaining, key=lambda s: (len(neighbours[s]), str(s)))
        nb = neighbours.pop(v)
        for a in nb:
            if a in neighbours:
                neighbours[a] |= nb - {a}
                neighbours[a].discard(v)
        remaining.discard(v)
        order.append(v)
    return order


def _multiply_sum_out(factors, var):
    scope = []
    for f in factors:
        for s in f.scope:
            if s not in scope:
                scope.append(s)
    ids = {s: i for i, s in enumerate(scope)}
    out = [s for s in scope if s != var]
    args = []
    for f in factors:
        args += [f.table, [ids[s] for s in f.scope]]
    table = np.einsum(*args, [ids[s] for s in out])
    return _Factor(out, table)


def exact_distribution(net: DiscreteBayesNet, y, evidence=None, do=None) -> np.ndarray:
    """P(y | evidence, do(node=value)) as a vector over the values of ``y``.

    Variable elimination with a min-degree ordering on the (optionally
    mutilated) full network, latent nodes included.
    """
    evidence = dict(evidence or {})
    if y not in net.arities:
        raise GraphError(f"unknown node {y!r}")
    if y in evidence:
        raise SchemaError("query variable cannot also be evidence")
    if do is not None:
        d_node, d_val = do
        if d_node in evidence:
            raise SchemaError("intervened node cannot also be evidence")
        net = net.intervened(d_node, d_val)
        evidence[d_node] = d_val
    for v, val in evidence.items():
        if v not in net.arities:
            raise GraphError(f"unknown node {v!r}")
        if not 0 <= val < net.arities[v]:
            raise SchemaError(f"value {val} out of range for {v!r}")

    relevant = set()
    stack = [y, *evidence]
    while stack:
        v = stack.pop()
        if v not in relevant:
            relevant.add(v)
            stack.extend(net.parents[v])
    factors = [_cpt_factor(net, v, evidence) for v in net.nodes if v in relevant]
    for var in _min_degree_order(factors, keep={y}):
        involved = [f for f in factors if var in f.scope]
        factors = [f for f in factors if var not in f.scope]
        factors.append(_multiply_sum_out(involved, var))
    result = np.ones(net.arities[y])
    scalar = 1.0
    for f in factors:
        if f.scope == (y,):
            result = result * f.table
        elif not f.scope:
            scalar *= float(f.table)
        else:
            raise AssertionError(f"unexpected leftover scope {f.scope}")
    result = result * scalar
    total = result.sum()
    if not total > 0:
        raise ZeroProbabilityEvidence(f"evidence {evidence} has probability zero")
    return result / total


def exact_posterior(net: DiscreteBayesNet, y, y_val, evidence=None, do=None) -> float:
    """P(y = y_val | evidence, do(...)) computed exactly."""
    dist = exact_distribution(net, y, evidence, do)
    if not 0 <= y_val < len(dist):
        raise SchemaError(f"value {y_val} out of range for {y!r}")
    return float(dist[y_val])


MAX_LATENT_CONFIGS = 1 << 14


def interventional_rows(net: DiscreteBayesNet, rows: DiscreteDataset) -> np.ndarray:
    """P(Y | do(X = x_i), v_i) for each row of fully observed test data.

    Returns an array of shape (n_rows, arity of Y).  Latent configurations are
    enumerated jointly for all rows; when there are too many, each distinct
    row falls back to :func:`exact_distribution`.
    """
    x, y = net.treatment, net.outcome
    lat = [v for v in net.nodes if v in net.latent]
    n_lat_configs = prod(net.arities[v] for v in lat)
    n = len(rows)
    r = net.arities[y]
    if n == 0:
        return np.zeros((0, r))
    if n_lat_configs > MAX_LATENT_CONFIGS:
        out = np.zeros((n, r))
        cache = {}
        cov = [v for v in rows.names if v not in (x, y)]
        for i in range(n):
            key = tuple(int(rows.column(v)[i]) for v in [x] + cov)
            if key not in cache:
                ev = dict(zip(cov, key[1:]))
                cache[key] = exact_distribution(net, y, ev, do=(x, key[0]))
            out[i] = cache[key]
        return out

    values = {v: rows.column(v)[None, :] for v in rows.names if v != y}
    grid = np.array(list(product(*[range(net.arities[v]) for v in lat])), dtype=np.int64)
    for i, v in enumerate(lat):
        values[v] = grid[:, i][:, None] if len(lat) else None
    joint = np.zeros((n, r))
    for k in range(r):
        values[y] = np.full((1, n), k)
        weight = np.ones((max(len(grid), 1), n))
        for v in net.nodes:
            if v == x:
                continue
            code = net.parent_codes(v, values)
            weight = weight * net.cpts[v][code, values[v]]
        joint[:, k] = weight.sum(axis=0)
    totals = joint.sum(axis=1, keepdims=True)
    if (totals <= 0).any():
        bad = int(np.flatnonzero(totals.ravel() <= 0)[0])
        raise ZeroProbabilityEvidence(f"test row {bad} has probability zero")
    return joint / totals


def observational_rows(net: DiscreteBayesNet, rows: DiscreteDataset) -> np.ndarray:
    """P(Y | X = x_i, v_i) without intervention, for each fully observed row."""
    x, y = net.treatment, net.outcome
    cov = [v for v in rows.names if v != y]
    out = np.zeros((len(rows), net.arities[y]))
    cache = {}
    for i in range(len(rows)):
        key = tuple(int(rows.column(v)[i]) for v in cov)
        if key not in cache:
            cache[key] = exact_distribution(net, y, dict(zip(cov, key)))
        out[i] = cache[key]
    return out
