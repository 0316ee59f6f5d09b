"""Independent brute-force oracles used only by the test-suite."""

from itertools import chain, combinations
import random

from causal_mb.graph import Smcm, m_separated, remove_incoming, remove_outgoing


def subsets(items):
    items = list(items)
    return chain.from_iterable(combinations(items, k) for k in range(len(items) + 1))


def _edges(g):
    # (u, v, arrowhead at u, arrowhead at v); parallel edges stay distinct
    out = [(u, v, False, True) for u, v in g.directed]
    out += [(u, v, True, True) for u, v in g.bidirected]
    return out


def _descendants(g, v):
    seen, stack = {v}, [v]
    while stack:
        u = stack.pop()
        for a, b in g.directed:
            if a == u and b not in seen:
                seen.add(b)
                stack.append(b)
    return seen


def simple_paths(g, a, b):
    """Every simple path from a to b as a list of (node, edge) steps."""
    edges = _edges(g)
    incident = {v: [] for v in g.nodes}
    for e in edges:
        incident[e[0]].append(e)
        incident[e[1]].append(e)

    def walk(node, visited, path):
        if node == b:
            yield list(path)
            return
        for e in incident[node]:
            nxt = e[1] if e[0] == node else e[0]
            if nxt in visited:
                continue
            path.append((node, e, nxt))
            visited.add(nxt)
            yield from walk(nxt, visited, path)
            visited.discard(nxt)
            path.pop()

    yield from walk(a, {a}, [])


def _head_at(e, node):
    return e[2] if e[0] == node else e[3]


def path_open(g, path, z):
    for (_, e_in, mid), (_, e_out, _) in zip(path, path[1:]):
        collider = _head_at(e_in, mid) and _head_at(e_out, mid)
        if collider:
            if not (_descendants(g, mid) & z):
                return False
        elif mid in z:
            return False
    return True


def m_separated_bruteforce(g, a, b, z):
    z = set(z)
    for s in a:
        for t in b:
            for p in simple_paths(g, s, t):
                if path_open(g, p, z):
                    return False
    return True


def random_smcm(rng: random.Random, n_cov=None, p_dir=0.4, p_bi=0.3, allow_xy_bi=True):
    """Random SMCM over covariates V1..Vk, then X, then Y, with X -> Y."""
    if n_cov is None:
        n_cov = rng.randint(0, 5)
    cov = [f"V{i}" for i in range(n_cov)]
    order = cov + ["X", "Y"]
    directed = [("X", "Y")]
    for i, u in enumerate(order):
        for v in order[i + 1:]:
            if u == "X":
                continue
            if rng.random() < p_dir:
                directed.append((u, v))
    bidirected = []
    for i, u in enumerate(order):
        for v in order[i + 1:]:
            if (u, v) == ("X", "Y") and not allow_xy_bi:
                continue
            if rng.random() < p_bi:
                bidirected.append((u, v))
    return Smcm(order, directed, bidirected, treatment="X", outcome="Y")


def identifiable_bruteforce(g, x, y, w, covariates):
    """Some superset of w within the covariates is a backdoor set (exhaustive)."""
    g_under = remove_outgoing(g, x)
    rest = [v for v in covariates if v not in w]
    return any(m_separated(g_under, {x}, {y}, set(w) | set(q)) for q in subsets(rest))


def cmbs_bruteforce(g, x, y):
    """Definition-level enumeration over every subset of the covariates."""
    cov = [v for v in g.nodes if v not in (x, y)]
    g_do = remove_incoming(g, x)
    found = set()
    for w in map(frozenset, subsets(cov)):
        if not identifiable_bruteforce(g, x, y, w, cov):
            continue
        others = [v for v in cov if v not in w]
        ok = True
        for extra in subsets(others):
            if not extra:
                continue
            if m_separated(g_do, {y}, set(extra), w | {x}):
                continue
            if identifiable_bruteforce(g, x, y, w | set(extra), cov):
                ok = False
                break
        if not ok:
            continue
        for sub in subsets(sorted(w)):
            sub = frozenset(sub)
            if sub == w:
                continue
            if m_separated(g_do, {y}, w - sub, sub | {x}):
                ok = False
                break
        if ok:
            found.add(w | {x})
    return found


def prequential_log_score(y_seq, j_seq, r, alpha, start=None):
    """Sum of log sequential Dirichlet predictives (N_jk + a) / (N_j + r a)."""
    import math
    counts = {} if start is None else {j: list(row) for j, row in start.items()}
    total = 0.0
    for y, j in zip(y_seq, j_seq):
        row = counts.setdefault(j, [0] * r)
        total += math.log((row[y] + alpha) / (sum(row) + r * alpha))
        row[y] += 1
    return total


def simplex_monomial_integral(b):
    """Integral of prod theta_k ** b_k over the probability simplex, numerically.

    Stick-breaking (theta_1 = u_1, theta_2 = (1 - u_1) u_2, ...) turns the
    simplex into a unit cube on which the monomial factorises, leaving a
    product of one-dimensional integrals evaluated by adaptive quadrature.
    """
    from scipy import integrate

    total = 1.0
    r = len(b)
    for k in range(r - 1):
        tail = sum(b[k + 1:]) + (r - 2 - k)
        total *= integrate.quad(lambda u: u ** b[k] * (1 - u) ** tail, 0, 1,
                                epsabs=0.0, epsrel=1e-12, limit=200)[0]
    return total


def log_marginal_quadrature(n_e, prior_cells):
    """log of integral P(counts | theta) Dir(theta | prior_cells) d theta, per row, summed.

    Both the likelihood integral and the Dirichlet normaliser are integrated
    numerically, so no Gamma function enters.
    """
    import math
    import numpy as np
    n_e = np.asarray(n_e)
    prior_cells = np.broadcast_to(np.asarray(prior_cells, dtype=float), n_e.shape)
    total = 0.0
    for counts, a in zip(n_e, prior_cells):
        if counts.sum() == 0:
            continue
        num = simplex_monomial_integral([ak - 1 + e for ak, e in zip(a, counts)])
        den = simplex_monomial_integral([ak - 1 for ak in a])
        total += math.log(num) - math.log(den)
    return total


def joint_enumeration(net, y, y_val, evidence, do=None):
    """P(y = y_val | evidence, do) by summing the full joint over every state."""
    from itertools import product as _product

    nodes = list(net.nodes)
    num = den = 0.0
    for states in _product(*[range(net.arities[v]) for v in nodes]):
        a = dict(zip(nodes, states))
        if any(a[v] != val for v, val in evidence.items()):
            continue
        if do is not None and a[do[0]] != do[1]:
            continue
        p = 1.0
        for v in nodes:
            if do is not None and v == do[0]:
                continue
            code = 0
            for u in net.parents[v]:
                code = code * net.arities[u] + a[u]
            p *= net.cpts[v][code, a[v]]
        den += p
        if a[y] == y_val:
            num += p
    return num / den


def auc_pairs(scores, labels):
    """AUC by comparing every positive with every negative (ties count half)."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l != 1]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def signed_rank_permutation_p(diffs, rng, n_perm=20000):
    """One-sided (diffs tend negative) p-value by random sign flips of the ranks."""
    import numpy as _np
    from scipy.stats import rankdata as _rankdata

    d = _np.asarray([v for v in diffs if v != 0], dtype=float)
    ranks = _rankdata(_np.abs(d))
    observed = ranks[d > 0].sum()
    signs = rng.integers(0, 2, size=(n_perm, len(d)))
    stats = (signs * ranks).sum(axis=1)
    return float((stats <= observed).mean())
