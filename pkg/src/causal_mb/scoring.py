"""Count tables and Dirichlet-multinomial marginal likelihoods.

All scores are natural logarithms computed with ``gammaln``.  Count tables
are stored sparsely: only parent configurations seen in the data are kept,
since an empty configuration contributes exactly zero to every score.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import prod

import numpy as np
from scipy.special import gammaln

from .data import DiscreteDataset
from .errors import CapacityError, SchemaError

MAX_EXHAUSTIVE = 16
_DENSE_LIMIT = 1 << 22


@dataclass(frozen=True)
class PriorSpec:
    """Flat Dirichlet prior: ``alpha`` pseudo-counts in every cell."""

    alpha: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def alpha_j(self, r: int) -> float:
        return r * self.alpha


@dataclass(frozen=True, eq=False)
class CountTable:
    """Counts of ``outcome`` against configurations of ``z_vars``.

    Configuration codes are mixed-radix over ``z_vars`` in the given order
    with the last variable varying fastest (``np.ravel_multi_index`` order).
    ``configs`` holds the sorted codes that occur; ``counts[i, k]`` is the
    number of rows with configuration ``configs[i]`` and outcome ``k``.
    """

    outcome: str
    outcome_arity: int
    z_vars: tuple
    z_arities: tuple
    configs: np.ndarray
    counts: np.ndarray

    @property
    def r(self) -> int:
        return self.outcome_arity

    @property
    def q(self) -> int:
        return prod(self.z_arities)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_jk(self) -> np.ndarray:
        """Dense q x r count matrix."""
        if self.q * self.r > _DENSE_LIMIT:
            raise CapacityError(f"dense table would have {self.q * self.r} cells")
        out = np.zeros((self.q, self.r), dtype=np.int64)
        out[self.configs] = self.counts
        return out

    @property
    def n_j(self) -> np.ndarray:
        return self.n_jk.sum(axis=1)

    def encode(self, values) -> int:
        """Configuration index of a tuple of values for ``z_vars``."""
        values = tuple(int(v) for v in values)
        if len(values) != len(self.z_vars):
            raise SchemaError(f"expected {len(self.z_vars)} values, got {len(values)}")
        j = 0
        for v, a, name in zip(values, self.z_arities, self.z_vars):
            if not 0 <= v < a:
                raise SchemaError(f"value {v} out of range for {name!r} (arity {a})")
            j = j * a + v
        return j

    def decode(self, j: int) -> tuple:
        if not 0 <= j < self.q:
            raise SchemaError(f"configuration {j} out of range [0, {self.q})")
        out = []
        for a in reversed(self.z_arities):
            j, v = divmod(j, a)
            out.append(v)
        return tuple(reversed(out))

    def row(self, j: int) -> np.ndarray:
        """Counts for configuration ``j`` (zeros when unseen)."""
        if not 0 <= j < self.q:
            raise SchemaError(f"configuration {j} out of range [0, {self.q})")
        i = np.searchsorted(self.configs, j)
        if i < len(self.configs) and self.configs[i] == j:
            return self.counts[i]
        return np.zeros(self.r, dtype=np.int64)

    def same_schema(self, other: "CountTable") -> bool:
        return (self.outcome == other.outcome and self.outcome_arity == other.outcome_arity
                and self.z_vars == other.z_vars and self.z_arities == other.z_arities)

    def with_prior_counts(self, other: "CountTable") -> np.ndarray:
        """Counts of ``other`` aligned to this table's configurations."""
        i = np.searchsorted(other.configs, self.configs)
        i = np.minimum(i, max(len(other.configs) - 1, 0))
        aligned = np.zeros_like(self.counts)
        if len(other.configs):
            hit = other.configs[i] == self.configs
            aligned[hit] = other.counts[i[hit]]
        return aligned

    def merged(self, other: "CountTable") -> "CountTable":
        """Table of the concatenated data (cellwise sum)."""
        _require_same_schema(self, other)
        configs = np.union1d(self.configs, other.configs)
        counts = np.zeros((len(configs), self.r), dtype=np.int64)
        counts[np.searchsorted(configs, self.configs)] += self.counts
        counts[np.searchsorted(configs, other.configs)] += other.counts
        return CountTable(self.outcome, self.r, self.z_vars, self.z_arities, configs, counts)

    @classmethod
    def from_dense(cls, n_jk, outcome="Y", z_vars=None, z_arities=None) -> "CountTable":
        """Build a table from a dense q x r array (mainly for tests and file I/O)."""
        n_jk = np.asarray(n_jk, dtype=np.int64)
        if n_jk.ndim != 2 or (n_jk < 0).any():
            raise ValueError("n_jk must be a nonnegative 2-d array")
        q, r = n_jk.shape
        if z_vars is None:
            z_vars, z_arities = (("Z",), (q,)) if q > 1 else ((), ())
        if prod(z_arities) != q:
            raise ValueError("z_arities do not match the number of rows")
        keep = np.flatnonzero(n_jk.sum(axis=1))
        return cls(outcome, r, tuple(z_vars), tuple(z_arities), keep.astype(np.int64), n_jk[keep])

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "outcome_arity": self.r,
            "z_vars": list(self.z_vars),
            "z_arities": list(self.z_arities),
            "configs": self.configs.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CountTable":
        r = int(d["outcome_arity"])
        counts = np.asarray(d["counts"], dtype=np.int64).reshape(-1, r)
        return cls(d["outcome"], r, tuple(d["z_vars"]), tuple(d["z_arities"]),
                   np.asarray(d["configs"], dtype=np.int64), counts)


def _require_same_schema(a: CountTable, b: CountTable):
    if not a.same_schema(b):
        raise SchemaError("count tables have different outcome or conditioning schemas")


def config_codes(d: DiscreteDataset, z) -> np.ndarray:
    """Mixed-radix configuration code of every row of ``d`` over variables ``z``."""
    codes = np.zeros(len(d), dtype=np.int64)
    for name in z:
        codes = codes * d.arity(name) + d.column(name)
    return codes


def tabulate(d: DiscreteDataset, y, z) -> CountTable:
    """Count ``y`` against the joint configurations of ``z`` (in the given order)."""
    z = tuple(z)
    if y in z:
        raise SchemaError(f"outcome {y!r} cannot be in the conditioning set")
    if len(set(z)) != len(z):
        raise SchemaError("duplicate conditioning variables")
    r = d.arity(y)
    arities = tuple(d.arity(v) for v in z)
    q = prod(arities)
    if q >= 2 ** 62:
        raise CapacityError(f"{q} configurations exceed 64-bit coding")
    yk = d.column(y)
    codes = config_codes(d, z)
    if q * r <= _DENSE_LIMIT:
        dense = np.bincount(codes * r + yk, minlength=q * r).reshape(q, r)
        keep = np.flatnonzero(dense.sum(axis=1))
        return CountTable(y, r, z, arities, keep.astype(np.int64), dense[keep])
    configs, inverse = np.unique(codes, return_inverse=True)
    counts = np.zeros((len(configs), r), dtype=np.int64)
    np.add.at(counts, (inverse.ravel(), yk), 1)
    return CountTable(y, r, z, arities, configs.astype(np.int64), counts)


def _log_dirichlet_multinomial(counts: np.ndarray, alpha_cells) -> float:
    # sum_j [lnG(a_j) - lnG(a_j + N_j)] + sum_jk [lnG(a_jk + N_jk) - lnG(a_jk)]
    if counts.size == 0:
        return 0.0
    alpha_cells = np.broadcast_to(np.asarray(alpha_cells, dtype=float), counts.shape)
    a_j = alpha_cells.sum(axis=1)
    n_j = counts.sum(axis=1)
    per_config = gammaln(a_j) - gammaln(a_j + n_j)
    per_cell = gammaln(alpha_cells + counts) - gammaln(alpha_cells)
    return float(per_config.sum() + per_cell.sum())


def log_bd_score(t: CountTable, prior: PriorSpec = PriorSpec()) -> float:
    """log P(D | Z): the BD marginal likelihood of the outcome given ``Z``."""
    return _log_dirichlet_multinomial(t.counts, prior.alpha)


def log_ml_exp_prior(t_e: CountTable, prior: PriorSpec = PriorSpec()) -> float:
    """log P(D_e | D_o, not-CMB hypothesis): experimental data under the bare prior."""
    return _log_dirichlet_multinomial(t_e.counts, prior.alpha)


def log_ml_exp_given_obs(t_o: CountTable, t_e: CountTable,
                         prior: PriorSpec = PriorSpec()) -> float:
    """log P(D_e | D_o, CMB hypothesis).

    The observational posterior acts as the prior for the experimental counts:
    per-cell pseudo-counts become ``alpha + N_o``.
    """
    _require_same_schema(t_o, t_e)
    return _log_dirichlet_multinomial(t_e.counts, prior.alpha + t_e.with_prior_counts(t_o))


class _SubsetScorer:
    def __init__(self, d, y, candidates, prior):
        self.d, self.y, self.prior = d, y, prior
        self.candidates = tuple(sorted(candidates))
        self.cache = {}

    def __call__(self, subset) -> float:
        key = tuple(sorted(subset))
        if key not in self.cache:
            self.cache[key] = log_bd_score(tabulate(self.d, self.y, key), self.prior)
        return self.cache[key]


def _better(score, key, best_score, best_key):
    # higher score, then fewer variables, then lexicographic names
    if best_key is None or score > best_score:
        return True
    if score == best_score:
        return (len(key), key) < (len(best_key), best_key)
    return False


def fges_mb(d: DiscreteDataset, y, candidates, prior: PriorSpec = PriorSpec(),
            mode: str = "exhaustive", max_exhaustive: int = MAX_EXHAUSTIVE) -> frozenset:
    """Markov boundary of ``y`` by BD score of the one-child network ``Z -> y``.

    ``exhaustive`` scores every subset of ``candidates``.  ``greedy`` adds the
    best strictly improving variable until none improves, then removes
    variables while removal strictly improves.
    """
    candidates = tuple(dict.fromkeys(candidates))
    if y in candidates:
        raise SchemaError(f"outcome {y!r} cannot be a candidate")
    for v in (y, *candidates):
        d.position(v)
    score = _SubsetScorer(d, y, candidates, prior)
    pool = score.candidates

    if mode == "exhaustive":
        if len(pool) > max_exhaustive:
            raise CapacityError(f"{len(pool)} candidates exceed exhaustive cap {max_exhaustive}")
        best_key, best = None, None
        for size in range(len(pool) + 1):
            for key in combinations(pool, size):
                s = score(key)
                if _better(s, key, best, best_key):
                    best_key, best = key, s
        return frozenset(best_key)

    if mode != "greedy":
        raise ValueError(f"unknown mode {mode!r}")
    current = ()
    current_score = score(current)
    while True:
        best_key, best = None, None
        for v in pool:
            if v in current:
                continue
            key = tuple(sorted(current + (v,)))
            s = score(key)
            if s > current_score and _better(s, key, best, best_key):
                best_key, best = key, s
        if best_key is None:
            break
        current, current_score = best_key, best
    while current:
        best_key, best = None, None
        for v in current:
            key = tuple(u for u in current if u != v)
            s = score(key)
            if s > current_score and _better(s, key, best, best_key):
                best_key, best = key, s
        if best_key is None:
            break
        current, current_score = best_key, best
    return frozenset(current)
