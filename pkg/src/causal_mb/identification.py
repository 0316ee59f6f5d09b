"""Backdoor sets, identifiability of P(Y | do(X), W), and causal Markov boundaries.

Every covariate is assumed pre-treatment and ``X -> Y`` is assumed present.
Under those assumptions identifiability of a conditional interventional
distribution reduces to path queries on the graph, so no general
identification algorithm is needed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import combinations

from .errors import CapacityError, GraphError
from .graph import (
    Smcm,
    _bits,
    m_separated,
    observational_mb,
    observed_view,
    remove_incoming,
    remove_outgoing,
)

MAX_CMB_CANDIDATES = 20


class FailedCondition(str, enum.Enum):
    NOT_IDENTIFIABLE = "not_identifiable"
    REDUNDANT_OR_IDENTIFIABLE_SUPERSET = "redundant_or_identifiable_superset"
    NOT_MINIMAL = "not_minimal"


@dataclass(frozen=True)
class CmbReport:
    """Outcome of checking one candidate set against the CMB conditions.

    ``witness`` is the extra set W' that can be added without losing
    identifiability while changing the prediction (condition 2), or the
    smaller subset that predicts equally well (condition 3).
    """

    candidate: frozenset
    is_cmb: bool
    failed_condition: FailedCondition | None = None
    witness: frozenset | None = None

    def __post_init__(self):
        if self.is_cmb != (self.failed_condition is None):
            raise ValueError("is_cmb must hold exactly when no condition failed")
        needs_witness = self.failed_condition in (
            FailedCondition.REDUNDANT_OR_IDENTIFIABLE_SUPERSET,
            FailedCondition.NOT_MINIMAL,
        )
        if needs_witness != (self.witness is not None):
            raise ValueError("witness must accompany conditions 2 and 3 only")

    def to_dict(self) -> dict:
        return {
            "candidate": sorted(self.candidate),
            "is_cmb": self.is_cmb,
            "failed_condition": None if self.failed_condition is None
            else self.failed_condition.value,
            "witness": None if self.witness is None else sorted(self.witness),
        }


def _prepare(g: Smcm, x, y, w=()):
    g = observed_view(g)
    for v in (x, y, *w):
        g.index(v)
    if x == y:
        raise GraphError("treatment and outcome must differ")
    if x in w or y in w:
        raise GraphError("conditioning set may not contain treatment or outcome")
    return g


def is_backdoor_set(g: Smcm, x, y, w) -> bool:
    """True iff ``w`` m-separates ``x`` and ``y`` once edges out of ``x`` are cut."""
    w = frozenset(w)
    g = _prepare(g, x, y, w)
    return m_separated(remove_outgoing(g, x), {x}, {y}, w)


def _ancestor_bidirected_path(g: Smcm, x, y, w) -> bool:
    # X <-> V1 <-> ... <-> Vk <-> Y with every Vi an ancestor of w + {y}
    ix, iy = g.index(x), g.index(y)
    allowed = g._anc_mask(g.mask(w) | (1 << iy)) & ~(1 << ix) & ~(1 << iy)
    seen = 0
    frontier = g._sp[ix]
    while frontier:
        if frontier & (1 << iy):
            return True
        frontier &= allowed & ~seen
        seen |= frontier
        nxt = 0
        for i in _bits(frontier):
            nxt |= g._sp[i]
        frontier = nxt
    return False


def is_subset_of_backdoor(g: Smcm, x, y, w) -> bool:
    """True iff some superset of ``w`` within the covariates is a backdoor set.

    Decided without search: the answer is False exactly when a purely
    bidirected path joins ``x`` and ``y`` whose intermediate nodes all have a
    descendant in ``w`` or are ancestors of ``y``.  For pre-treatment ``w`` this
    is also the identifiability of P(y | do(x), w).
    """
    w = frozenset(w)
    g = _prepare(g, x, y, w)
    return not _ancestor_bidirected_path(g, x, y, w)


def interventional_mb(g: Smcm, x, y) -> frozenset:
    """Markov boundary of ``y`` after the intervention on ``x``."""
    g = _prepare(g, x, y)
    return observational_mb(remove_incoming(g, x), y)


class _CmbChecker:
    """Evaluates CMB conditions for many candidates against one graph."""

    def __init__(self, g: Smcm, x, y):
        self.g = _prepare(g, x, y)
        self.x, self.y = x, y
        self.g_do = remove_incoming(self.g, x)
        self.mb = observational_mb(self.g, y)
        self.pool = tuple(v for v in self.g.nodes if v in self.mb and v != x)

    def check(self, z) -> CmbReport:
        x, y = self.x, self.y
        z = frozenset(z)
        if x not in z:
            raise GraphError(f"candidate must contain the treatment {x!r}")
        w = z - {x}
        _prepare(self.g, x, y, w)

        if not is_backdoor_set(self.g, x, y, w):
            return CmbReport(z, False, FailedCondition.NOT_IDENTIFIABLE)

        # Condition 2: extra sets W' drawn from the rest of the Markov boundary
        rest = [v for v in self.pool if v not in w]
        for size in range(1, len(rest) + 1):
            for extra in combinations(rest, size):
                if m_separated(self.g_do, {y}, set(extra), w | {x}):
                    continue
                if is_subset_of_backdoor(self.g, x, y, w | set(extra)):
                    return CmbReport(
                        z, False, FailedCondition.REDUNDANT_OR_IDENTIFIABLE_SUPERSET,
                        witness=frozenset(extra),
                    )

        # Condition 3: no proper subset predicts equally well
        ordered = [v for v in self.g.nodes if v in w]
        for size in range(len(ordered)):
            for sub in combinations(ordered, size):
                sub = frozenset(sub)
                if m_separated(self.g_do, {y}, w - sub, sub | {x}):
                    return CmbReport(z, False, FailedCondition.NOT_MINIMAL,
                                     witness=sub | {x})
        return CmbReport(z, True)


def is_cmb(g: Smcm, x, y, z) -> CmbReport:
    """Check whether ``z`` (which must contain ``x``) is a causal Markov boundary."""
    return _CmbChecker(g, x, y).check(z)


def enumerate_cmbs(g: Smcm, x, y, *, max_candidates: int = MAX_CMB_CANDIDATES) -> list:
    """All causal Markov boundaries of ``y`` relative to ``x``.

    Only subsets of the observational Markov boundary are searched.  Returns
    a list of frozensets ordered by size, then by node order; it may be empty.
    """
    checker = _CmbChecker(g, x, y)
    pool = checker.pool
    if len(pool) > max_candidates:
        raise CapacityError(
            f"Markov boundary has {len(pool)} covariates; cap is {max_candidates}")
    found = []
    for size in range(len(pool) + 1):
        for sub in combinations(pool, size):
            z = frozenset(sub) | {x}
            if checker.check(z).is_cmb:
                found.append(z)
    return found


def check_all_candidates(g: Smcm, x, y, *, max_candidates: int = MAX_CMB_CANDIDATES) -> list:
    """CmbReport for every candidate subset of the Markov boundary (plus ``x``)."""
    checker = _CmbChecker(g, x, y)
    pool = checker.pool
    if len(pool) > max_candidates:
        raise CapacityError(
            f"Markov boundary has {len(pool)} covariates; cap is {max_candidates}")
    return [checker.check(frozenset(sub) | {x})
            for size in range(len(pool) + 1)
            for sub in combinations(pool, size)]
