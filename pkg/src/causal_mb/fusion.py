"""Fusing observational and experimental data to estimate P(Y | do(X), V).

For every Z with X in Z and Z inside the committed observational boundary
U*, hypothesis ``cbar`` says the experimental distribution P(Y | do(X), Z\\X)
has its own parameters.  The single hypothesis ``c`` says it equals the
observational P(Y | X, U*\\X), so observational counts act as prior counts.
Other (Z, c) pairs have zero probability once U* is committed and are never
built.  Predictions average the per-hypothesis Dirichlet means.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path

import numpy as np

from .data import DiscreteDataset
from .errors import SchemaError
from .scoring import (
    MAX_EXHAUSTIVE,
    CountTable,
    PriorSpec,
    fges_mb,
    log_bd_score,
    log_ml_exp_given_obs,
    log_ml_exp_prior,
    tabulate,
)


class Flag(str, enum.Enum):
    C = "c"
    CBAR = "cbar"


@dataclass(frozen=True)
class HypothesisWeight:
    z: frozenset
    flag: Flag
    log_unnormalized: float
    posterior: float

    def to_dict(self) -> dict:
        return {"z": sorted(self.z), "flag": self.flag.value,
                "log_unnormalized": self.log_unnormalized, "posterior": self.posterior}


def dirichlet_mean(counts: np.ndarray, alpha: float) -> np.ndarray:
    """Posterior mean (N_jk + a) / (N_j + r a) along the last axis."""
    counts = np.asarray(counts)
    r = counts.shape[-1]
    return (counts + alpha) / (counts.sum(axis=-1, keepdims=True) + r * alpha)


def lookup_counts(t: CountTable, codes: np.ndarray) -> np.ndarray:
    """Count rows of ``t`` for each configuration code (zeros when unseen)."""
    codes = np.asarray(codes, dtype=np.int64)
    out = np.zeros((len(codes), t.r), dtype=np.int64)
    if len(t.configs):
        i = np.minimum(np.searchsorted(t.configs, codes), len(t.configs) - 1)
        hit = t.configs[i] == codes
        out[hit] = t.counts[i[hit]]
    return out


def _check_flag(flag) -> Flag:
    try:
        return Flag(flag)
    except ValueError:
        raise ValueError(f"flag must be 'c' or 'cbar', got {flag!r}") from None


def predictive_rows(t_o: CountTable, t_e: CountTable, flag, codes,
                    prior: PriorSpec = PriorSpec()) -> np.ndarray:
    """Dirichlet-mean rows for many configuration codes at once."""
    flag = _check_flag(flag)
    counts = lookup_counts(t_e, codes)
    if flag is Flag.C:
        counts = counts + lookup_counts(t_o, codes)
    return dirichlet_mean(counts, prior.alpha)


def posterior_predictive(t_o: CountTable, t_e: CountTable, flag, j: int, k: int,
                         prior: PriorSpec = PriorSpec()) -> float:
    """P(Y = k | Z = j, D_e, D_o, H) for one hypothesis.

    ``c`` pools the observational and experimental counts; ``cbar`` uses the
    experimental counts alone.
    """
    if not t_o.same_schema(t_e):
        raise SchemaError("count tables have different schemas")
    if not 0 <= k < t_e.r:
        raise SchemaError(f"outcome index {k} out of range [0, {t_e.r})")
    if not 0 <= j < t_e.q:
        raise SchemaError(f"configuration {j} out of range [0, {t_e.q})")
    return float(predictive_rows(t_o, t_e, flag, [j], prior)[0, k])


def _conditioning_order(d: DiscreteDataset, x, z) -> tuple:
    # treatment first, then the rest in dataset column order
    return (x,) + tuple(v for v in d.names if v in z and v != x)


def _validate(d_o: DiscreteDataset, d_e: DiscreteDataset, x, y):
    if d_o.schema != d_e.schema:
        raise SchemaError("observational and experimental data have different schemas")
    d_o.position(x)
    d_o.position(y)
    if x == y:
        raise SchemaError("treatment and outcome must differ")


def _softmax(logs) -> np.ndarray:
    logs = np.asarray(logs, dtype=float)
    w = np.exp(logs - logs.max())
    return w / w.sum()


def _candidate_sets(d, x, y, u_star, d_e, prior, max_exhaustive):
    """Sets Z to build cbar hypotheses for, and whether the search was degraded."""
    rest = [v for v in d.names if v in u_star and v != x]
    if len(rest) <= max_exhaustive:
        return [frozenset(s) | {x} for n in range(len(rest) + 1)
                for s in combinations(rest, n)], False
    # Too many subsets: walk down from U* removing the variable whose removal
    # gives the best experimental-only fit, keeping every set on the way.
    current = list(rest)
    chain = [frozenset(current) | {x}]
    while current:
        best = None
        for v in current:
            cand = [u for u in current if u != v]
            t_e = tabulate(d_e, y, (x, *cand))
            s = log_ml_exp_prior(t_e, prior)
            if best is None or s > best[0]:
                best = (s, cand)
        current = best[1]
        chain.append(frozenset(current) | {x})
    return chain[::-1], True


def _build(d_o, d_e, x, y, u_star, prior, tilt, max_exhaustive):
    u_star = frozenset(u_star)
    if x not in u_star:
        raise SchemaError(f"treatment {x!r} must belong to the committed boundary")
    if y in u_star:
        raise SchemaError(f"outcome {y!r} cannot belong to its own boundary")
    _validate(d_o, d_e, x, y)
    for v in u_star:
        d_o.position(v)
    sets, degraded = _candidate_sets(d_o, x, y, u_star, d_e, prior, max_exhaustive)

    tables = {}
    for z in sets:
        order = _conditioning_order(d_o, x, z)
        tables[z] = (tabulate(d_o, y, order), tabulate(d_e, y, order))

    t_o_full, t_e_full = tables[u_star]
    log_obs = log_bd_score(t_o_full, prior)
    entries = [(u_star, Flag.C,
                log_ml_exp_given_obs(t_o_full, t_e_full, prior) + log_obs + tilt)]
    for z in sets:
        entries.append((z, Flag.CBAR, log_ml_exp_prior(tables[z][1], prior) + log_obs))
    post = _softmax([e[2] for e in entries])
    weights = tuple(HypothesisWeight(z, f, float(lu), float(p))
                    for (z, f, lu), p in zip(entries, post))
    return weights, tables, log_obs, degraded


def hypothesis_posteriors(d_o: DiscreteDataset, d_e: DiscreteDataset, x, y, u_star,
                          prior: PriorSpec = PriorSpec(), tilt: float = 0.0,
                          max_exhaustive: int = MAX_EXHAUSTIVE) -> list:
    """Posterior over {H_U*^c} and {H_Z^cbar : x in Z within U*}.

    ``log_unnormalized`` includes log P(D_o | U*), which is the same for every
    hypothesis and cancels on normalisation.  ``tilt`` is added to the log
    prior of the c hypothesis (0 gives the uniform prior).
    """
    return list(_build(d_o, d_e, x, y, u_star, prior, tilt, max_exhaustive)[0])


@dataclass(frozen=True)
class FusedModel:
    """Averaged predictor of P(Y | do(X), V) built by :func:`find_imb`."""

    treatment: str
    outcome: str
    r: int
    omb: frozenset
    weights: tuple
    tables: dict = field(repr=False)
    prior: PriorSpec = PriorSpec()
    schema: dict = field(default_factory=dict, repr=False)
    x_forced: bool = False
    degraded: bool = False
    log_evidence_obs: float = 0.0

    def top(self) -> HypothesisWeight:
        return max(self.weights, key=lambda h: h.posterior)

    def clamp(self, z, flag) -> "FusedModel":
        """Copy with all posterior mass on one existing hypothesis."""
        z, flag = frozenset(z), _check_flag(flag)
        if not any(h.z == z and h.flag is flag for h in self.weights):
            raise ValueError(f"no hypothesis ({sorted(z)}, {flag.value}) in the model")
        weights = tuple(replace(h, posterior=float(h.z == z and h.flag is flag))
                        for h in self.weights)
        return replace(self, weights=weights)

    def _codes(self, t: CountTable, columns: dict) -> np.ndarray:
        code = np.zeros(len(columns[self.treatment]), dtype=np.int64)
        for v, a in zip(t.z_vars, t.z_arities):
            code = code * a + columns[v]
        return code

    def _columns(self, d: DiscreteDataset, x_val=None) -> dict:
        needed = set().union(*(h.z for h in self.weights))
        cols = {}
        for v in needed:
            if v == self.treatment and x_val is not None:
                continue
            if d.arity(v) != self.schema.get(v, d.arity(v)):
                raise SchemaError(f"arity of {v!r} differs from the training data")
            cols[v] = d.column(v)
        if x_val is not None:
            if not 0 <= x_val < self.schema[self.treatment]:
                raise SchemaError(f"treatment value {x_val} out of range")
            cols[self.treatment] = np.full(len(d), x_val, dtype=np.int64)
        return cols

    def predict_rows(self, d: DiscreteDataset, x_val=None) -> np.ndarray:
        """Averaged predictive for each row of ``d`` (shape n x r).

        The treatment value is read from ``d`` unless ``x_val`` is given.
        """
        cols = self._columns(d, x_val)
        out = np.zeros((len(d), self.r))
        for h in self.weights:
            if h.posterior == 0.0:
                continue
            t_o, t_e = self.tables[h.z]
            out += h.posterior * predictive_rows(t_o, t_e, h.flag, self._codes(t_e, cols),
                                                 self.prior)
        return out

    def predict(self, x_val: int, v: dict) -> np.ndarray:
        """P(Y | do(X = x_val), v) for one covariate assignment ``v``."""
        needed = set().union(*(h.z for h in self.weights)) - {self.treatment}
        missing = needed - set(v)
        if missing:
            raise SchemaError(f"missing covariate values for {sorted(missing)}")
        row = {}
        for name in needed:
            val = int(v[name])
            if not 0 <= val < self.schema[name]:
                raise SchemaError(f"value {val} out of range for {name!r}")
            row[name] = val
        names = sorted(row)
        d = DiscreteDataset([(n, self.schema[n]) for n in names] +
                            [(self.treatment, self.schema[self.treatment])],
                            [[row[n] for n in names] + [0]])
        return self.predict_rows(d, x_val)[0]

    def to_dict(self) -> dict:
        return {
            "treatment": self.treatment,
            "outcome": self.outcome,
            "r": self.r,
            "omb": sorted(self.omb),
            "prior_alpha": self.prior.alpha,
            "schema": self.schema,
            "x_forced": self.x_forced,
            "degraded": self.degraded,
            "log_evidence_obs": self.log_evidence_obs,
            "hypotheses": [
                dict(h.to_dict(), t_o=self.tables[h.z][0].to_dict(),
                     t_e=self.tables[h.z][1].to_dict())
                for h in self.weights
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FusedModel":
        weights, tables = [], {}
        for h in d["hypotheses"]:
            z = frozenset(h["z"])
            weights.append(HypothesisWeight(z, Flag(h["flag"]), h["log_unnormalized"],
                                            h["posterior"]))
            tables[z] = (CountTable.from_dict(h["t_o"]), CountTable.from_dict(h["t_e"]))
        return cls(d["treatment"], d["outcome"], d["r"], frozenset(d["omb"]), tuple(weights),
                   tables, PriorSpec(d["prior_alpha"]), d["schema"], d["x_forced"],
                   d["degraded"], d["log_evidence_obs"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "FusedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def find_imb(d_o: DiscreteDataset, d_e: DiscreteDataset, x, y, covariates=None,
             prior: PriorSpec = PriorSpec(), mb_mode: str = "auto", tilt: float = 0.0,
             max_exhaustive: int = MAX_EXHAUSTIVE) -> FusedModel:
    """Learn U* from ``d_o``, then weigh the hypotheses against ``d_e``.

    ``d_e`` must come from an experiment in which ``x`` was randomised.
    ``mb_mode`` is ``exhaustive``, ``greedy`` or ``auto`` (exhaustive when the
    candidate count allows it).  If the learned boundary lacks ``x`` it is
    added and ``x_forced`` is set on the model.
    """
    _validate(d_o, d_e, x, y)
    if len(d_o) == 0:
        raise SchemaError("observational data are empty")
    if covariates is None:
        covariates = [v for v in d_o.names if v not in (x, y)]
    candidates = list(dict.fromkeys([*covariates, x]))
    if y in candidates:
        raise SchemaError(f"outcome {y!r} cannot be a covariate")
    if mb_mode == "auto":
        mb_mode = "exhaustive" if len(candidates) <= max_exhaustive else "greedy"
    if mb_mode not in ("exhaustive", "greedy"):
        raise ValueError(f"unknown mb_mode {mb_mode!r}")
    u = fges_mb(d_o, y, candidates, prior, mode=mb_mode, max_exhaustive=max_exhaustive)
    x_forced = x not in u
    u = frozenset(u) | {x}
    weights, tables, log_obs, degraded = _build(d_o, d_e, x, y, u, prior, tilt,
                                                 max_exhaustive)
    schema = d_o.schema
    return FusedModel(x, y, d_o.arity(y), u, weights, tables, prior, schema, x_forced,
                      degraded, log_obs)
