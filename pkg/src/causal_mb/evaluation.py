"""Baselines, metrics and the replicated benchmark of the fusion estimator.

Predictors only ever see datasets; the generating network is used solely to
compute the exact targets for the test rows.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.stats import rankdata, wilcoxon

from . import __version__
from .data import DiscreteDataset
from .errors import SchemaError
from .fusion import dirichlet_mean, find_imb, lookup_counts
from .scoring import CountTable, PriorSpec, config_codes, fges_mb, tabulate
from .simulation import (
    exact_distribution,
    exact_posterior,
    interventional_rows,
    m_bias_net,
    random_net,
    sample,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

METHODS = ("findimb", "imb_only", "omb_only")


@dataclass(frozen=True)
class TablePredictor:
    """Dirichlet-mean predictor of Y given X and a fixed covariate set."""

    treatment: str
    outcome: str
    table: CountTable
    prior: PriorSpec = PriorSpec()

    @property
    def z(self) -> frozenset:
        return frozenset(self.table.z_vars)

    def predict_rows(self, d: DiscreteDataset, x_val=None) -> np.ndarray:
        if x_val is None:
            codes = config_codes(d, self.table.z_vars)
        else:
            cols = {v: d.column(v) for v in self.table.z_vars if v != self.treatment}
            cols[self.treatment] = np.full(len(d), x_val, dtype=np.int64)
            codes = np.zeros(len(d), dtype=np.int64)
            for v, a in zip(self.table.z_vars, self.table.z_arities):
                codes = codes * a + cols[v]
        return dirichlet_mean(lookup_counts(self.table, codes), self.prior.alpha)


def fit_table_predictor(d: DiscreteDataset, x, y, z, prior: PriorSpec = PriorSpec()):
    """Predictor conditioned on ``z`` (which always gains ``x``)."""
    order = (x,) + tuple(v for v in d.names if v in set(z) and v != x)
    return TablePredictor(x, y, tabulate(d, y, order), prior)


def _boundary_predictor(d, x, y, covariates, prior, mb_mode):
    if len(d) == 0:
        raise SchemaError("cannot fit a baseline on an empty dataset")
    if covariates is None:
        covariates = [v for v in d.names if v not in (x, y)]
    candidates = list(dict.fromkeys([*covariates, x]))
    if mb_mode == "auto":
        mb_mode = "exhaustive" if len(candidates) <= 16 else "greedy"
    z = fges_mb(d, y, candidates, prior, mode=mb_mode) | {x}
    return fit_table_predictor(d, x, y, z, prior)


def baseline_imb_only(d_e: DiscreteDataset, x, y, covariates=None,
                      prior: PriorSpec = PriorSpec(), mb_mode="auto") -> TablePredictor:
    """Boundary learned from the experimental data and fitted on it alone."""
    return _boundary_predictor(d_e, x, y, covariates, prior, mb_mode)


def baseline_omb_only(d_o: DiscreteDataset, x, y, covariates=None,
                      prior: PriorSpec = PriorSpec(), mb_mode="auto") -> TablePredictor:
    """Observational boundary and observational P(Y | X, MB) used as the effect."""
    return _boundary_predictor(d_o, x, y, covariates, prior, mb_mode)


def mean_abs_bias(pred, truth) -> float:
    """Mean absolute error over rows.

    1-d inputs are per-row probabilities of one outcome value.  2-d inputs are
    per-row distributions; the error is averaged over outcome values too,
    which for a binary outcome equals the error in P(Y = 1).
    """
    pred, truth = np.asarray(pred, dtype=float), np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("no rows to score")
    return float(np.abs(pred - truth).mean())


def auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties count half)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pos = labels == 1
    n1, n0 = int(pos.sum()), int((~pos).sum())
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC needs both classes")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def signed_rank_test(a, b, alternative: str = "two-sided") -> float:
    """Wilcoxon signed-rank p-value for paired samples; zero differences are dropped.

    ``alternative="less"`` tests whether ``a`` tends to be smaller than ``b``.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("paired samples differ in length")
    if not np.any(a != b):
        return 1.0
    return float(wilcoxon(a, b, zero_method="wilcox", alternative=alternative).pvalue)


@dataclass(frozen=True)
class ExperimentConfig:
    replications: int = 100
    n_obs: int = 10
    n_lat: int = 5
    n_o: int = 10000
    n_e_grid: tuple = (100, 200, 1000)
    test_size: int = 400
    alpha: float = 1.0
    seed_base: int = 0
    methods: tuple = METHODS
    mean_in_degree: float = 2.0
    arity_choices: tuple = (2, 3)
    out_dir: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "n_e_grid", tuple(int(n) for n in self.n_e_grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "arity_choices", tuple(self.arity_choices))
        for name in ("replications", "n_obs", "n_o", "test_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_lat < 0:
            raise ValueError("n_lat must be nonnegative")
        if not self.n_e_grid or min(self.n_e_grid) <= 0:
            raise ValueError("n_e_grid must be a nonempty list of positive sizes")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        PriorSpec(self.alpha)

    @property
    def seeds(self) -> list:
        return list(range(self.seed_base, self.seed_base + self.replications))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("n_e_grid", "methods", "arity_choices"):
            d[k] = list(d[k])
        return d

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("out_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if path.suffix == ".toml":
            with open(path, "rb") as fh:
                return cls.from_dict(tomllib.load(fh))
        return cls.from_dict(json.loads(path.read_text()))


@dataclass(frozen=True)
class ResultRow:
    seed: int
    method: str
    n_e: int
    mean_abs_bias: float
    auc: float
    wall_time_s: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not self.mean_abs_bias >= 0:
            raise ValueError("mean_abs_bias must be nonnegative")
        if not (np.isnan(self.auc) or 0 <= self.auc <= 1):
            raise ValueError("auc must lie in [0, 1] (or be NaN when undefined)")


RESULT_FIELDS = ("seed", "method", "n_e", "mean_abs_bias", "auc")


def _stream(seed, *tag):
    return np.random.SeedSequence([seed, *tag])


def run_seed(cfg: ExperimentConfig, seed: int) -> list:
    """All result rows for one replication."""
    net = random_net(cfg.n_obs, cfg.n_lat, cfg.mean_in_degree, cfg.arity_choices,
                     seed=_stream(seed, 0))
    x, y = net.treatment, net.outcome
    prior = PriorSpec(cfg.alpha)
    d_o = sample(net, cfg.n_o, seed=_stream(seed, 1))
    test = sample(net, cfg.test_size, intervene=(x, "balanced"), seed=_stream(seed, 2),
                  provenance="test")
    truth = interventional_rows(net, test)[:, 1]
    labels = test.column(y)

    def score(method, n_e, fit):
        t0 = time.perf_counter()
        p = fit().predict_rows(test)[:, 1]
        elapsed = time.perf_counter() - t0
        try:
            a = auc(p, labels)
        except ValueError:
            a = float("nan")
        return ResultRow(seed, method, n_e, mean_abs_bias(p, truth), a, elapsed)

    rows = []
    omb = None
    for n_e in cfg.n_e_grid:
        d_e = sample(net, n_e, intervene=(x, "balanced"), seed=_stream(seed, 3, n_e))
        for method in cfg.methods:
            if method == "findimb":
                rows.append(score(method, n_e, lambda: find_imb(d_o, d_e, x, y, prior=prior)))
            elif method == "imb_only":
                rows.append(score(method, n_e, lambda: baseline_imb_only(d_e, x, y, prior=prior)))
            else:
                if omb is None:
                    omb = score(method, n_e, lambda: baseline_omb_only(d_o, x, y, prior=prior))
                rows.append(ResultRow(seed, method, n_e, omb.mean_abs_bias, omb.auc,
                                      omb.wall_time_s))
    return rows


def _format(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def _read_results(path: Path) -> list:
    with open(path, newline="") as fh:
        return [ResultRow(int(r["seed"]), r["method"], int(r["n_e"]), float(r["mean_abs_bias"]),
                          float(r["auc"])) for r in csv.DictReader(fh)]


def read_results(path) -> list:
    """Load result rows written by :func:`run_experiment` (wall times are not stored)."""
    return _read_results(Path(path))


def run_experiment(cfg: ExperimentConfig, workers: int = 1, progress=None) -> list:
    """Run every replication and return its ResultRows in seed order.

    With ``cfg.out_dir`` set, rows are appended to ``results.csv`` as each seed
    finishes (wall times go to ``timings.csv`` so the results file is
    reproducible byte for byte), and a rerun skips seeds already recorded.
    """
    out = Path(cfg.out_dir) if cfg.out_dir else None
    done = {}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        manifest = out / "manifest.json"
        if manifest.exists():
            old = json.loads(manifest.read_text())
            if old.get("config_hash") != cfg.digest():
                raise ValueError(f"{out} holds results for a different configuration")
        manifest.write_text(json.dumps({
            "config": cfg.to_dict(), "config_hash": cfg.digest(), "code_version": __version__,
            "seeds": cfg.seeds}, indent=2) + "\n")
        results = out / "results.csv"
        if results.exists():
            per_seed = len(cfg.n_e_grid) * len(cfg.methods)
            for r in _read_results(results):
                done.setdefault(r.seed, []).append(r)
            done = {s: rs for s, rs in done.items() if len(rs) == per_seed}
            # rewrite so partially written seeds are dropped
            _write_rows(results, [r for s in sorted(done) for r in done[s]], "w")
        else:
            _write_rows(results, [], "w")

    todo = [s for s in cfg.seeds if s not in done]
    all_rows = dict(done)

    def record(seed, rows):
        all_rows[seed] = rows
        if out is not None:
            _write_rows(out / "results.csv", rows, "a", header=False)
            with open(out / "timings.csv", "a", newline="") as fh:
                w = csv.writer(fh)
                for r in rows:
                    w.writerow([r.seed, r.method, r.n_e, _format(r.wall_time_s)])
        if progress is not None:
            progress(seed, rows)

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(workers) as pool:
            for seed, rows in zip(todo, pool.map(run_seed, [cfg] * len(todo), todo)):
                record(seed, rows)
    else:
        for seed in todo:
            record(seed, run_seed(cfg, seed))
    return [r for s in cfg.seeds for r in all_rows[s]]


def _write_rows(path, rows, mode, header=True):
    with open(path, mode, newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(RESULT_FIELDS)
        for r in rows:
            w.writerow([_format(getattr(r, f)) for f in RESULT_FIELDS])


def summarize(rows) -> list:
    """Per (method, N_e) quartiles of mean absolute bias and median AUC.

    Aggregation is per replication: each seed contributes one value.
    """
    groups = {}
    for r in rows:
        groups.setdefault((r.method, r.n_e), []).append(r)
    out = []
    for (method, n_e), rs in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        bias = np.array([r.mean_abs_bias for r in rs])
        aucs = np.array([r.auc for r in rs])
        q1, med, q3 = np.percentile(bias, [25, 50, 75])
        out.append({"method": method, "n_e": n_e, "n": len(rs),
                    "bias_q1": float(q1), "bias_median": float(med), "bias_q3": float(q3),
                    "bias_mean": float(bias.mean()),
                    "auc_median": float(np.nanmedian(aucs)) if np.isfinite(aucs).any()
                    else float("nan")})
    return out


def paired(rows, method, n_e) -> dict:
    """seed -> mean absolute bias for one method and experiment size."""
    return {r.seed: r.mean_abs_bias for r in rows if r.method == method and r.n_e == n_e}


def compare(rows, a="findimb", b="imb_only") -> list:
    """One-sided signed-rank test that ``a`` has lower bias than ``b`` at each N_e."""
    out = []
    for n_e in sorted({r.n_e for r in rows}):
        pa, pb = paired(rows, a, n_e), paired(rows, b, n_e)
        seeds = sorted(set(pa) & set(pb))
        if not seeds:
            continue
        va, vb = [pa[s] for s in seeds], [pb[s] for s in seeds]
        out.append({"n_e": n_e, "a": a, "b": b, "n": len(seeds),
                    "median_a": float(np.median(va)), "median_b": float(np.median(vb)),
                    "p_value": signed_rank_test(va, vb, alternative="less")})
    return out


def exact_mbias_bias(alpha: float) -> float:
    """Exact |P(Y=1 | do(X=1), M) - P(Y=1 | X=1, M)| averaged over P(M)."""
    net = m_bias_net(alpha)
    p_m = exact_distribution(net, "M")
    total = 0.0
    for m in (0, 1):
        do = exact_posterior(net, "Y", 1, {"M": m}, do=("X", 1))
        obs = exact_posterior(net, "Y", 1, {"M": m, "X": 1})
        total += p_m[m] * abs(do - obs)
    return float(total)


def run_mbias(alpha: float, seeds, n_o: int = 10000, n_e: int = 1000, test_size: int = 400,
              prior: PriorSpec = PriorSpec()) -> list:
    """Mean absolute bias of each method on the m-bias network, one row per seed."""
    net = m_bias_net(alpha)
    rows = []
    for seed in seeds:
        d_o = sample(net, n_o, seed=_stream(seed, 1))
        d_e = sample(net, n_e, intervene=("X", "balanced"), seed=_stream(seed, 3, n_e))
        test = sample(net, test_size, intervene=("X", "balanced"), seed=_stream(seed, 2),
                      provenance="test")
        truth = interventional_rows(net, test)[:, 1]
        fits = {"findimb": find_imb(d_o, d_e, "X", "Y", prior=prior),
                "imb_only": baseline_imb_only(d_e, "X", "Y", prior=prior),
                "omb_only": baseline_omb_only(d_o, "X", "Y", prior=prior)}
        for method, model in fits.items():
            p = model.predict_rows(test)[:, 1]
            rows.append({"seed": seed, "alpha": alpha, "method": method,
                         "mean_abs_bias": mean_abs_bias(p, truth)})
    return rows
