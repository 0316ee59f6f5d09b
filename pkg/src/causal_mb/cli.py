"""Command-line entry point: ``causal-mb <command> ...``.

Exit status is 0 on success, 2 for invalid input and 3 when a search would
exceed a capacity limit.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .data import DiscreteDataset, load_schema, save_schema
from .errors import CapacityError, CausalMBError
from .evaluation import ExperimentConfig, compare, read_results, run_experiment, summarize
from .fusion import FusedModel, find_imb
from .graph import load_graph, observational_mb, save_graph
from .identification import check_all_candidates, enumerate_cmbs, interventional_mb, is_cmb
from .scoring import PriorSpec, fges_mb
from .simulation import interventional_rows, random_net, sample

EXIT_OK, EXIT_INVALID, EXIT_CAPACITY = 0, 2, 3


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _names(s):
    return [v.strip() for v in s.split(",") if v.strip()] if s else []


def _read_query(path, schema: dict) -> DiscreteDataset:
    """CSV whose columns are any subset of ``schema``."""
    with open(path, newline="") as fh:
        header = [h.strip() for h in next(csv.reader(fh), [])]
    if not header:
        raise CausalMBError(f"{path}: empty file")
    unknown = [h for h in header if h not in schema]
    if unknown:
        raise CausalMBError(f"{path}: columns {unknown} are not in the model schema")
    return DiscreteDataset.read_csv(path, {h: schema[h] for h in header}, "test")


def _write_distribution(path, outcome, probs):
    cols = [f"p_{outcome}_{k}" for k in range(probs.shape[1])]
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(cols)
        w.writerows([[repr(float(p)) for p in row] for row in probs])
    finally:
        if path:
            fh.close()


def cmd_simulate(a):
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    ss = np.random.SeedSequence(a.seed)
    s_net, s_obs, s_exp, s_test = ss.spawn(4)
    net = random_net(a.nodes, a.latent, a.degree, seed=s_net)
    x, y = net.treatment, net.outcome
    d_o = sample(net, a.n_obs, seed=s_obs)
    d_e = sample(net, a.n_exp, intervene=(x, a.policy), seed=s_exp)
    test = sample(net, a.n_test, intervene=(x, "balanced"), seed=s_test, provenance="test")
    net.save(out / "net.json")
    save_graph(net.smcm(), out / "graph.json")
    save_schema(d_o.schema, out / "schema.json")
    d_o.to_csv(out / "obs.csv")
    d_e.to_csv(out / "exp.csv")
    test.to_csv(out / "test.csv")
    _write_distribution(out / "truth.csv", y, interventional_rows(net, test))
    return EXIT_OK


def cmd_mb(a):
    if a.graph:
        g = load_graph(a.graph)
        result = {"outcome": a.outcome, "omb": sorted(observational_mb(g, a.outcome))}
        if a.treatment:
            result["imb"] = sorted(interventional_mb(g, a.treatment, a.outcome))
    else:
        if not (a.data and a.schema):
            raise CausalMBError("give --graph, or --data with --schema")
        d = DiscreteDataset.read_csv(a.data, load_schema(a.schema))
        cands = [v for v in d.names if v != a.outcome]
        mb = fges_mb(d, a.outcome, cands, PriorSpec(a.alpha), mode=a.mode)
        result = {"outcome": a.outcome, "omb": sorted(mb)}
    _emit(result, a.out)
    return EXIT_OK


def cmd_cmb(a):
    g = load_graph(a.graph)
    x = a.treatment or g.treatment
    y = a.outcome or g.outcome
    if x is None or y is None:
        raise CausalMBError("treatment and outcome are required")
    if a.check is not None:
        result = is_cmb(g, x, y, set(_names(a.check)) | {x}).to_dict()
    elif a.all:
        result = [r.to_dict() for r in check_all_candidates(g, x, y, max_candidates=a.cap)]
    else:
        result = [sorted(z) for z in enumerate_cmbs(g, x, y, max_candidates=a.cap)]
    _emit(result, a.out)
    return EXIT_OK


def cmd_find_imb(a):
    schema = load_schema(a.schema)
    d_o = DiscreteDataset.read_csv(a.obs, schema, "observational")
    d_e = DiscreteDataset.read_csv(a.exp, schema, "experimental")
    cov = _names(a.covariates) or None
    m = find_imb(d_o, d_e, a.treatment, a.outcome, cov, PriorSpec(a.alpha), a.mb_mode,
                 a.tilt)
    if a.out:
        m.save(a.out)
    else:
        _emit(m.to_dict())
    if m.x_forced:
        print(f"warning: {a.treatment} was not in the learned boundary and was added",
              file=sys.stderr)
    if m.degraded:
        print("warning: boundary too large; hypotheses restricted to a removal chain",
              file=sys.stderr)
    return EXIT_OK


def cmd_predict(a):
    m = FusedModel.load(a.model)
    q = _read_query(a.query, m.schema)
    _write_distribution(a.out, m.outcome, m.predict_rows(q, a.x_value))
    return EXIT_OK


def cmd_eval(a):
    cfg = ExperimentConfig.load(a.config)
    if a.out:
        cfg = ExperimentConfig.from_dict(dict(cfg.to_dict(), out_dir=a.out))
    if cfg.out_dir is None:
        raise CausalMBError("an output directory is required (config out_dir or --out)")

    def progress(seed, rows):
        if not a.quiet:
            print(f"seed {seed}: {len(rows)} rows", file=sys.stderr)

    rows = run_experiment(cfg, workers=a.workers, progress=progress)
    _write_summary(Path(cfg.out_dir) / "summary.csv", rows)
    _emit({"summary": summarize(rows), "findimb_vs_imb_only": compare(rows)},
          Path(cfg.out_dir) / "summary.json")
    return EXIT_OK


def _write_summary(path, rows):
    summary = summarize(rows)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(summary[0]))
        w.writeheader()
        w.writerows(summary)


def cmd_report(a):
    rows = read_results(a.results)
    if not rows:
        raise CausalMBError(f"{a.results}: no result rows")
    if a.out:
        _write_summary(a.out, rows)
    result = {"summary": summarize(rows), "findimb_vs_imb_only": compare(rows)}
    _emit(result)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causal-mb", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a random network and datasets")
    s.add_argument("--nodes", type=int, default=10, help="observed nodes incl. X and Y")
    s.add_argument("--latent", type=int, default=5)
    s.add_argument("--degree", type=float, default=2.0, help="mean in-degree")
    s.add_argument("--n-obs", type=int, default=10000)
    s.add_argument("--n-exp", type=int, default=200)
    s.add_argument("--n-test", type=int, default=400)
    s.add_argument("--policy", choices=["balanced", "uniform"], default="balanced")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("mb", help="Markov boundary from a graph or from data")
    s.add_argument("--graph")
    s.add_argument("--data")
    s.add_argument("--schema")
    s.add_argument("--outcome", required=True)
    s.add_argument("--treatment")
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--mode", choices=["exhaustive", "greedy"], default="exhaustive")
    s.add_argument("--out")
    s.set_defaults(func=cmd_mb)

    s = sub.add_parser("cmb", help="causal Markov boundaries of a graph")
    s.add_argument("--graph", required=True)
    s.add_argument("--treatment")
    s.add_argument("--outcome")
    s.add_argument("--check", help="comma-separated covariates to test as one candidate")
    s.add_argument("--all", action="store_true", help="report every candidate")
    s.add_argument("--cap", type=int, default=20)
    s.add_argument("--out")
    s.set_defaults(func=cmd_cmb)

    s = sub.add_parser("find-imb", help="fit the fused interventional model")
    s.add_argument("--obs", required=True)
    s.add_argument("--exp", required=True)
    s.add_argument("--schema", required=True)
    s.add_argument("--treatment", required=True)
    s.add_argument("--outcome", required=True)
    s.add_argument("--covariates")
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--tilt", type=float, default=0.0)
    s.add_argument("--mb-mode", choices=["auto", "exhaustive", "greedy"], default="auto")
    s.add_argument("--out")
    s.set_defaults(func=cmd_find_imb)

    s = sub.add_parser("predict", help="per-row P(Y | do(X), V) from a fitted model")
    s.add_argument("--model", required=True)
    s.add_argument("--query", required=True)
    s.add_argument("--x-value", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", help="run the replicated benchmark")
    s.add_argument("--config", required=True, help="TOML or JSON experiment config")
    s.add_argument("--out")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("report", help="summarise a results.csv")
    s.add_argument("--results", required=True)
    s.add_argument("--out", help="write the summary table as CSV")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (CausalMBError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
