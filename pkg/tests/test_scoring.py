import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causal_mb.data import DiscreteDataset
from causal_mb.errors import CapacityError, SchemaError
from causal_mb.scoring import (
    CountTable,
    PriorSpec,
    config_codes,
    fges_mb,
    log_bd_score,
    log_ml_exp_given_obs,
    log_ml_exp_prior,
    tabulate,
)
from oracles import log_marginal_quadrature, prequential_log_score

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def random_dataset(rng, n, arities):
    names = list(arities)
    data = np.column_stack([rng.integers(0, arities[v], n) for v in names]) if n else None
    return DiscreteDataset([(v, arities[v]) for v in names], data)


def test_prior_spec():
    assert PriorSpec().alpha == 1.0
    assert PriorSpec(0.5).alpha_j(3) == 1.5
    with pytest.raises(ValueError):
        PriorSpec(0.0)


def test_tabulate_small():
    d = DiscreteDataset([("Y", 2), ("X", 2)], [[0, 0], [1, 0], [1, 1], [1, 1]])
    t = tabulate(d, "Y", ["X"])
    assert t.n_jk.tolist() == [[1, 1], [0, 2]]
    assert t.n_j.tolist() == [2, 2]
    assert (t.q, t.r) == (2, 2)
    with pytest.raises(SchemaError):
        tabulate(d, "Y", ["Y"])
    with pytest.raises(SchemaError):
        tabulate(d, "Y", ["Q"])


def test_tabulate_empty_dataset():
    d = DiscreteDataset([("Y", 3), ("A", 2), ("B", 3)])
    t = tabulate(d, "Y", ["A", "B"])
    assert (t.q, t.r) == (6, 3)
    assert t.n_jk.shape == (6, 3) and t.n_jk.sum() == 0
    assert log_bd_score(t) == 0.0


def test_codec_is_mixed_radix_last_fastest():
    d = DiscreteDataset([("Y", 2), ("A", 2), ("B", 3)], [[0, 1, 2]])
    t = tabulate(d, "Y", ["A", "B"])
    assert t.encode((1, 2)) == 5 == int(config_codes(d, ["A", "B"])[0])
    assert t.decode(5) == (1, 2)
    assert all(t.encode(t.decode(j)) == j for j in range(t.q))
    with pytest.raises(SchemaError):
        t.encode((2, 0))


def test_tabulate_matches_single_pass_counter():
    rng = np.random.default_rng(3)
    d = random_dataset(rng, 1000, {"Y": 3, "A": 2, "B": 3, "C": 2})
    t = tabulate(d, "Y", ["A", "B", "C"])
    counter = {}
    for y, a, b, c in d.data.tolist():
        key = (a, b, c)
        counter.setdefault(key, [0, 0, 0])[y] += 1
    for key, row in counter.items():
        assert t.row(t.encode(key)).tolist() == row
    assert t.n_jk.sum(axis=0).tolist() == np.bincount(d.column("Y"), minlength=3).tolist()
    assert t.n_j.sum() == 1000
    assert (t.n_j == t.n_jk.sum(axis=1)).all()


def test_sparse_and_dense_paths_agree():
    rng = np.random.default_rng(0)
    arities = {"Y": 2, **{f"V{i}": 3 for i in range(15)}}
    d = random_dataset(rng, 300, arities)
    z = [f"V{i}" for i in range(15)]
    t = tabulate(d, "Y", z)  # 3**15 * 2 cells: sparse path
    assert t.total == 300
    counts = {}
    for row in d.data.tolist():
        counts.setdefault(tuple(row[1:]), [0, 0])[row[0]] += 1
    for key, row in counts.items():
        assert t.row(t.encode(key)).tolist() == row
    with pytest.raises(CapacityError):
        t.n_jk


def test_log_bd_hand_values():
    assert log_bd_score(CountTable.from_dense([[0, 0], [0, 0]])) == 0.0
    assert log_bd_score(CountTable.from_dense([[1, 1]])) == pytest.approx(math.log(1 / 6), abs=1e-14)
    assert log_ml_exp_prior(CountTable.from_dense([[2, 0]])) == pytest.approx(math.log(2 / 6), abs=1e-14)


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_log_bd_equals_prequential_product(seed):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, int(rng.integers(0, 60)), {"Y": 3, "A": 2, "B": 2})
    alpha = float(rng.choice([0.5, 1.0, 2.5]))
    t = tabulate(d, "Y", ["A", "B"])
    seq = prequential_log_score(d.column("Y").tolist(), config_codes(d, ["A", "B"]).tolist(), 3, alpha)
    assert log_bd_score(t, PriorSpec(alpha)) == pytest.approx(seq, abs=1e-8)


def test_exp_given_obs_reductions():
    t_o = CountTable.from_dense([[3, 1], [0, 5]])
    empty = CountTable.from_dense([[0, 0], [0, 0]])
    assert log_ml_exp_given_obs(t_o, empty) == 0.0
    t_e = CountTable.from_dense([[1, 2], [2, 0]])
    assert log_ml_exp_given_obs(empty, t_e) == log_ml_exp_prior(t_e)
    with pytest.raises(SchemaError):
        log_ml_exp_given_obs(CountTable.from_dense([[1, 1, 1]]), CountTable.from_dense([[1, 1]]))


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_exp_given_obs_matches_quadrature(seed):
    rng = np.random.default_rng(seed)
    q, r = int(rng.integers(1, 4)), int(rng.integers(2, 4))
    n_o = rng.integers(0, 6, (q, r))
    n_e = rng.integers(0, 4, (q, r))
    alpha = float(rng.choice([0.7, 1.0, 2.0]))
    t_o, t_e = CountTable.from_dense(n_o), CountTable.from_dense(n_e)
    got = log_ml_exp_given_obs(t_o, t_e, PriorSpec(alpha))
    assert got == pytest.approx(log_marginal_quadrature(n_e, alpha + n_o), abs=1e-6)
    assert log_ml_exp_prior(t_e, PriorSpec(alpha)) == pytest.approx(
        log_marginal_quadrature(n_e, alpha), abs=1e-6)


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_posterior_as_prior_and_chain_identities(seed):
    rng = np.random.default_rng(seed)
    ar = {"Y": 2, "A": 3, "B": 2}
    d_o = random_dataset(rng, int(rng.integers(0, 80)), ar)
    d_e = random_dataset(rng, int(rng.integers(0, 40)), ar)
    t_o, t_e = tabulate(d_o, "Y", ["A", "B"]), tabulate(d_e, "Y", ["A", "B"])
    chained = log_bd_score(t_o) + log_ml_exp_given_obs(t_o, t_e)
    pooled = log_bd_score(tabulate(d_o.concat(d_e), "Y", ["A", "B"]))
    assert chained == pytest.approx(pooled, abs=1e-9)
    # alpha + N_o cellwise as an explicit prior, evaluated by the prequential oracle
    start = {int(j): row.tolist() for j, row in zip(t_o.configs, t_o.counts)}
    seq = prequential_log_score(d_e.column("Y").tolist(), config_codes(d_e, ["A", "B"]).tolist(),
                                2, 1.0, start=start)
    assert log_ml_exp_given_obs(t_o, t_e) == pytest.approx(seq, abs=1e-8)
    assert log_ml_exp_prior(t_e) == log_bd_score(t_e)


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_scores_invariant_to_row_permutation(seed):
    rng = np.random.default_rng(seed)
    d = random_dataset(rng, 50, {"Y": 2, "A": 3})
    perm = d.rows(rng.permutation(len(d)))
    assert log_bd_score(tabulate(d, "Y", ["A"])) == log_bd_score(tabulate(perm, "Y", ["A"]))


def _dependent_data(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, n)
    b = rng.integers(0, 3, n)
    noise = rng.integers(0, 2, n)
    y = np.where(rng.random(n) < 0.8, (a + (b == 2)) % 2, rng.integers(0, 2, n))
    return DiscreteDataset([("Y", 2), ("A", 2), ("B", 3), ("N", 2)],
                           np.column_stack([y, a, b, noise]))


def test_fges_mb_finds_dependent_parents():
    d = _dependent_data(5000, 1)
    assert fges_mb(d, "Y", ["A", "B", "N"]) == {"A", "B"}
    assert fges_mb(d, "Y", ["A", "B", "N"], mode="greedy") == {"A", "B"}


def test_fges_mb_independent_data_gives_empty_set():
    rng = np.random.default_rng(5)
    d = random_dataset(rng, 20000, {"Y": 2, "A": 2, "B": 3, "C": 2})
    assert fges_mb(d, "Y", ["A", "B", "C"]) == frozenset()
    assert fges_mb(d, "Y", ["A", "B", "C"], mode="greedy") == frozenset()


def test_fges_mb_candidate_order_invariance():
    d = _dependent_data(800, 2)
    cands = ["A", "B", "N"]
    results = {fges_mb(d, "Y", list(p)) for p in [cands, cands[::-1], ["N", "A", "B"]]}
    assert len(results) == 1


def test_fges_mb_errors():
    d = _dependent_data(10, 0)
    with pytest.raises(SchemaError):
        fges_mb(d, "Y", ["Y", "A"])
    with pytest.raises(CapacityError):
        fges_mb(d, "Y", ["A", "B", "N"], max_exhaustive=2)
    with pytest.raises(ValueError):
        fges_mb(d, "Y", ["A"], mode="annealing")


def test_count_table_serialization_and_merge():
    t1 = CountTable.from_dense([[1, 0], [0, 0], [2, 3]])
    t2 = CountTable.from_dense([[0, 4], [1, 1], [0, 0]])
    assert CountTable.from_dict(t1.to_dict()).n_jk.tolist() == t1.n_jk.tolist()
    assert t1.merged(t2).n_jk.tolist() == (t1.n_jk + t2.n_jk).tolist()
