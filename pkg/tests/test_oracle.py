from pathlib import Path

import numpy as np
import pytest
from _util import random_forest, random_small

from spdec.instance import FactorGraph, Instance, generate_random, parse_dimacs
from spdec.oracle import (
    SizeGuardError,
    WarningValue,
    cluster_solutions,
    count_solutions_bitparallel,
    enumerate_warning_fixed_points,
    exhaustive_solutions,
    oracle_counts,
    read_golden_csv,
    tree_exact_sp,
    write_golden_csv,
)

GOLDEN = Path(__file__).parent / "golden"
T, U, F = WarningValue.TRUE, WarningValue.UNKNOWN, WarningValue.FALSE


def test_exhaustive_examples():
    assert len(exhaustive_solutions(Instance(2, ()))) == 4
    assert exhaustive_solutions(Instance.from_dimacs_ints(1, [[1]])).tolist() == [[True]]
    with pytest.raises(SizeGuardError):
        exhaustive_solutions(Instance(27, ()))


def test_exhaustive_lexicographic():
    sols = exhaustive_solutions(Instance.from_dimacs_ints(3, [[1, 2], [-3]]))
    assert sols.astype(int).tolist() == [[0, 1, 0], [1, 0, 0], [1, 1, 0]]


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_bitparallel_agrees(seed):
    inst = generate_random(20, 4.2, 3, seed=seed)
    assert len(exhaustive_solutions(inst)) == count_solutions_bitparallel(inst)


def test_bitparallel_small_cases():
    assert count_solutions_bitparallel(Instance(3, ())) == 8
    assert count_solutions_bitparallel(Instance.from_dimacs_ints(2, [[1], [-1]])) == 0
    rng = np.random.default_rng(5)
    for _ in range(50):
        inst = random_small(rng, int(rng.integers(1, 9)), int(rng.integers(0, 12)), (1, 2, 3))
        assert len(exhaustive_solutions(inst)) == count_solutions_bitparallel(inst)


def test_cluster_examples():
    cs = cluster_solutions([[True, True], [True, False]])
    assert len(cs) == 1 and cs.clusters[0].warnings == (T, U)
    cs = cluster_solutions([[True, True], [False, False]])
    assert cs.warning_assignments() == [(F, F), (T, T)]
    cube = exhaustive_solutions(Instance(2, ()))
    assert cluster_solutions(cube).warning_assignments() == [(U, U)]
    with pytest.raises(ValueError):
        cluster_solutions(np.zeros((0, 2), dtype=bool))


def test_clusters_partition_solutions():
    rng = np.random.default_rng(2)
    for _ in range(20):
        inst = random_small(rng, 10, int(rng.integers(20, 45)), (3,))
        sols = exhaustive_solutions(inst)
        if not len(sols):
            continue
        cs = cluster_solutions(sols)
        members = np.concatenate([c.members for c in cs.clusters])
        assert len(members) == len(sols)
        assert {tuple(r) for r in members.tolist()} == {tuple(r) for r in sols.tolist()}
        # no Hamming-1 pair spans two clusters
        label = {tuple(r): k for k, c in enumerate(cs.clusters) for r in c.members.tolist()}
        for r in sols.tolist():
            for b in range(len(r)):
                nb = list(r)
                nb[b] = not nb[b]
                if tuple(nb) in label:
                    assert label[tuple(nb)] == label[tuple(r)]


def test_warning_fixed_point_examples():
    fps = enumerate_warning_fixed_points(Instance(2, ()))
    assert len(fps) == 1 and fps[0].trivial and fps[0].edges == ()
    fps = enumerate_warning_fixed_points(Instance.from_dimacs_ints(3, [[1, 2, 3]]))
    assert any(fp.trivial for fp in fps)
    with pytest.raises(SizeGuardError):
        enumerate_warning_fixed_points(generate_random(10, 0.5, 3, seed=0))


def test_unit_clause_fixed_point_warns():
    fps = enumerate_warning_fixed_points(Instance.from_dimacs_ints(2, [[1], [-1, 2]]))
    assert len(fps) == 1
    fp = fps[0]
    # x1 -> (x1) is I (cavity), x1 -> (-x1 v x2) is T, x2 -> (-x1 v x2) is I
    assert fp.edges == (U, T, U) and fp.node_warnings == (T, T) and fp.legal


def test_golden_counts():
    rows = read_golden_csv(GOLDEN / "oracle_counts.csv")
    assert [r["instance_id"] for r in rows] == ["chain2", "loop4"]
    for row in rows:
        inst = parse_dimacs((GOLDEN / f"{row['instance_id']}.cnf").read_bytes())
        assert oracle_counts(inst) == {k: row[k] for k in ("n_solutions", "n_clusters", "n_warning_fixed_points")}


def test_golden_roundtrip(tmp_path):
    rows = [{"instance_id": "a", "n_solutions": 3, "n_clusters": 2, "n_warning_fixed_points": 1}]
    write_golden_csv(tmp_path / "g.csv", rows)
    assert (tmp_path / "g.csv").read_bytes() == b"instance_id,n_solutions,n_clusters,n_warning_fixed_points\na,3,2,1\n"
    assert read_golden_csv(tmp_path / "g.csv") == rows


def test_tree_exact_examples():
    empty = tree_exact_sp(Instance(3, ()))
    assert empty.s_edge.shape == (0, 3)
    one = tree_exact_sp(Instance.from_dimacs_ints(3, [[1, -2, 3]]))
    assert np.array_equal(one.s_edge, np.tile([0, 1, 0], (3, 1)))
    chain = tree_exact_sp(Instance.from_dimacs_ints(3, [[1], [-1, 2], [-2, 3]]))
    assert chain.u_edge.tolist() == [[1, 0, 0], [0, 1, 0], [1, 0, 0], [0, 1, 0], [1, 0, 0]]
    with pytest.raises(ValueError):
        tree_exact_sp(Instance.from_dimacs_ints(3, [[1, 2], [2, 3], [3, 1]]))


def test_tree_exact_is_a_fixed_point():
    from spdec.sp import cavity_survey, clause_message

    rng = np.random.default_rng(3)
    for _ in range(20):
        inst = random_forest(rng, 15, 10)
        try:
            st = tree_exact_sp(inst)
        except ArithmeticError:
            continue
        g = FactorGraph.from_instance(inst)
        for e in range(g.n_edges):
            i, c = int(g.edge_var[e]), int(g.edge_clause[e])
            assert cavity_survey(g, st, i, c) == pytest.approx(st.s_edge[e], abs=1e-14)
            assert clause_message(g, st, c, i) == pytest.approx(st.u_edge[e], abs=1e-14)
