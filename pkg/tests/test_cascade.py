import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from infoaccess import cascade as cs
from infoaccess import synthetic
from infoaccess.graph import Graph


def params(alpha, trials=10_000, seed=0):
    return cs.CascadeParams(alpha=alpha, trials=trials, master_seed=seed)


def test_params_validation():
    with pytest.raises(ValueError):
        cs.CascadeParams(alpha=1.5)
    with pytest.raises(ValueError):
        cs.CascadeParams(alpha=0.5, trials=0)


def test_alpha_one_reaches_component():
    g = Graph.from_edges(5, [(0, 1), (1, 2), (3, 4)])
    for t in range(5):
        assert list(cs.simulate_cascade(g, [0], params(1.0), t)) == [0, 1, 2]


def test_alpha_zero_only_seeds(star):
    for t in range(5):
        assert list(cs.simulate_cascade(star, [2, 7], params(0.0), t)) == [2, 7]


def test_simulate_errors(star):
    with pytest.raises(ValueError):
        cs.simulate_cascade(star, [], params(0.5), 0)
    with pytest.raises(ValueError):
        cs.simulate_cascade(star, [0], params(0.5, trials=10), 10)
    with pytest.raises(ValueError):
        cs.simulate_cascade(star, [99], params(0.5), 0)


def test_single_edge_mean_size():
    g = Graph.from_edges(2, [(0, 1)])
    p = params(0.3, trials=20_000)
    sizes = [len(cs.simulate_cascade(g, [0], p, t)) for t in range(p.trials)]
    assert abs(np.mean(sizes) - 1.3) < 4 * np.sqrt(0.21 / p.trials)


def test_star_center_probabilities(star):
    probs = cs.estimate_receipt_probabilities(star, 7, params(0.5))
    assert probs[7] == 1.0
    assert np.allclose(probs[:7], 0.5, atol=0.02)


def test_triangle_probabilities(triangle):
    # P(reach) = a + (1 - a) a^2 for the two-hop detour
    probs = cs.estimate_receipt_probabilities(triangle, 0, params(0.5))
    assert np.allclose(probs[1:], 0.625, atol=0.02)


def test_exact_single_edge():
    g = Graph.from_edges(2, [(0, 1)])
    assert np.allclose(cs.exact_probabilities(g, 0.3), [[1, 0.3], [0.3, 1]])


def test_exact_triangle(triangle):
    ex = cs.exact_probabilities(triangle, 0.5)
    assert np.allclose(ex[~np.eye(3, dtype=bool)], 0.625)


def test_exact_star(star):
    ex = cs.exact_probabilities(star, 0.4)
    assert np.allclose(ex[7, :7], 0.4)
    assert np.allclose(ex[0, 1:7], 0.16)


def test_exact_directed_chain():
    g = Graph.from_edges(3, [(0, 1), (1, 2)], directed=True)
    ex = cs.exact_probabilities(g, 0.6)
    assert ex[0, 2] == pytest.approx(0.36)
    assert ex[0, 1] == pytest.approx(0.6)
    assert ex[2, 0] == 0.0 and ex[1, 0] == 0.0


def test_exact_edge_cap():
    g = synthetic.complete_graph(8)
    with pytest.raises(ValueError, match="Monte Carlo"):
        cs.exact_probabilities(g, 0.5)


small_graphs = hst.integers(2, 8).flatmap(
    lambda n: hst.tuples(
        hst.just(n),
        hst.lists(hst.tuples(hst.integers(0, n - 1), hst.integers(0, n - 1)), max_size=14),
        hst.booleans(),
        hst.sampled_from([0.2, 0.5, 0.8]),
    )
)


@settings(max_examples=12, deadline=None)
@given(small_graphs)
def test_percolation_identity(spec):
    """IC estimate, percolation mean and exact enumeration agree."""
    n, edges, directed, alpha = spec
    g = Graph.from_edges(n, edges, directed)
    p = params(alpha, trials=20_000, seed=11)
    ic = np.column_stack([cs.estimate_receipt_probabilities(g, s, p) for s in range(n)]).T
    perc = cs.percolation_cooccurrence_mean(g, p)
    exact = cs.exact_probabilities(g, alpha)
    bound = 4 * np.sqrt(exact * (1 - exact) / p.trials) + 0.005
    assert (np.abs(ic - exact) <= bound).all()
    assert (np.abs(perc - exact) <= bound).all()


def test_cooccurrence_mean_is_sample_average():
    g = synthetic.gnm_graph(12, 20, seed=3)
    for directed in (False, True):
        h = Graph.from_edges(12, g.edges, directed)
        p = params(0.4, trials=40, seed=5)
        avg = sum(cs.percolation_cooccurrence_sample(h, p, t) for t in range(40)) / 40
        assert np.array_equal(cs.percolation_cooccurrence_mean(h, p), avg)


def test_cooccurrence_sample_symmetric_binary():
    g = synthetic.gnm_graph(15, 25, seed=1)
    s = cs.percolation_cooccurrence_sample(g, params(0.5), 3)
    assert np.array_equal(s, s.T)
    assert set(np.unique(s)) <= {0.0, 1.0}
    assert (np.diag(s) == 1).all()


def test_determinism_and_seed_sensitivity():
    g = synthetic.gnm_graph(30, 60, seed=2)
    a = cs.estimate_receipt_probabilities(g, 4, params(0.4, 2000, seed=9))
    b = cs.estimate_receipt_probabilities(g, 4, params(0.4, 2000, seed=9))
    c = cs.estimate_receipt_probabilities(g, 4, params(0.4, 2000, seed=10))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_coupled_monotone_in_alpha():
    g = synthetic.gnm_graph(25, 50, seed=4)
    lo = cs.estimate_receipt_probabilities(g, 0, params(0.3, 3000))
    hi = cs.estimate_receipt_probabilities(g, 0, params(0.6, 3000))
    assert (hi >= lo).all()
    e_lo, e_hi = cs.exact_probabilities(synthetic.cycle_graph(6), 0.3), \
        cs.exact_probabilities(synthetic.cycle_graph(6), 0.6)
    assert (e_hi >= e_lo - 1e-15).all()


def test_undirected_symmetry():
    g = synthetic.gnm_graph(20, 40, seed=6)
    p = params(0.5, 20_000)
    a = cs.estimate_receipt_probabilities(g, 2, p)[9]
    b = cs.estimate_receipt_probabilities(g, 9, p)[2]
    assert abs(a - b) < 0.02


@pytest.mark.parametrize("directed", [False, True])
def test_receipt_counts_match_bfs(directed):
    # large planted blocks exercise both the small-component loop and the matrix path
    g, _ = synthetic.planted_partition([70, 70], 0.15, 0.01, seed=8, directed=directed)
    p = params(0.5, 1200, seed=3)
    sources = np.array([0, 5, 80, 139])
    counts = cs.receipt_counts(g, sources, p, block=300)
    for j, s in enumerate(sources):
        col = cs.estimate_receipt_probabilities(g, s, p) * p.trials
        col[s] = 0
        assert np.array_equal(counts[:, j], col.astype(np.int64))


def test_receipt_counts_independent_of_workers_and_blocks():
    g = synthetic.gnm_graph(60, 150, seed=1)
    p = params(0.35, 2000, seed=4)
    src = np.arange(60)
    base = cs.receipt_counts(g, src, p, workers=1, block=500)
    assert np.array_equal(base, cs.receipt_counts(g, src, p, workers=3, block=500))
    assert np.array_equal(base, cs.receipt_counts(g, src, p, workers=2, block=137))
    split = cs.receipt_counts(g, src, p, 0, 700) + cs.receipt_counts(g, src, p, 700, 2000)
    assert np.array_equal(base, split)


def test_probability_csv(tmp_path, star):
    path = tmp_path / "p.csv"
    cs.write_probability_csv(path, star, cs.estimate_receipt_probabilities(star, 7, params(1.0, 10)))
    lines = path.read_text().splitlines()
    assert lines[0] == "node_id,probability"
    assert lines[-1] == "t,1.0"
    assert len(lines) == 9
