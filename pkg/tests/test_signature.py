import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from infoaccess import signature as sg
from infoaccess import synthetic
from infoaccess.cascade import CascadeParams, estimate_receipt_probabilities, exact_probabilities


def test_select_degree_star(star):
    assert sg.select_seeds(star, "degree", 1).seeds == (7,)
    assert star.node_ids[7] == "t"


def test_select_random_full_is_permutation(star):
    s = sg.select_seeds(star, "random", 8, master_seed=3)
    assert sorted(s.seeds) == list(range(8))


def test_select_betweenness_path():
    assert sg.select_seeds(synthetic.path_graph(3), "betweenness", 1).seeds == (1,)


def test_select_random_deterministic():
    g = synthetic.gnm_graph(50, 100, seed=1)
    a = sg.select_seeds(g, "random", 7, master_seed=5)
    assert a == sg.select_seeds(g, "random", 7, master_seed=5)
    assert a != sg.select_seeds(g, "random", 7, master_seed=6)


def test_select_ties_to_lower_index():
    assert sg.select_seeds(synthetic.cycle_graph(6), "pagerank", 3).seeds == (0, 1, 2)
    assert sg.select_seeds(synthetic.cycle_graph(6), "degree", 2).seeds == (0, 1)


def test_select_errors(star):
    with pytest.raises(ValueError):
        sg.select_seeds(star, "degree", 9)
    with pytest.raises(ValueError):
        sg.select_seeds(star, "degree", 0)
    with pytest.raises(ValueError):
        sg.select_seeds(star, "closeness", 2)
    with pytest.raises(ValueError):
        sg.select_seeds(star, "all", 3)


@pytest.mark.parametrize("n, m", [(391_642, 626), (4, 2), (1, 1), (5, 3), (100, 10)])
def test_default_sample_size(n, m):
    assert sg.default_sample_size(n) == m


def test_star_full_representation(star):
    rep = sg.build_representation(star, sg.all_seeds(star), CascadeParams(0.5, 10_000))
    leaf = rep.matrix[0]
    assert leaf[0] == 1.0
    assert np.allclose(leaf[1:7], 0.25, atol=0.02)
    assert abs(leaf[7] - 0.5) < 0.02
    assert np.allclose(rep.matrix[7, :7], 0.5, atol=0.02) and rep.matrix[7, 7] == 1.0
    assert np.allclose(rep.matrix, rep.matrix.T, atol=0.03)


def test_alpha_zero_identity_pattern():
    g = synthetic.gnm_graph(20, 40, seed=2)
    seeds = sg.select_seeds(g, "pagerank", 5)
    rep = sg.build_representation(g, seeds, CascadeParams(0.0, 100))
    expect = np.zeros((20, 5))
    expect[list(seeds.seeds), np.arange(5)] = 1.0
    assert np.array_equal(rep.matrix, expect)


def test_alpha_one_all_ones():
    g = synthetic.cycle_graph(9)
    rep = sg.build_representation(g, sg.all_seeds(g), CascadeParams(1.0, 50))
    assert (rep.matrix == 1.0).all()


@pytest.mark.parametrize("directed", [False, True])
def test_columns_bit_identical_to_estimator(directed):
    g, _ = synthetic.planted_partition([40, 40], 0.2, 0.02, seed=3, directed=directed)
    p = CascadeParams(0.45, 1500, master_seed=21)
    seeds = sg.select_seeds(g, "random", 9, master_seed=1)
    rep = sg.build_representation(g, seeds, p, block=400)
    for j, s in enumerate(seeds.seeds):
        assert np.array_equal(rep.matrix[:, j], estimate_receipt_probabilities(g, s, p))


def test_restriction_equals_sampled_build():
    g = synthetic.gnm_graph(60, 140, seed=5)
    p = CascadeParams(0.3, 2000, master_seed=8)
    full = sg.build_representation(g, sg.all_seeds(g), p)
    for strategy in ("random", "pagerank", "betweenness", "degree"):
        seeds = sg.select_seeds(g, strategy, 8, master_seed=2)
        sampled = sg.build_representation(g, seeds, p)
        assert np.array_equal(sg.restrict_columns(full, seeds), sampled.matrix)


def test_representation_invariants():
    g = synthetic.gnm_graph(30, 60, seed=9)
    seeds = sg.select_seeds(g, "degree", 6)
    rep = sg.build_representation(g, seeds, CascadeParams(0.6, 500))
    assert rep.matrix.shape == (30, 6)
    assert ((rep.matrix >= 0) & (rep.matrix <= 1)).all()
    assert (rep.matrix[list(seeds.seeds), np.arange(6)] == 1).all()


def test_histogram_all_ones():
    h = sg.p_histogram(np.ones((4, 3)), 10)
    assert list(h.counts) == [0] * 9 + [12]
    assert h.bin_edges[0] == 0 and h.bin_edges[-1] == 1


def test_histogram_alpha_zero():
    g = synthetic.cycle_graph(7)
    rep = sg.build_representation(g, sg.select_seeds(g, "degree", 3), CascadeParams(0.0, 10))
    h = sg.p_histogram(rep, 5)
    assert list(h.counts) == [18, 0, 0, 0, 3]


def test_histogram_star_closed_form(star):
    h = sg.p_histogram(exact_probabilities(star, 0.5), 4)
    assert list(h.counts) == [0, 42, 14, 8]
    rep = sg.build_representation(star, sg.all_seeds(star), CascadeParams(0.5, 10_000))
    mc = sg.p_histogram(rep, 4).counts
    assert mc.sum() == 64 and mc[3] == 8
    # MC noise straddles the 0.25 and 0.5 bin edges, so check the mass near each value
    near = [np.sum(np.abs(rep.matrix - v) < 0.03) for v in (0.25, 0.5, 1.0)]
    assert near == [42, 14, 8]


@settings(max_examples=40, deadline=None)
@given(hst.integers(1, 12), hst.integers(1, 12), hst.integers(1, 20), hst.integers(0, 2**31))
def test_histogram_counts_sum(n, m, bins, seed):
    x = np.random.default_rng(seed).random((n, m))
    x[0, 0] = 1.0
    h = sg.p_histogram(x, bins)
    assert h.counts.sum() == n * m
    assert len(h.bin_edges) == bins + 1


def test_histogram_bad_bins():
    with pytest.raises(ValueError):
        sg.p_histogram(np.ones((2, 2)), 0)


def test_save_load_round_trip(tmp_path, star):
    rep = sg.build_representation(star, sg.select_seeds(star, "degree", 3), CascadeParams(0.4, 777, 5))
    files = sg.save_representation(rep, tmp_path / "rep")
    assert [f.suffix for f in files] == [".csv", ".json", ".iarp"]
    header = (tmp_path / "rep.csv").read_text().splitlines()[0]
    assert header == "node_id," + ",".join(rep.seed_ids)
    meta = json.loads((tmp_path / "rep.json").read_text())
    assert meta["alpha"] == 0.4 and meta["trials"] == 777 and meta["master_seed"] == 5
    assert meta["strategy"] == "degree" and meta["graph_hash"] == star.content_hash()
    assert "626" in meta["sample_size_note"]
    back = sg.load_representation(tmp_path / "rep")
    assert np.array_equal(back.matrix, rep.matrix)
    assert back.seed_set == rep.seed_set and back.node_ids == rep.node_ids
    assert np.array_equal(sg.read_iarp(tmp_path / "rep.iarp"), rep.matrix.astype(np.float32))


def test_iarp_layout(tmp_path):
    x = np.arange(6, dtype=float).reshape(2, 3) / 10
    raw = sg.write_iarp(tmp_path / "x.iarp", x).read_bytes()
    assert raw[:4] == b"IARP"
    assert struct.unpack("<BQQ", raw[4:21]) == (1, 2, 3)
    assert np.array_equal(np.frombuffer(raw[21:], "<f4"), x.ravel().astype("<f4"))


def test_iarp_rejects_bad_files(tmp_path):
    (tmp_path / "bad.iarp").write_bytes(b"NOPE")
    with pytest.raises(ValueError):
        sg.read_iarp(tmp_path / "bad.iarp")
    raw = sg.write_iarp(tmp_path / "x.iarp", np.ones((3, 3))).read_bytes()
    (tmp_path / "short.iarp").write_bytes(raw[:-4])
    with pytest.raises(ValueError, match="truncated"):
        sg.read_iarp(tmp_path / "short.iarp")


def test_checkpoint_resume(tmp_path):
    g = synthetic.gnm_graph(40, 90, seed=4)
    p = CascadeParams(0.4, 1000, master_seed=2)
    seeds = sg.all_seeds(g)
    plain = sg.build_representation(g, seeds, p)
    ckpt = tmp_path / "ckpt"
    first = sg.build_representation(g, seeds, p, checkpoint_dir=ckpt, block=250)
    blocks = sorted(ckpt.glob("block_*.npy"))
    assert len(blocks) == 4
    # simulate an interruption after two blocks
    for f in blocks[2:]:
        f.unlink()
    resumed = sg.build_representation(g, seeds, p, checkpoint_dir=ckpt, block=250)
    assert np.array_equal(first.matrix, plain.matrix)
    assert np.array_equal(resumed.matrix, plain.matrix)
    # a different alpha invalidates the stale blocks
    other = sg.build_representation(g, seeds, CascadeParams(0.6, 1000, 2), checkpoint_dir=ckpt, block=250)
    assert np.array_equal(other.matrix, sg.build_representation(g, seeds, CascadeParams(0.6, 1000, 2)).matrix)


def test_seedset_validation(star):
    with pytest.raises(ValueError):
        sg.SeedSet((1, 1), "random")
    with pytest.raises(ValueError):
        sg.SeedSet((), "random")
    with pytest.raises(ValueError):
        sg.SeedSet((0, 20), "random").validate_for(star)
