import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cogran.dataset import Dataset, gen_synthetic
from cogran.som import (
    Discretization1D,
    SomGrid,
    TrainSchedule,
    bmu,
    bmu_many,
    discretize_1d,
    granules,
    init_grid,
    quantization_error,
    save_prototypes,
    train_batch,
)

TWO_CLUSTERS = np.array(
    [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [1.0, 1.0], [0.9, 1.0], [1.0, 0.9]]
)


def best_two_partition(points):
    """Brute force: the 2-way split of the points minimizing within-group SSE."""
    best = None
    n = len(points)
    for mask in itertools.product([0, 1], repeat=n):
        mask = np.array(mask)
        if mask.all() or not mask.any():
            continue
        groups = [points[mask == g] for g in (0, 1)]
        cost = sum(((g - g.mean(axis=0)) ** 2).sum() for g in groups)
        if best is None or cost < best[0] - 1e-15:
            best = (cost, sorted(tuple(g.mean(axis=0)) for g in groups))
    return best[1]


def test_two_partition_oracle_frozen():
    # frozen from best_two_partition(TWO_CLUSTERS)
    assert np.allclose(best_two_partition(TWO_CLUSTERS), [(1 / 30, 1 / 30), (29 / 30, 29 / 30)])


def test_init_grid_samples_records():
    data = gen_synthetic(10, 3, 0.1, seed=0)
    grid = init_grid(2, 2, 4, data, seed=5)
    joint = data.joint()
    assert grid.n_units == 4
    for w in grid.prototypes:
        assert any(np.array_equal(w, row) for row in joint)
    assert init_grid(2, 2, 4, data, seed=5) == grid
    one = init_grid(1, 1, 4, data, seed=5)
    assert one.prototypes.shape == (1, 4)


def test_init_grid_without_replacement_when_possible():
    M = np.arange(12, dtype=float).reshape(6, 2)
    grid = init_grid(2, 3, 2, M, seed=0)
    assert len({tuple(w) for w in grid.prototypes}) == 6
    big = init_grid(3, 3, 2, M, seed=0)  # more units than rows -> duplicates allowed
    assert big.n_units == 9


def test_init_grid_empty():
    with pytest.raises(ValueError):
        init_grid(2, 2, 2, np.empty((0, 2)), seed=0)


def test_bmu_cases():
    grid = SomGrid(1, 2, [[0.0, 0.0], [1.0, 1.0]])
    assert bmu(grid, [0.1, 0.0]) == 0
    assert bmu(grid, [0.5, 0.5]) == 0
    assert bmu(grid, [1.0, 1.0]) == 1
    with pytest.raises(ValueError):
        bmu(grid, [1.0])


@given(st.lists(st.integers(0, 3), min_size=2, max_size=2), st.integers(0, 1000))
@settings(max_examples=100, deadline=None)
def test_bmu_tie_break_is_min_of_argmin(x, seed):
    # integer-valued prototypes make exact ties common
    W = np.random.default_rng(seed).integers(0, 4, size=(6, 2)).astype(float)
    grid = SomGrid(2, 3, W)
    d = ((W - np.array(x, float)) ** 2).sum(axis=1)
    assert bmu(grid, x) == min(np.flatnonzero(d == d.min()))
    assert bmu_many(grid, [x])[0] == bmu(grid, x)


def test_single_unit_converges_to_mean_in_one_epoch():
    M = gen_synthetic(30, 2, 0.1, seed=2).joint()
    grid = init_grid(1, 1, 3, M, seed=0)
    out = train_batch(grid, M, TrainSchedule(epochs=1, radius_start=0.0, radius_end=0.0))
    np.testing.assert_allclose(out.prototypes[0], M.mean(axis=0), atol=1e-12)


def test_two_clusters_land_in_their_hulls():
    grid = SomGrid(1, 2, TWO_CLUSTERS[[0, 1]])  # both start in cluster A
    out = train_batch(grid, TWO_CLUSTERS, TrainSchedule(epochs=10, radius_start=1.0, radius_end=0.0))
    got = sorted(map(tuple, out.prototypes))
    np.testing.assert_allclose(got, best_two_partition(TWO_CLUSTERS), atol=1e-12)


def test_one_epoch_moves_prototypes():
    M = gen_synthetic(40, 2, 0.1, seed=3).joint()
    grid = init_grid(2, 2, 3, M, seed=1)
    out = train_batch(grid, M, TrainSchedule(epochs=1, radius_start=0.5, radius_end=0.5))
    assert not np.array_equal(out.prototypes, grid.prototypes)
    with pytest.raises(ValueError):
        TrainSchedule(epochs=0)


def test_at_weighted_means_is_a_fixed_point():
    grid = SomGrid(1, 2, [[1 / 30, 1 / 30], [29 / 30, 29 / 30]])
    out = train_batch(grid, TWO_CLUSTERS, TrainSchedule(epochs=1, radius_start=0.0, radius_end=0.0))
    np.testing.assert_allclose(out.prototypes, grid.prototypes, atol=1e-15)


def test_quantization_error_cases():
    grid = SomGrid(1, 2, TWO_CLUSTERS[:2])
    assert quantization_error(grid, TWO_CLUSTERS[:2]) == 0.0
    mid = SomGrid(1, 1, [[1.0]])
    assert quantization_error(mid, np.array([[0.0], [2.0]])) == pytest.approx(1.0)
    M = np.array([[0.0], [2.0], [2.0]])
    per = np.abs(M[:, 0] - 1.0)
    assert quantization_error(mid, M) == pytest.approx(per.mean())
    with pytest.raises(ValueError):
        quantization_error(mid, np.empty((0, 1)))


@pytest.mark.parametrize("seed", range(8))
def test_qe_non_increasing_in_bmu_mean_phase(seed):
    M = gen_synthetic(300, 3, 0.05, seed=seed).joint()
    grid = init_grid(6, 5, 4, M, seed=seed)
    grid = train_batch(grid, M, TrainSchedule.default_for(6, 5))
    errs = [quantization_error(grid, M)]
    for _ in range(10):
        grid = train_batch(grid, M, TrainSchedule(epochs=1, radius_start=0.5, radius_end=0.5))
        errs.append(quantization_error(grid, M))
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_granules_split_and_count():
    grid = SomGrid(3, 4, np.tile([0.2, 0.3, 0.9], (12, 1)))
    g = granules(grid)
    assert len(g) == 12
    assert g.records[0] == ((0.2, 0.3), 0.9)
    M = gen_synthetic(20, 2, 0.1, seed=0).joint()
    assert len(granules(init_grid(2, 3, 3, M, seed=0))) == 6


def test_prototype_dump(tmp_path):
    grid = SomGrid(2, 2, np.arange(12, dtype=float).reshape(4, 3))
    text = save_prototypes(grid, tmp_path / "p.csv").read_text().splitlines()
    assert text[0] == "unit,row,col,w_0,w_1,w_2"
    assert text[3] == "2,1,0,6.0,7.0,8.0"


def best_split_1d(values, k):
    """Brute force over contiguous splits of the sorted values (optimal for 1-D k-means)."""
    v = np.sort(np.asarray(values, float))
    best = None
    for cuts in itertools.combinations(range(1, len(v)), k - 1):
        groups = np.split(v, cuts)
        cost = sum(((g - g.mean()) ** 2).sum() for g in groups)
        if best is None or cost < best[0]:
            best = (cost, [g.mean() for g in groups])
    return best[1]


def test_discretize_two_centers():
    values = [0.0, 0.1, 0.9, 1.0]
    assert np.allclose(best_split_1d(values, 2), [0.05, 0.95])  # frozen oracle value
    d = discretize_1d(values, 2, seed=0)
    np.testing.assert_allclose(d.codebook, [0.05, 0.95], atol=1e-12)
    assert d.boundaries[0] == pytest.approx(0.5)
    assert list(d.classify(values)) == [0, 0, 1, 1]


def test_discretize_single_class():
    d = discretize_1d([3.0, 1.0, 2.0], 1)
    assert list(d.classify([3.0, 1.0, 2.0, 100.0])) == [0, 0, 0, 0]


def test_discretize_three_levels_in_value_order():
    v = np.concatenate([np.full(5, 0.1), np.full(5, 0.5), np.full(5, 0.9)]) + np.linspace(0, 0.01, 15)
    d = discretize_1d(v, 3)
    assert d.labels() == ("low", "middle", "high")
    assert list(d.classify([0.1, 0.5, 0.9])) == [0, 1, 2]


def test_discretize_collapses_duplicates():
    d = discretize_1d([1.0, 1.0, 2.0, 2.0], 4)
    assert d.k == 2 and d.requested_k == 4 and d.collapsed
    assert d.codebook == (1.0, 2.0)


def test_codebook_must_be_sorted():
    with pytest.raises(ValueError):
        Discretization1D((1.0, 1.0))


@given(
    st.lists(st.floats(-100, 100), min_size=1, max_size=60),
    st.integers(1, 6),
    st.floats(-150, 150),
    st.floats(-150, 150),
)
@settings(max_examples=100, deadline=None)
def test_discretize_class_function_monotone(values, k, a, b):
    d = discretize_1d(values, k)
    lo, hi = min(a, b), max(a, b)
    assert d.classify(lo) <= d.classify(hi)
    assert all(q > p for p, q in zip(d.codebook, d.codebook[1:]))
    for i, bnd in enumerate(d.boundaries):
        assert bnd == pytest.approx((d.codebook[i] + d.codebook[i + 1]) / 2)
