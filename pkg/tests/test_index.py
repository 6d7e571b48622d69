import math

import numpy as np
import pytest

from proxtrace.errors import (
    DimensionMismatchError,
    FormatError,
    ValidationError,
)
from proxtrace.index import (
    BruteForceIndex,
    HnswIndex,
    IndexedItem,
    ItemStore,
    KdTreeIndex,
    brute_force_knn,
    hnsw_insert,
    hnsw_search,
    index_load,
    index_save,
    kd_build,
    kd_knn,
)


def quadratic_oracle(query, k, store):
    """Independent exhaustive k-NN, written without the library's code
    paths: plain python loops, sorted by (distance, item_id)."""
    scored = []
    for row in range(len(store)):
        d = 0.0
        for a, b in zip(store.vectors[row], query):
            d += (float(a) - float(b)) ** 2
        scored.append((math.sqrt(d), int(store.item_ids[row]), row))
    scored.sort()
    return scored[:k]


def random_store(n, dim=4, seed=0, lo=0.0, hi=1.0):
    rng = np.random.default_rng(seed)
    return ItemStore(
        item_ids=rng.permutation(n).astype(np.int64),  # ids != row order
        user_ids=np.arange(n, dtype=np.int64),
        timesteps=np.zeros(n, dtype=np.int64),
        vectors=rng.uniform(lo, hi, (n, dim)),
    )


def assert_matches_oracle(index, query, k, **kwargs):
    rows, dists = index.query_rows(query, k, **kwargs)
    expected = quadratic_oracle(query, k, index.store)
    assert len(rows) == len(expected)
    for (row, d), (od, oid, orow) in zip(zip(rows, dists), expected):
        assert int(index.store.item_ids[row]) == oid
        assert abs(d - od) <= 1e-9


class TestItemStore:
    def test_duplicate_item_ids_rejected(self):
        with pytest.raises(ValidationError):
            ItemStore(np.array([1, 1]), np.array([0, 1]), np.array([0, 0]),
                      np.zeros((2, 4)))

    def test_non_finite_vectors_rejected(self):
        with pytest.raises(ValidationError):
            ItemStore(np.array([0]), np.array([0]), np.array([0]),
                      np.array([[np.nan, 0, 0, 0]]))

    def test_from_items_round_trip(self):
        items = [IndexedItem(3, 1, 0, np.array([1.0, 2, 3, 4])),
                 IndexedItem(7, 2, 1, np.array([5.0, 6, 7, 8]))]
        store = ItemStore.from_items(items)
        for row, it in enumerate(items):
            got = store.item(row)
            assert (got.item_id, got.user_id, got.timestep) == \
                (it.item_id, it.user_id, it.timestep)
            assert np.array_equal(got.vector, it.vector)


class TestBruteForce:
    def test_self_match(self):
        store = random_store(50, seed=1)
        q = store.vectors[17]
        results = BruteForceIndex(store).query(q, 1)
        assert results[0].item_id == int(store.item_ids[17])
        assert results[0].distance == 0.0

    def test_k_exceeding_size_returns_all_sorted(self):
        store = random_store(20, seed=2)
        results = BruteForceIndex(store).query(np.zeros(4), 100)
        assert len(results) == 20
        dists = [r.distance for r in results]
        assert dists == sorted(dists)

    def test_matches_independent_oracle(self):
        store = random_store(1000, seed=3)
        index = BruteForceIndex(store)
        rng = np.random.default_rng(4)
        for _ in range(20):
            assert_matches_oracle(index, rng.uniform(0, 1, 4), 10)

    def test_empty_collection(self):
        assert brute_force_knn(np.zeros(4), 5, []) == []

    def test_tie_break_ascending_item_id(self):
        # four identical points: order must follow item_id
        store = ItemStore(np.array([9, 2, 7, 4]), np.zeros(4, np.int64),
                          np.zeros(4, np.int64), np.ones((4, 3)))
        results = BruteForceIndex(store).query(np.ones(3), 4)
        assert [r.item_id for r in results] == [2, 4, 7, 9]


class TestKdBuild:
    def test_single_item(self):
        store = random_store(1, seed=5)
        root = KdTreeIndex(store).root
        assert root.left is None and root.right is None
        assert root.discriminator == 0

    def test_three_collinear_points_median_root(self):
        store = ItemStore(np.array([0, 1, 2]), np.zeros(3, np.int64),
                          np.zeros(3, np.int64),
                          np.array([[1.0, 0, 0, 0], [2.0, 0, 0, 0],
                                    [3.0, 0, 0, 0]]))
        root = KdTreeIndex(store).root
        assert root.discriminator == 0
        assert root.item.vector[0] == 2.0

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            kd_build([])

    def test_height_bound(self):
        for n, seed in ((1000, 6), (4097, 7)):
            index = KdTreeIndex(random_store(n, seed=seed))
            assert index.height() <= math.ceil(math.log2(n)) + 1

    def test_splitting_invariant_exhaustive(self):
        # every descendant respects its ancestor's hyperplane; with the
        # lower-median rule, left-subtree keys are <= and right >=
        index = KdTreeIndex(random_store(10_000, seed=8))
        seen = []

        def walk(node):
            if node is None:
                return
            seen.append(node.item.item_id)
            j, key = node.discriminator, node.item.vector[node.discriminator]
            stack = [(node.left, True), (node.right, False)]
            while stack:
                sub, is_left = stack.pop()
                if sub is None:
                    continue
                if is_left:
                    assert sub.item.vector[j] <= key
                else:
                    assert sub.item.vector[j] >= key
                stack.append((sub.left, is_left))
                stack.append((sub.right, is_left))
            walk(node.left)
            walk(node.right)

        walk(index.root)
        assert sorted(seen) == sorted(index.store.item_ids.tolist())

    def test_discriminator_cycles_with_depth(self):
        index = KdTreeIndex(random_store(500, seed=9))

        def walk(node, depth):
            if node is None:
                return
            assert node.discriminator == depth % index.store.dim
            walk(node.left, depth + 1)
            walk(node.right, depth + 1)

        walk(index.root, 0)


class TestKdSearch:
    def test_single_node_tree(self):
        store = random_store(1, seed=10)
        results = kd_knn(KdTreeIndex(store), np.zeros(4), 1)
        assert results[0].item_id == int(store.item_ids[0])

    @pytest.mark.parametrize("k", [1, 10, 100])
    def test_equals_brute_force(self, k):
        store = random_store(1000, seed=11)
        kd = KdTreeIndex(store)
        brute = BruteForceIndex(store)
        rng = np.random.default_rng(12)
        for _ in range(100):
            q = rng.uniform(0, 1, 4)
            assert kd.query(q, k) == brute.query(q, k)

    def test_query_far_outside_bounding_box(self):
        store = random_store(500, seed=13)
        index = KdTreeIndex(store)
        assert_matches_oracle(index, np.full(4, 1e6), 10)
        assert_matches_oracle(index, np.full(4, -1e6), 10)

    def test_duplicate_points_tie_break(self):
        rng = np.random.default_rng(14)
        vectors = np.repeat(rng.uniform(0, 1, (50, 4)), 4, axis=0)
        n = vectors.shape[0]
        store = ItemStore(rng.permutation(n).astype(np.int64),
                          np.zeros(n, np.int64), np.zeros(n, np.int64),
                          vectors)
        kd = KdTreeIndex(store)
        brute = BruteForceIndex(store)
        for q in vectors[::13]:
            assert kd.query(q, 8) == brute.query(q, 8)

    def test_max_visits_caps_work(self):
        store = random_store(2000, seed=15)
        index = KdTreeIndex(store)
        index.query_rows(np.full(4, 0.5), 10, max_visits=50)
        assert index.last_visits <= 50

    def test_k_less_than_one_rejected(self):
        with pytest.raises(ValidationError):
            KdTreeIndex(random_store(10, seed=16)).query_rows(np.zeros(4), 0)


class TestHnswConstruction:
    def test_first_insertion_becomes_entry_point(self):
        graph = HnswIndex(ItemStore.from_items([]))
        hnsw_insert(graph, IndexedItem(0, 0, 0, np.array([1.0, 2, 3, 4])))
        assert graph.entry_point == 0
        assert graph.top_level == int(graph.levels[0])

    def test_duplicate_item_id_rejected(self):
        graph = HnswIndex(random_store(10, seed=17))
        dup = int(graph.store.item_ids[0])
        with pytest.raises(ValidationError):
            graph.insert(IndexedItem(dup, 0, 0, np.zeros(4)))

    def test_level_distribution(self):
        # levels follow floor(-ln(U) * m_L), a geometric law with
        # q = exp(-1/m_L); its true mean is q / (1 - q).  (That the mean
        # should approximate m_L itself is a common misreading: for
        # m_L = 1/ln(16), q = 1/16 and the mean is 1/15, not 0.36.)
        graph = HnswIndex(random_store(10_000, seed=18), seed=99)
        q = math.exp(-1.0 / graph.m_l)
        mean = q / (1 - q)
        var = q / (1 - q) ** 2
        observed = float(graph.levels.mean())
        se = math.sqrt(var / graph.levels.shape[0])
        assert abs(observed - mean) <= 3 * se

    def test_layer0_connected(self):
        graph = HnswIndex(random_store(10_000, seed=19), seed=5)
        assert graph.layer0_connected()

    def test_degree_caps(self):
        graph = HnswIndex(random_store(3000, seed=20), seed=1)
        M = graph.max_neighbors
        for node in range(len(graph.store)):
            assert graph.neighbors(node, 0).shape[0] <= 2 * M
            for layer in range(1, int(graph.levels[node]) + 1):
                assert graph.neighbors(node, layer).shape[0] <= M

    def test_every_node_on_all_layers_below_its_level(self):
        # adjacency entries at layer l only reference nodes with level >= l
        graph = HnswIndex(random_store(2000, seed=21), seed=2)
        for node in range(len(graph.store)):
            for layer in range(int(graph.levels[node]) + 1):
                for nb in graph.neighbors(node, layer):
                    assert graph.levels[nb] >= layer

    def test_deterministic_graphs(self):
        a = HnswIndex(random_store(1000, seed=22), seed=7)
        b = HnswIndex(random_store(1000, seed=22), seed=7)
        assert np.array_equal(a.levels, b.levels)
        assert np.array_equal(a.neigh, b.neigh)
        assert np.array_equal(a.counts, b.counts)

    def test_incremental_equals_bulk(self):
        store = random_store(300, seed=23)
        bulk = HnswIndex(store, seed=3)
        inc = HnswIndex(ItemStore.from_items([], store.representation), seed=3)
        for row in range(len(store)):
            inc.insert(store.item(row))
        assert np.array_equal(bulk.levels, inc.levels)
        assert np.array_equal(bulk.neigh, inc.neigh)


class TestHnswSearch:
    def test_single_item_graph(self):
        store = random_store(1, seed=24)
        results = hnsw_search(HnswIndex(store), np.zeros(4), 5)
        assert len(results) == 1
        assert results[0].item_id == int(store.item_ids[0])

    def test_empty_graph_rejected(self):
        graph = HnswIndex(ItemStore.from_items([]))
        with pytest.raises(ValidationError):
            hnsw_search(graph, np.zeros(4), 1)

    def test_recall_against_oracle(self):
        store = random_store(2000, seed=25)
        graph = HnswIndex(store, seed=4)
        brute = BruteForceIndex(store)
        rng = np.random.default_rng(26)
        hits = total = 0
        for _ in range(100):
            q = rng.uniform(0, 1, 4)
            truth = {r.item_id for r in brute.query(q, 10)}
            found = {r.item_id for r in graph.query(q, 10, ef_search=100)}
            hits += len(truth & found)
            total += len(truth)
        assert hits / total >= 0.95

    def test_self_match_at_ef_one(self):
        store = random_store(2000, seed=27)
        graph = HnswIndex(store, seed=6)
        rng = np.random.default_rng(28)
        found = 0
        for row in rng.integers(0, 2000, 100):
            r = graph.query(store.vectors[row], 1, ef_search=1)
            found += r[0].distance == 0.0
        assert found >= 99

    def test_recall_non_decreasing_in_ef(self):
        store = random_store(3000, seed=29)
        graph = HnswIndex(store, seed=8)
        brute = BruteForceIndex(store)
        rng = np.random.default_rng(30)
        queries = rng.uniform(0, 1, (100, 4))
        truths = [{r.item_id for r in brute.query(q, 10)} for q in queries]
        recalls = []
        for ef in (10, 25, 50, 100, 200):
            hits = sum(
                len(truth & {r.item_id for r in graph.query(q, 10, ef_search=ef)})
                for q, truth in zip(queries, truths))
            recalls.append(hits / (10 * len(queries)))
        # statistical monotonicity: small local dips allowed, trend must hold
        for lo, hi in zip(recalls, recalls[1:]):
            assert hi >= lo - 0.01
        assert recalls[-1] >= recalls[0]

    def test_ef_below_k_rejected(self):
        graph = HnswIndex(random_store(10, seed=31))
        with pytest.raises(ValidationError):
            graph.query_rows(np.zeros(4), 5, ef_search=2)

    def test_results_sorted_by_distance_then_id(self):
        store = random_store(500, seed=32)
        graph = HnswIndex(store, seed=9)
        rows, dists = graph.query_rows(np.full(4, 0.5), 20)
        keys = [(d, int(store.item_ids[r])) for r, d in zip(rows, dists)]
        assert keys == sorted(keys)


class TestCrossBackend:
    def test_identical_when_k_covers_everything(self):
        store = random_store(64, seed=33)
        q = np.full(4, 0.3)
        expected = BruteForceIndex(store).query(q, 64)
        assert KdTreeIndex(store).query(q, 64) == expected
        assert HnswIndex(store, seed=1).query(q, 64, ef_search=64) == expected


class TestIndexIo:
    @pytest.mark.parametrize("make", [
        BruteForceIndex,
        KdTreeIndex,
        lambda s: HnswIndex(s, seed=11),
    ])
    def test_round_trip_query_identical(self, tmp_path, make):
        store = random_store(800, seed=34)
        index = make(store)
        path = tmp_path / "index.bin"
        index_save(index, path)
        loaded = index_load(path)
        rng = np.random.default_rng(35)
        for _ in range(100):
            q = rng.uniform(0, 1, 4)
            assert loaded.query(q, 10) == index.query(q, 10)

    def test_corrupted_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTANIDX" + b"\x00" * 64)
        with pytest.raises(FormatError):
            index_load(path)

    def test_truncated_file(self, tmp_path):
        store = random_store(50, seed=36)
        path = tmp_path / "index.bin"
        index_save(KdTreeIndex(store), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:len(blob) // 2])
        with pytest.raises(FormatError):
            index_load(path)

    def test_wrong_version(self, tmp_path):
        store = random_store(10, seed=37)
        path = tmp_path / "index.bin"
        index_save(BruteForceIndex(store), path)
        blob = bytearray(path.read_bytes())
        blob[8] = 99  # version field
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError):
            index_load(path)

    def test_missing_file_is_oserror(self, tmp_path):
        with pytest.raises(OSError):
            index_load(tmp_path / "nope.bin")

    def test_dimension_mismatch_on_query(self, tmp_path):
        store = random_store(20, seed=38)
        path = tmp_path / "index.bin"
        index_save(KdTreeIndex(store), path)
        with pytest.raises(DimensionMismatchError):
            index_load(path).query(np.zeros(7), 1)
