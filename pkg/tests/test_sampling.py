import numpy as np
import pytest

from quantlab.sampling import (
    DEFAULT_PREVALENCE_GRID,
    ProtocolPlan,
    SampleSpec,
    derive_seed,
    generate_indices,
    protocol_samples,
    realized_prevalence,
    round_half_up,
    stratified_split,
)


def labels_pool(n_pos, n_neg):
    return np.array([1] * n_pos + [0] * n_neg, dtype=np.int8)


class TestDeriveSeed:
    def test_stable_and_distinct(self):
        a = derive_seed(42, 0, 0)
        assert a == derive_seed(42, 0, 0)
        assert a != derive_seed(42, 0, 1)
        assert a != derive_seed(42, 1, 0)
        assert derive_seed(1, "x") != derive_seed(1, "y")

    def test_64_bit(self):
        assert 0 <= derive_seed(123, "anything") < 2**64

    def test_type_discipline(self):
        with pytest.raises(TypeError):
            derive_seed(1.5)


class TestRounding:
    @pytest.mark.parametrize("x,expected", [(1.8, 2), (0.6, 1), (2.5, 3), (0.5, 1), (0.0, 0), (3.0, 3)])
    def test_half_away_from_zero(self, x, expected):
        assert round_half_up(x) == expected


class TestGenerateIndices:
    def test_forced_counts_without_replacement(self):
        pool = labels_pool(100, 100)
        sample = generate_indices(pool, SampleSpec(0.3, 10, seed=1))
        assert len(sample) == 10
        picked = pool[sample.indices]
        assert int(picked.sum()) == 3
        assert len(np.unique(sample.indices)) == 10  # all distinct

    def test_boundary_prevalence(self):
        pool = labels_pool(100, 100)
        sample = generate_indices(pool, SampleSpec(1.0, 10, seed=2))
        assert pool[sample.indices].sum() == 10

    def test_with_replacement_when_scarce(self):
        pool = labels_pool(2, 100)
        sample = generate_indices(pool, SampleSpec(0.5, 10, seed=3))
        picked = pool[sample.indices]
        assert int(picked.sum()) == 5
        pos_drawn = sample.indices[picked == 1]
        assert set(pos_drawn) <= {0, 1}  # only the two positives, repeated
        neg_drawn = sample.indices[picked == 0]
        assert len(np.unique(neg_drawn)) == 5  # negatives without replacement

    def test_class_unavailable(self):
        with pytest.raises(ValueError, match="class unavailable"):
            generate_indices(labels_pool(0, 50), SampleSpec(0.5, 10, seed=4))
        # a class with zero required count may be absent
        generate_indices(labels_pool(0, 50), SampleSpec(0.0, 10, seed=4))

    def test_deterministic(self):
        pool = labels_pool(40, 60)
        spec = SampleSpec(0.35, 20, seed=99)
        first = generate_indices(pool, spec)
        second = generate_indices(pool, spec)
        assert np.array_equal(first.indices, second.indices)

    def test_realized_prevalence_exact(self):
        rng = np.random.default_rng(5)
        pool = labels_pool(300, 500)
        for _ in range(50):
            pi = float(rng.random())
            q = int(rng.integers(1, 200))
            sample = generate_indices(pool, SampleSpec(pi, q, seed=int(rng.integers(2**32))))
            assert realized_prevalence(pool, sample) == round_half_up(pi * q) / q


class TestProtocolPlan:
    def test_default_grid(self):
        assert len(DEFAULT_PREVALENCE_GRID) == 21
        assert DEFAULT_PREVALENCE_GRID[0] == 0.0
        assert DEFAULT_PREVALENCE_GRID[-1] == 1.0
        # q=500 makes every grid point an exact integer count
        for pi in DEFAULT_PREVALENCE_GRID:
            assert abs(pi * 500 - round(pi * 500)) < 1e-9

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            ProtocolPlan(grid=(0.5, 0.5), samples_per_point=1, sample_size=10)
        with pytest.raises(ValueError):
            ProtocolPlan(grid=(0.2, 0.1), samples_per_point=1, sample_size=10)
        with pytest.raises(ValueError):
            ProtocolPlan(grid=(0.0, 1.5), samples_per_point=1, sample_size=10)


class TestProtocolSamples:
    def test_validation_plan_yields_210(self):
        pool = labels_pool(600, 600)
        plan = ProtocolPlan(samples_per_point=10, sample_size=500, master_seed=0)
        out = protocol_samples(pool, plan)
        assert sum(len(s) for _, s in out) == 210

    def test_test_plan_yields_2100(self):
        pool = labels_pool(600, 600)
        plan = ProtocolPlan(samples_per_point=100, sample_size=500, master_seed=0)
        out = protocol_samples(pool, plan)
        assert sum(len(s) for _, s in out) == 2100

    def test_tiny_plan_counts(self):
        pool = labels_pool(10, 10)
        plan = ProtocolPlan(grid=(0.5,), samples_per_point=1, sample_size=4, master_seed=1)
        out = protocol_samples(pool, plan)
        assert len(out) == 1
        prevalence, samples = out[0]
        assert prevalence == 0.5 and len(samples) == 1
        assert int(pool[samples[0].indices].sum()) == 2

    def test_determinism_and_order_independence(self):
        pool = labels_pool(50, 70)
        plan = ProtocolPlan(grid=(0.2, 0.8), samples_per_point=3, sample_size=10, master_seed=17)
        first = protocol_samples(pool, plan)
        second = protocol_samples(pool, plan)
        for (_, s1), (_, s2) in zip(first, second):
            for a, b in zip(s1, s2):
                assert np.array_equal(a.indices, b.indices)
        # a sample can be regenerated alone from its derived seed
        lone = generate_indices(pool, SampleSpec(0.8, 10, seed=derive_seed(17, 1, 2)))
        assert np.array_equal(lone.indices, first[1][1][2].indices)

    def test_every_sample_prevalence_exact(self):
        pool = labels_pool(300, 300)
        plan = ProtocolPlan(samples_per_point=2, sample_size=40, master_seed=5)
        for pi, samples in protocol_samples(pool, plan):
            for sample in samples:
                assert realized_prevalence(pool, sample) == round_half_up(pi * 40) / 40


class TestStratifiedSplit:
    def test_imbalanced_counts(self):
        pool = labels_pool(90, 10)
        train, holdout = stratified_split(pool, 0.6, seed=0)
        y_train, y_hold = pool[train.indices], pool[holdout.indices]
        assert int(y_train.sum()) == 54 and len(y_train) == 60
        assert int(y_hold.sum()) == 36 and len(y_hold) == 40

    def test_symmetric(self):
        pool = labels_pool(10, 10)
        train, holdout = stratified_split(pool, 0.5, seed=1)
        assert int(pool[train.indices].sum()) == 5
        assert int(pool[holdout.indices].sum()) == 5

    def test_tiny_rounding(self):
        pool = labels_pool(3, 1)
        train, holdout = stratified_split(pool, 0.6, seed=2)
        y_train, y_hold = pool[train.indices], pool[holdout.indices]
        assert int(y_train.sum()) == 2 and len(y_train) == 3  # 2 pos + 1 neg
        assert int(y_hold.sum()) == 1 and len(y_hold) == 1  # 1 pos + 0 neg

    def test_degenerate_class(self):
        with pytest.raises(ValueError, match="degenerate stratification"):
            stratified_split(labels_pool(5, 0), 0.6, seed=3)

    def test_disjoint_exhaustive_and_close_prevalence(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            n_pos = int(rng.integers(2, 200))
            n_neg = int(rng.integers(2, 200))
            pool = labels_pool(n_pos, n_neg)
            fraction = float(rng.uniform(0.2, 0.8))
            train, holdout = stratified_split(pool, fraction, seed=int(rng.integers(2**32)))
            merged = np.concatenate([train.indices, holdout.indices])
            assert len(np.unique(merged)) == len(pool)
            assert len(merged) == len(pool)
            pool_prev = n_pos / (n_pos + n_neg)
            for part in (train, holdout):
                part_prev = float(pool[part.indices].mean())
                assert abs(part_prev - pool_prev) <= 1.0 / len(part) + 1e-12
