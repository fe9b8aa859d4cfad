"""Tests for the split objective, pivot search and partitioning tree."""

import random
from collections import Counter, defaultdict
from fractions import Fraction

import pytest

from partisketch.error_handling import (
    ConfigurationError,
    DegenerateStatsError,
    NotSplittableError,
    PlanError,
)
from partisketch.partitioner import (
    LeafCriterion,
    PartitionConfig,
    PartitionPlan,
    PlanLeaf,
    Scenario,
    VertexEntry,
    best_pivot,
    build_partition_tree,
    build_plan,
    empirical_collision_rate,
    estimated_partition_mass,
    split_objective_data,
    split_objective_workload,
    verify_collision_bound,
)
from partisketch.stream import (
    DataSample,
    StreamElement,
    VertexStats,
    WorkloadWeights,
    compute_vertex_stats,
    make_edge_key,
)

FREQUENCIES = [5, 1, 9, 2, 7, 3, 8, 4]


def sample_of(vertex_specs: list[tuple[str, int, int]]) -> DataSample:
    """Sample where each ``(label, deg, freq)`` vertex has ``deg`` edges of frequency ``freq``."""
    elements = tuple(
        StreamElement(label.encode(), f'{label}-d{j}'.encode(), freq)
        for label, deg, freq in vertex_specs
        for j in range(deg)
    )
    return DataSample(elements, max(1, len(elements)))


@pytest.fixture
def eight_vertex_sample():
    """Eight vertices with varied degree and per-edge frequency."""
    return sample_of([(f'v{i}', 3 + i, FREQUENCIES[i]) for i in range(8)])


def config(total_width: int, min_width: int = 4, c: str = '0.2', f: str = '0.1', **kwargs) -> PartitionConfig:
    return PartitionConfig(
        total_width=total_width,
        depth=3,
        min_width=min_width,
        collision_constant=Fraction(c),
        outlier_fraction=Fraction(f),
        **kwargs,
    )


def brute_force_pivot(entries: list[VertexEntry], stats: VertexStats) -> int:
    """Score every pivot with the set-based objective; prefer balance, then the smaller pivot."""
    n = len(entries)
    labels = [entry.label for entry in entries]
    scored = [(split_objective_data(labels[:p], labels[p:], stats), abs(2 * p - n), p) for p in range(1, n)]
    return min(scored)[2]


def simulate_tree(entries, width, cfg, stats) -> list[tuple]:
    """Recursive rendition of the top-down halving procedure."""
    labels = tuple(entry.label for entry in entries)
    degree_sum = sum(entry.deg for entry in entries)
    if width < cfg.min_width:
        return [(labels, width, LeafCriterion.MIN_WIDTH)]
    if degree_sum <= cfg.collision_constant * width:
        return [(labels, degree_sum, LeafCriterion.COLLISION_BOUND)]
    if len(entries) < 2 or width < 2:
        return [(labels, width, LeafCriterion.UNSPLITTABLE)]
    p = brute_force_pivot(entries, stats)
    half = width // 2
    return simulate_tree(entries[:p], half, cfg, stats) + simulate_tree(entries[p:], width - half, cfg, stats)


def sorted_entries(stats: VertexStats) -> list[VertexEntry]:
    entries = [VertexEntry(v, stats.fv[v], stats.deg[v]) for v in stats.vertices]
    return sorted(entries, key=lambda e: (Fraction(e.fv, e.deg), e.label))


def edge_objective(elements: list[StreamElement], s1: list[bytes], s2: list[bytes]) -> Fraction:
    """Sum, over every distinct sampled edge, its side's mass over the edge's averaged frequency."""
    mass: Counter[bytes] = Counter()
    destinations: dict[bytes, set[bytes]] = defaultdict(set)
    for element in elements:
        mass[element.src] += element.freq
        destinations[element.src].add(element.dst)

    total = Fraction(0)
    for side in (s1, s2):
        side_mass = sum(mass[v] for v in side)
        for v in side:
            for _ in destinations[v]:
                total += side_mass / Fraction(mass[v], len(destinations[v]))
    return total


class TestPartitionConfig:
    """Test partition parameters."""

    def test_widths(self):
        """Test root and outlier widths split the budget."""
        cfg = config(100)
        assert cfg.root_width == 90
        assert cfg.outlier_base_width == 10

    def test_outlier_width_at_least_one(self):
        """Test a tiny budget still reserves an outlier column."""
        assert config(5, min_width=1).outlier_base_width == 1

    def test_float_fractions_are_decimal(self):
        """Test float parameters keep their decimal value."""
        cfg = PartitionConfig(100, 3, 4, 0.2, 0.1)
        assert cfg.collision_constant == Fraction(1, 5)
        assert cfg.outlier_fraction == Fraction(1, 10)

    @pytest.mark.parametrize(('c', 'f'), [('0', '0.1'), ('1', '0.1'), ('0.2', '0'), ('0.2', '1')])
    def test_fractions_in_open_interval(self, c, f):
        """Test C and the outlier fraction must lie in (0, 1)."""
        with pytest.raises(ConfigurationError):
            config(100, c=c, f=f)

    def test_min_width_above_budget(self):
        """Test w0 may not exceed the total width."""
        with pytest.raises(ConfigurationError):
            config(100, min_width=101)

    def test_from_byte_budget(self):
        """Test byte budgets convert to total width."""
        cfg = PartitionConfig.from_byte_budget(
            65536, 4, min_width=64, collision_constant=Fraction(1, 5), outlier_fraction=Fraction(1, 10)
        )
        assert cfg.total_width == 2048

    def test_dict_round_trip(self):
        """Test config survives its dict form."""
        cfg = config(100, scenario=Scenario.DATA_AND_WORKLOAD)
        assert PartitionConfig.from_dict(cfg.to_dict()) == cfg


class TestObjectives:
    """Test partition mass and split objectives."""

    def test_partition_mass(self):
        """Test F(S) sums frequencies."""
        assert estimated_partition_mass([VertexEntry(b'a', 5, 1), VertexEntry(b'b', 1, 1)]) == 6
        assert estimated_partition_mass([]) == 0
        assert estimated_partition_mass([VertexEntry(b'a', 7, 2)]) == 7

    def test_data_objective_split_apart(self):
        """Test two equal vertices split apart score 2."""
        stats = VertexStats({b'm1': 10, b'm2': 10}, {b'm1': 1, b'm2': 1})
        assert split_objective_data([b'm1'], [b'm2'], stats) == 2

    def test_data_objective_kept_together(self):
        """Test the same vertices on one side score 4."""
        stats = VertexStats({b'm1': 10, b'm2': 10}, {b'm1': 1, b'm2': 1})
        assert split_objective_data([b'm1', b'm2'], [], stats) == 4

    def test_data_objective_empty(self):
        """Test empty sides score zero."""
        assert split_objective_data([], [], VertexStats()) == 0

    def test_workload_objective(self):
        """Test weights 0.9 and 0.1 over equal vertices score 1."""
        stats = VertexStats({b'n1': 10, b'n2': 10}, {b'n1': 1, b'n2': 1})
        weights = WorkloadWeights({b'n1': Fraction(9, 10), b'n2': Fraction(1, 10)}, 10)
        assert split_objective_workload([b'n1'], [b'n2'], stats, weights) == 1

    def test_workload_reduces_to_data(self, eight_vertex_sample):
        """Test weights equal to degrees reproduce the data objective."""
        stats = compute_vertex_stats(eight_vertex_sample)
        weights = WorkloadWeights({v: Fraction(d) for v, d in stats.deg.items()}, 1)
        left, right = stats.vertices[:3], stats.vertices[3:]
        assert split_objective_workload(left, right, stats, weights) == split_objective_data(left, right, stats)

    def test_missing_stats(self):
        """Test unknown vertices are degenerate."""
        with pytest.raises(DegenerateStatsError):
            split_objective_data([b'x'], [], VertexStats())

    def test_missing_weight(self):
        """Test workload objective needs a weight for every vertex."""
        stats = VertexStats({b'a': 1}, {b'a': 1})
        with pytest.raises(ConfigurationError):
            split_objective_workload([b'a'], [], stats, WorkloadWeights({}, 1))


class TestBestPivot:
    """Test the pivot search."""

    def test_two_identical_vertices(self):
        """Test the only pivot is chosen with E'=2."""
        entries = [VertexEntry(b'a', 10, 1), VertexEntry(b'b', 10, 1)]
        assert best_pivot(entries) == (1, Fraction(2))

    def test_separates_slow_from_fast(self):
        """Test a slow and a fast vertex are split apart."""
        entries = [VertexEntry(b'slow', 1, 1), VertexEntry(b'fast', 100, 1)]
        p, value = best_pivot(entries)
        assert p == 1
        assert value == 2

    def test_matches_exhaustive_search(self):
        """Test random 4-vertex instances against scoring every pivot."""
        rng = random.Random(17)
        for _ in range(200):
            fv = {f'u{i}'.encode(): rng.randint(1, 30) for i in range(4)}
            deg = {v: rng.randint(1, min(5, f)) for v, f in fv.items()}
            stats = VertexStats(fv, deg)
            entries = sorted_entries(stats)
            p, value = best_pivot(entries)
            labels = [entry.label for entry in entries]

            assert p == brute_force_pivot(entries, stats)
            assert value == split_objective_data(labels[:p], labels[p:], stats)

    def test_equal_vertices_split_in_half(self):
        """Test identical vertices split down the middle."""
        entries = [VertexEntry(f'x{i}'.encode(), 4, 1) for i in range(4)]
        p, _ = best_pivot(entries)
        assert p == 2

    def test_workload_pivot(self):
        """Test the workload objective drives the pivot when weights are set."""
        entries = [
            VertexEntry(b'n1', 10, 1, Fraction(9, 10)),
            VertexEntry(b'n2', 10, 1, Fraction(1, 10)),
        ]
        assert best_pivot(entries, Scenario.DATA_AND_WORKLOAD) == (1, Fraction(1))

    def test_workload_without_weight(self):
        """Test workload pivots need weights."""
        with pytest.raises(ConfigurationError):
            best_pivot([VertexEntry(b'a', 1, 1), VertexEntry(b'b', 1, 1)], Scenario.DATA_AND_WORKLOAD)

    def test_needs_two_vertices(self):
        """Test a single vertex cannot be split."""
        with pytest.raises(NotSplittableError):
            best_pivot([VertexEntry(b'a', 1, 1)])

    def test_zero_mass_is_degenerate(self):
        """Test fv=0 vertices are rejected."""
        with pytest.raises(DegenerateStatsError):
            best_pivot([VertexEntry(b'a', 0, 1), VertexEntry(b'b', 1, 1)])


class TestBuildPlan:
    """Test partitioning tree construction."""

    def test_root_within_collision_bound(self):
        """Test a sparse sample becomes one shrunk leaf and the rest goes to the outlier."""
        sample = sample_of([('a', 1, 3), ('b', 2, 1)])
        plan = build_plan(sample, config(100))

        assert len(plan.leaves) == 1
        leaf = plan.leaves[0]
        assert leaf.criterion is LeafCriterion.COLLISION_BOUND
        assert leaf.width == 3
        assert leaf.creation_width == 90
        assert plan.outlier_width == 10 + 87
        assert plan.freed_width == 87
        assert plan.allocated_width == 100

    def test_children_below_min_width(self):
        """Test both children become min-width leaves when w0 exceeds half the root."""
        sample = sample_of([('a', 10, 1), ('b', 10, 5)])
        plan = build_plan(sample, config(100, min_width=60))

        assert [leaf.criterion for leaf in plan.leaves] == [LeafCriterion.MIN_WIDTH] * 2
        assert [leaf.width for leaf in plan.leaves] == [45, 45]
        assert plan.outlier_width == 10

    def test_matches_recursive_simulation(self, eight_vertex_sample):
        """Test the breadth-first build agrees with a recursive simulation."""
        cfg = config(200)
        stats = compute_vertex_stats(eight_vertex_sample)
        plan = build_plan(eight_vertex_sample, cfg)

        expected = simulate_tree(sorted_entries(stats), cfg.root_width, cfg, stats)
        actual = [(leaf.vertices, leaf.width, leaf.criterion) for leaf in plan.leaves]
        assert len(plan.leaves) > 1
        assert sorted(actual) == sorted(expected)

    def test_leaf_ids_and_routing(self, eight_vertex_sample):
        """Test ids are dense and every sampled vertex routes to one leaf."""
        plan = build_plan(eight_vertex_sample, config(200))

        assert [leaf.leaf_id for leaf in plan.leaves] == list(range(len(plan.leaves)))
        assert set(plan.routing) == eight_vertex_sample.source_vertices
        for leaf in plan.leaves:
            assert all(plan.routing[v] == leaf.leaf_id for v in leaf.vertices)

    def test_width_accounting(self, eight_vertex_sample):
        """Test leaves and outlier together use root plus base outlier width."""
        cfg = config(200)
        plan = build_plan(eight_vertex_sample, cfg)

        assert plan.leaf_width_sum + plan.outlier_width == cfg.root_width + cfg.outlier_base_width
        assert plan.allocated_width <= cfg.total_width

    def test_deterministic(self, eight_vertex_sample):
        """Test repeated builds give equal plans."""
        assert build_plan(eight_vertex_sample, config(200)) == build_plan(eight_vertex_sample, config(200))

    def test_tree_records_pivots(self, eight_vertex_sample):
        """Test internal nodes carry their pivot and objective."""
        root = build_partition_tree(eight_vertex_sample, config(200))
        assert root.pivot is not None
        assert root.objective is not None
        assert sum(len(leaf.vertices) for leaf in root.leaves()) == 8

    def test_workload_with_degree_weights_matches_data(self, eight_vertex_sample):
        """Test degree-equal weights give the data-only leaf sets."""
        stats = compute_vertex_stats(eight_vertex_sample)
        weights = WorkloadWeights({v: Fraction(d) for v, d in stats.deg.items()}, 1)

        data_plan = build_plan(eight_vertex_sample, config(200))
        workload_plan = build_plan(
            eight_vertex_sample, config(200, scenario=Scenario.DATA_AND_WORKLOAD), weights
        )
        assert [leaf.vertices for leaf in workload_plan.leaves] == [leaf.vertices for leaf in data_plan.leaves]

    def test_weights_require_workload_scenario(self, eight_vertex_sample):
        """Test weights and scenario must agree."""
        with pytest.raises(ConfigurationError):
            build_plan(eight_vertex_sample, config(200), WorkloadWeights({}, 1))
        with pytest.raises(ConfigurationError):
            build_plan(eight_vertex_sample, config(200, scenario=Scenario.DATA_AND_WORKLOAD))

    def test_empty_sample(self):
        """Test an empty sample yields an outlier-only plan."""
        plan = build_plan(DataSample((), 1), config(100))

        assert plan.leaves == ()
        assert plan.outlier_width == 100
        assert plan.routing == {}

    def test_single_vertex_unsplittable(self):
        """Test a dense lone vertex cannot split."""
        plan = build_plan(sample_of([('a', 40, 1)]), config(100))
        assert [leaf.criterion for leaf in plan.leaves] == [LeafCriterion.UNSPLITTABLE]
        assert plan.leaves[0].width == 90


class TestPartitionPlan:
    """Test plan validation."""

    def test_duplicate_vertex(self):
        """Test a vertex may route to only one leaf."""
        leaves = (
            PlanLeaf(0, 4, (b'a',), 4, 1, LeafCriterion.MIN_WIDTH),
            PlanLeaf(1, 4, (b'a',), 4, 1, LeafCriterion.MIN_WIDTH),
        )
        with pytest.raises(PlanError):
            PartitionPlan(leaves, 2, 1, 10)

    def test_over_budget(self):
        """Test leaves plus outlier must fit the total width."""
        leaves = (PlanLeaf(0, 8, (b'a',), 8, 1, LeafCriterion.MIN_WIDTH),)
        with pytest.raises(PlanError):
            PartitionPlan(leaves, 3, 1, 10)

    def test_zero_width_leaf(self):
        """Test leaves need a column."""
        with pytest.raises(PlanError):
            PlanLeaf(0, 0, (b'a',), 4, 1, LeafCriterion.MIN_WIDTH)

    def test_leaf_lookup(self):
        """Test leaves are found by id."""
        leaf = PlanLeaf(7, 4, (b'a',), 4, 1, LeafCriterion.MIN_WIDTH)
        plan = PartitionPlan((leaf,), 2, 1, 10)
        assert plan.leaf(7) is leaf
        with pytest.raises(PlanError):
            plan.leaf(3)


class TestCollisionBound:
    """Test collision-bound verification."""

    def test_bound_arithmetic(self):
        """Test 10 edges created at width 100 with C=0.2 pass with bound 0.1."""
        leaf = PlanLeaf(0, 10, (b'a',), 100, 10, LeafCriterion.COLLISION_BOUND)
        plan = PartitionPlan((leaf,), 90, 1, 100)
        stats = VertexStats({b'a': 20}, {b'a': 10})

        (report,) = verify_collision_bound(plan, stats, Fraction(1, 5))
        assert report.bound == Fraction(1, 10)
        assert report.passed

    def test_width_reset_load_factor(self):
        """Test a reset leaf reports load factor 1."""
        leaf = PlanLeaf(0, 10, (b'a',), 100, 10, LeafCriterion.COLLISION_BOUND)
        plan = PartitionPlan((leaf,), 90, 1, 100)

        (report,) = verify_collision_bound(plan, None, 0.2)
        assert report.load_factor == 1
        assert report.width_reset

    def test_only_collision_leaves(self):
        """Test other leaf kinds are not reported."""
        leaf = PlanLeaf(0, 10, (b'a',), 10, 50, LeafCriterion.MIN_WIDTH)
        assert verify_collision_bound(PartitionPlan((leaf,), 5, 1, 100), None, 0.2) == []

    def test_built_plans_pass(self, eight_vertex_sample):
        """Test every collision-bound leaf of a built plan satisfies its bound."""
        stats = compute_vertex_stats(eight_vertex_sample)
        plan = build_plan(eight_vertex_sample, config(200))
        assert all(report.passed for report in verify_collision_bound(plan, stats, Fraction(1, 5)))

    def test_empirical_rate_within_bound(self):
        """Test hashing a leaf's edges collides no more than the bound allows."""
        keys = [make_edge_key(f'v{i % 4}'.encode(), f'd{i}'.encode()) for i in range(20)]
        bound = len(keys) / 200
        assert empirical_collision_rate(keys, 200, trials=1000, seed=3) <= bound + 0.02

    def test_empirical_rate_single_key(self):
        """Test one key never collides."""
        assert empirical_collision_rate([b'a\x1fb'], 10, trials=5, seed=0) == 0.0


def random_sample(rng: random.Random) -> DataSample:
    vertex_count = rng.randint(1, 10)
    return sample_of([(f'r{i}', rng.randint(1, 8), rng.randint(1, 20)) for i in range(vertex_count)])


class TestRandomizedAgreement:
    """Randomized agreement with exhaustive and recursive references."""

    def test_pivot_matches_enumeration(self):
        """Test both objectives reach the enumerated minimum on random instances."""
        rng = random.Random(31)
        for _ in range(500):
            n = rng.randint(2, 12)
            fv = {f'u{i}'.encode(): rng.randint(1, 50) for i in range(n)}
            deg = {v: rng.randint(1, 6) for v in fv}
            stats = VertexStats(fv, deg)
            raw = {v: rng.randint(1, 9) for v in fv}
            weights = WorkloadWeights({v: Fraction(c, sum(raw.values())) for v, c in raw.items()}, sum(raw.values()))

            data_entries = sorted_entries(stats)
            labels = [entry.label for entry in data_entries]
            enumerated = min(split_objective_data(labels[:p], labels[p:], stats) for p in range(1, n))
            assert best_pivot(data_entries)[1] == enumerated

            workload_entries = sorted(
                (entry._replace(weight=weights.weight(entry.label)) for entry in data_entries),
                key=lambda e: (e.fv / e.weight, e.label),
            )
            labels = [entry.label for entry in workload_entries]
            enumerated = min(split_objective_workload(labels[:p], labels[p:], stats, weights) for p in range(1, n))
            assert best_pivot(workload_entries, Scenario.DATA_AND_WORKLOAD)[1] == enumerated

    def test_plans_match_simulation(self):
        """Test random samples build the same leaves as the recursive simulation."""
        rng = random.Random(47)
        for _ in range(100):
            sample = random_sample(rng)
            total_width = rng.randint(20, 300)
            cfg = config(total_width, min_width=rng.randint(2, 16))
            stats = compute_vertex_stats(sample)
            plan = build_plan(sample, cfg)

            expected = simulate_tree(sorted_entries(stats), cfg.root_width, cfg, stats)
            actual = [(leaf.vertices, leaf.width, leaf.criterion) for leaf in plan.leaves]
            assert sorted(actual) == sorted(expected)

    def test_collision_rate_of_bound_leaves(self):
        """Test hashed collision rate at creation width stays within C + 0.02."""
        rng = random.Random(59)
        checked = 0
        for trial in range(100):
            sample = random_sample(rng)
            plan = build_plan(sample, config(rng.randint(20, 300), min_width=rng.randint(2, 16)))
            for leaf in plan.leaves:
                if leaf.criterion is not LeafCriterion.COLLISION_BOUND:
                    continue
                members = set(leaf.vertices)
                keys = [make_edge_key(e.src, e.dst) for e in sample if e.src in members]
                rate = empirical_collision_rate(keys, leaf.creation_width, trials=200, seed=trial)
                assert rate <= 0.2 + 0.02
                checked += 1
        assert checked > 0

    def test_objective_matches_edge_sum(self):
        """Test the vertex-level data objective equals the per-edge sum on random splits."""
        rng = random.Random(71)
        for _ in range(200):
            elements = [
                StreamElement(f'p{rng.randrange(8)}'.encode(), f'q{rng.randrange(6)}'.encode(), rng.randint(1, 9))
                for _ in range(rng.randint(1, 60))
            ]
            stats = compute_vertex_stats(elements)
            vertices = list(stats.vertices)
            rng.shuffle(vertices)
            cut = rng.randint(0, len(vertices))
            s1, s2 = vertices[:cut], vertices[cut:]

            assert split_objective_data(s1, s2, stats) == edge_objective(elements, s1, s2)
