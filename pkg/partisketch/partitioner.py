"""Partitioning tree over sampled source vertices.

Vertices are sorted once by their average per-edge frequency ``fv / deg`` (or by
``fv / w`` when a query workload is known) and the width budget is halved
recursively, each split placed at the pivot that minimizes the objective

    E' = F(S1) * sum_{m in S1} t(m) + F(S2) * sum_{m in S2} t(m)

with ``t(m) = deg(m)**2 / fv(m)`` for data samples and ``t(m) = w(m) * deg(m) / fv(m)``
with a workload. A node stops splitting when its width drops below ``w0`` or
when its distinct-edge count ``sum deg`` is at most ``C * width``; the latter
shrinks the node's width to ``sum deg`` and hands the freed columns to the
outlier sketch.

All objective values are exact rationals.
"""

import logging
import math
from collections import Counter, deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from fractions import Fraction
from itertools import accumulate
from typing import Any, NamedTuple

from partisketch.countmin import CountMinSketch, SketchDims
from partisketch.error_handling import (
    ConfigurationError,
    DegenerateStatsError,
    NotSplittableError,
    PlanError,
    handle_data_processing_errors,
    validate_positive,
)
from partisketch.seeds import derive_seed
from partisketch.stream import (
    DataSample,
    VertexLabel,
    VertexStats,
    WorkloadWeights,
    compute_vertex_stats,
    label_text,
)

logger = logging.getLogger(__name__)


class Scenario(StrEnum):
    DATA_ONLY = 'data'
    DATA_AND_WORKLOAD = 'workload'


class LeafCriterion(StrEnum):
    MIN_WIDTH = 'min_width'
    COLLISION_BOUND = 'collision_bound'
    UNSPLITTABLE = 'unsplittable'


def _as_fraction(value: Fraction | float | int | str) -> Fraction:
    # str() keeps 0.1 as 1/10 instead of its binary expansion
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class PartitionConfig:
    """Parameters of one partitioning run."""

    total_width: int
    depth: int
    min_width: int
    collision_constant: Fraction
    outlier_fraction: Fraction
    scenario: Scenario = Scenario.DATA_ONLY

    def __post_init__(self):
        validate_positive(self.total_width, 'total_width')
        validate_positive(self.depth, 'depth')
        validate_positive(self.min_width, 'min_width')
        object.__setattr__(self, 'collision_constant', _as_fraction(self.collision_constant))
        object.__setattr__(self, 'outlier_fraction', _as_fraction(self.outlier_fraction))
        object.__setattr__(self, 'scenario', Scenario(self.scenario))
        for name in ('collision_constant', 'outlier_fraction'):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ConfigurationError(
                    f'{name} must lie strictly between 0 and 1, got {value}',
                    config_key=name,
                    expected_type='(0, 1)',
                    actual_value=str(value),
                )
        if self.min_width > self.total_width:
            raise ConfigurationError(
                f'min_width {self.min_width} exceeds total_width {self.total_width}',
                config_key='min_width',
                actual_value=self.min_width,
            )

    @classmethod
    def from_byte_budget(cls, budget_bytes: int, depth: int, **kwargs: Any) -> 'PartitionConfig':
        """Config whose total width is what ``budget_bytes`` buys at ``depth``."""
        dims = SketchDims.from_byte_budget(budget_bytes, depth)
        return cls(total_width=dims.width, depth=depth, **kwargs)

    @property
    def root_width(self) -> int:
        return math.floor(self.total_width * (1 - self.outlier_fraction))

    @property
    def outlier_base_width(self) -> int:
        return max(1, math.floor(self.total_width * self.outlier_fraction))

    def to_dict(self) -> dict[str, Any]:
        return {
            'total_width': self.total_width,
            'depth': self.depth,
            'min_width': self.min_width,
            'collision_constant': str(self.collision_constant),
            'outlier_fraction': str(self.outlier_fraction),
            'scenario': self.scenario.value,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'PartitionConfig':
        return cls(
            total_width=data['total_width'],
            depth=data['depth'],
            min_width=data['min_width'],
            collision_constant=Fraction(data['collision_constant']),
            outlier_fraction=Fraction(data['outlier_fraction']),
            scenario=Scenario(data['scenario']),
        )


class VertexEntry(NamedTuple):
    label: VertexLabel
    fv: int
    deg: int
    weight: Fraction | None = None


@dataclass
class PartitionNode:
    """A node of the partitioning tree; leaves become physical sketches."""

    width: int
    vertices: tuple[VertexEntry, ...]
    creation_width: int = 0
    children: tuple['PartitionNode', ...] = ()
    pivot: int | None = None
    objective: Fraction | None = None
    criterion: LeafCriterion | None = None
    leaf_id: int | None = None

    def __post_init__(self):
        if not self.creation_width:
            self.creation_width = self.width

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def degree_sum(self) -> int:
        return sum(entry.deg for entry in self.vertices)

    def leaves(self) -> list['PartitionNode']:
        if self.is_leaf:
            return [self]
        return [leaf for child in self.children for leaf in child.leaves()]


@dataclass(frozen=True)
class PlanLeaf:
    """One physical sketch of a plan and the vertices routed to it."""

    leaf_id: int
    width: int
    vertices: tuple[VertexLabel, ...]
    creation_width: int
    degree_sum: int
    criterion: LeafCriterion

    def __post_init__(self):
        if self.width < 1:
            raise PlanError(f'Leaf {self.leaf_id} has width {self.width}', context={'leaf_id': self.leaf_id})


@dataclass(frozen=True)
class PartitionPlan:
    """Leaf sketch dimensions, the vertex routing table and the outlier width."""

    leaves: tuple[PlanLeaf, ...]
    outlier_width: int
    depth: int
    total_width: int
    config: PartitionConfig | None = None
    routing: dict[VertexLabel, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.outlier_width < 1:
            raise PlanError(f'Outlier width must be >= 1, got {self.outlier_width}')
        if self.depth < 1:
            raise PlanError(f'Plan depth must be >= 1, got {self.depth}')

        routing: dict[VertexLabel, int] = {}
        for leaf in self.leaves:
            for vertex in leaf.vertices:
                if vertex in routing:
                    raise PlanError(
                        f'Vertex {label_text(vertex)} is routed to leaves {routing[vertex]} and {leaf.leaf_id}',
                        context={'vertex': label_text(vertex)},
                    )
                routing[vertex] = leaf.leaf_id
        if len({leaf.leaf_id for leaf in self.leaves}) != len(self.leaves):
            raise PlanError('Plan has duplicate leaf ids')
        if self.allocated_width > self.total_width:
            raise PlanError(
                f'Plan allocates {self.allocated_width} columns but the budget is {self.total_width}',
                context={'allocated_width': self.allocated_width, 'total_width': self.total_width},
            )
        object.__setattr__(self, 'routing', routing)

    @property
    def leaf_width_sum(self) -> int:
        return sum(leaf.width for leaf in self.leaves)

    @property
    def allocated_width(self) -> int:
        return self.leaf_width_sum + self.outlier_width

    @property
    def freed_width(self) -> int:
        return sum(leaf.creation_width - leaf.width for leaf in self.leaves)

    def leaf(self, leaf_id: int) -> PlanLeaf:
        for leaf in self.leaves:
            if leaf.leaf_id == leaf_id:
                return leaf
        raise PlanError(f'No leaf with id {leaf_id}')


def estimated_partition_mass(vertices: Iterable[VertexEntry]) -> Fraction:
    """Total sampled frequency ``F(S)`` of a vertex set."""
    return Fraction(sum(entry.fv for entry in vertices))


def _stats_entry(vertex: VertexLabel, stats: VertexStats) -> VertexEntry:
    if vertex not in stats:
        raise DegenerateStatsError(
            f'No statistics for vertex {label_text(vertex)}', data_type='VertexStats'
        )
    fv = stats.fv[vertex]
    deg = stats.deg[vertex]
    if fv <= 0 or deg < 1:
        raise DegenerateStatsError(
            f'Vertex {label_text(vertex)} has fv={fv}, deg={deg}; both must be positive',
            data_type='VertexStats',
            context={'fv': fv, 'deg': deg},
        )
    return VertexEntry(vertex, fv, deg)


def _side_objective(entries: Sequence[VertexEntry], term) -> Fraction:
    if not entries:
        return Fraction(0)
    return estimated_partition_mass(entries) * sum((term(entry) for entry in entries), Fraction(0))


def _data_term(entry: VertexEntry) -> Fraction:
    return Fraction(entry.deg * entry.deg, entry.fv)


def _workload_term(entry: VertexEntry) -> Fraction:
    return entry.weight * entry.deg / entry.fv


def split_objective_data(
    s1: Iterable[VertexLabel], s2: Iterable[VertexLabel], stats: VertexStats
) -> Fraction:
    """Data-sample objective of splitting into ``s1`` and ``s2``.

    Examples:
        Two vertices with ``fv=10, deg=1`` split apart give 2; kept together, 4.
    """
    left = [_stats_entry(vertex, stats) for vertex in s1]
    right = [_stats_entry(vertex, stats) for vertex in s2]
    return _side_objective(left, _data_term) + _side_objective(right, _data_term)


def _weighted_entry(vertex: VertexLabel, stats: VertexStats, weights: WorkloadWeights) -> VertexEntry:
    entry = _stats_entry(vertex, stats)
    if vertex not in weights:
        raise ConfigurationError(
            f'No workload weight for vertex {label_text(vertex)}; smoothing must cover every sampled vertex',
            config_key='weights',
            actual_value=label_text(vertex),
        )
    return entry._replace(weight=weights.weight(vertex))


def split_objective_workload(
    s1: Iterable[VertexLabel],
    s2: Iterable[VertexLabel],
    stats: VertexStats,
    weights: WorkloadWeights,
) -> Fraction:
    """Workload-aware objective of splitting into ``s1`` and ``s2``."""
    left = [_weighted_entry(vertex, stats, weights) for vertex in s1]
    right = [_weighted_entry(vertex, stats, weights) for vertex in s2]
    return _side_objective(left, _workload_term) + _side_objective(right, _workload_term)


def _terms(entries: Sequence[VertexEntry], scenario: Scenario) -> list[Fraction]:
    if scenario is Scenario.DATA_ONLY:
        return [_data_term(entry) for entry in entries]
    missing = [entry.label for entry in entries if entry.weight is None]
    if missing:
        raise ConfigurationError(
            f'{len(missing)} vertices carry no workload weight',
            config_key='weights',
            actual_value=label_text(missing[0]),
        )
    return [_workload_term(entry) for entry in entries]


def best_pivot(ordered: Sequence[VertexEntry], scenario: Scenario = Scenario.DATA_ONLY) -> tuple[int, Fraction]:
    """Split position minimizing the objective over an already sorted vertex list.

    Every position ``1 <= p < len(ordered)`` is scored in one pass: the terms are
    scaled to integers over their common denominator and the per-side sums come
    from prefix sums. Ties go to the most balanced split, then to the smaller ``p``.

    Args:
        ordered: Vertices sorted by the scenario's key
        scenario: Which objective to minimize

    Returns:
        ``(p, E')`` where the left side is ``ordered[:p]``

    Raises:
        NotSplittableError: If fewer than two vertices are given
    """
    n = len(ordered)
    if n < 2:
        raise NotSplittableError(
            f'Need at least 2 vertices to split, got {n}', data_type='VertexEntry', processing_stage='best_pivot'
        )
    for entry in ordered:
        if entry.fv <= 0 or entry.deg < 1:
            raise DegenerateStatsError(
                f'Vertex {label_text(entry.label)} has fv={entry.fv}, deg={entry.deg}',
                data_type='VertexEntry',
                processing_stage='best_pivot',
            )

    terms = _terms(ordered, scenario)
    common = math.lcm(*(term.denominator for term in terms))
    scaled = [term.numerator * (common // term.denominator) for term in terms]
    mass_prefix = list(accumulate((entry.fv for entry in ordered), initial=0))
    term_prefix = list(accumulate(scaled, initial=0))
    mass_total = mass_prefix[-1]
    term_total = term_prefix[-1]

    best_p = 0
    best_value = 0
    for p in range(1, n):
        left_mass = mass_prefix[p]
        left_terms = term_prefix[p]
        value = left_mass * left_terms + (mass_total - left_mass) * (term_total - left_terms)
        if (
            best_p == 0
            or value < best_value
            or (value == best_value and abs(2 * p - n) < abs(2 * best_p - n))
        ):
            best_p, best_value = p, value
    return best_p, Fraction(best_value, common)


def _sort_key(scenario: Scenario):
    if scenario is Scenario.DATA_ONLY:
        return lambda entry: (Fraction(entry.fv, entry.deg), entry.label)
    return lambda entry: (entry.fv / entry.weight, entry.label)


def _vertex_entries(
    stats: VertexStats, scenario: Scenario, weights: WorkloadWeights | None
) -> list[VertexEntry]:
    entries = []
    for vertex in stats.vertices:
        if scenario is Scenario.DATA_ONLY:
            entries.append(_stats_entry(vertex, stats))
        else:
            entries.append(_weighted_entry(vertex, stats, weights))
    return sorted(entries, key=_sort_key(scenario))


@handle_data_processing_errors
def build_partition_tree(
    sample: DataSample | Iterable, config: PartitionConfig, weights: WorkloadWeights | None = None
) -> PartitionNode | None:
    """Grow the partitioning tree breadth-first.

    Every node, the root included, is checked in this order: a width below
    ``min_width`` makes a leaf; a distinct-edge count within ``C * width`` makes
    a leaf whose width shrinks to that count; a node of one vertex or one column
    cannot split; anything else splits at the best pivot into
    ``floor(width / 2)`` and ``width - floor(width / 2)`` columns.

    Returns:
        The root node, or None for an empty sample
    """
    if (weights is not None) != (config.scenario is Scenario.DATA_AND_WORKLOAD):
        raise ConfigurationError(
            f'Workload weights must be given exactly when the scenario is {Scenario.DATA_AND_WORKLOAD.value!r}',
            config_key='scenario',
            actual_value=config.scenario.value,
        )
    stats = compute_vertex_stats(sample)
    if not len(stats):
        return None
    if config.root_width < 1:
        raise ConfigurationError(
            f'total_width {config.total_width} leaves no columns for the partitioned sketches',
            config_key='total_width',
            actual_value=config.total_width,
        )

    root = PartitionNode(config.root_width, tuple(_vertex_entries(stats, config.scenario, weights)))
    queue = deque([root])
    next_leaf_id = 0
    while queue:
        node = queue.popleft()
        degree_sum = node.degree_sum
        if node.width < config.min_width:
            node.criterion = LeafCriterion.MIN_WIDTH
        elif degree_sum <= config.collision_constant * node.width:
            node.criterion = LeafCriterion.COLLISION_BOUND
            node.width = degree_sum
        elif len(node.vertices) < 2 or node.width < 2:
            node.criterion = LeafCriterion.UNSPLITTABLE
        else:
            pivot, objective = best_pivot(node.vertices, config.scenario)
            left_width = node.width // 2
            node.pivot = pivot
            node.objective = objective
            node.children = (
                PartitionNode(left_width, node.vertices[:pivot]),
                PartitionNode(node.width - left_width, node.vertices[pivot:]),
            )
            queue.extend(node.children)
            logger.debug(
                f'Split {len(node.vertices)} vertices of width {node.width} at pivot {pivot} (E\'={float(objective):.6g})'
            )
            continue

        node.leaf_id = next_leaf_id
        next_leaf_id += 1
        logger.debug(
            f'Leaf {node.leaf_id}: {len(node.vertices)} vertices, width {node.width}, {node.criterion.value}'
        )
    return root


def build_plan(
    sample: DataSample | Iterable, config: PartitionConfig, weights: WorkloadWeights | None = None
) -> PartitionPlan:
    """Partition the width budget over the sample's source vertices.

    The outlier sketch gets ``max(1, floor(W * outlier_fraction))`` columns plus
    every column freed by collision-bound width resets. An empty sample yields a
    plan whose outlier sketch owns the whole budget.
    """
    root = build_partition_tree(sample, config, weights)
    if root is None:
        logger.warning('Empty sample: every edge will be routed to the outlier sketch')
        return PartitionPlan((), config.total_width, config.depth, config.total_width, config)

    leaves = tuple(
        PlanLeaf(
            leaf_id=node.leaf_id,
            width=node.width,
            vertices=tuple(entry.label for entry in node.vertices),
            creation_width=node.creation_width,
            degree_sum=node.degree_sum,
            criterion=node.criterion,
        )
        for node in sorted(root.leaves(), key=lambda node: node.leaf_id)
    )
    freed = sum(leaf.creation_width - leaf.width for leaf in leaves)
    plan = PartitionPlan(leaves, config.outlier_base_width + freed, config.depth, config.total_width, config)
    logger.info(
        f'Plan: {len(leaves)} leaves over {len(plan.routing)} vertices, '
        f'leaf width {plan.leaf_width_sum}, outlier width {plan.outlier_width} ({freed} freed)'
    )
    return plan


@dataclass(frozen=True)
class CollisionBoundReport:
    """Collision-bound check for one collision-bound leaf."""

    leaf_id: int
    degree_sum: int
    creation_width: int
    width: int
    bound: Fraction
    load_factor: Fraction
    passed: bool
    width_reset: bool


def verify_collision_bound(
    plan: PartitionPlan, stats: VertexStats | None, collision_constant: Fraction | float
) -> list[CollisionBoundReport]:
    """Check ``sum deg <= C * width`` at creation for every collision-bound leaf.

    ``bound`` is the per-cell collision probability bound at creation width;
    ``load_factor`` is the same ratio at the final width, 1 after a reset.
    Without ``stats`` the degree sums recorded in the plan are used.
    """
    c = _as_fraction(collision_constant)
    reports = []
    for leaf in plan.leaves:
        if leaf.criterion is not LeafCriterion.COLLISION_BOUND:
            continue
        if stats is None:
            degree_sum = leaf.degree_sum
        else:
            degree_sum = sum(stats.deg.get(vertex, 0) for vertex in leaf.vertices)
        bound = Fraction(degree_sum, leaf.creation_width)
        report = CollisionBoundReport(
            leaf_id=leaf.leaf_id,
            degree_sum=degree_sum,
            creation_width=leaf.creation_width,
            width=leaf.width,
            bound=bound,
            load_factor=Fraction(degree_sum, leaf.width),
            passed=bound <= c,
            width_reset=leaf.width != leaf.creation_width,
        )
        if not report.passed:
            logger.warning(f'Leaf {leaf.leaf_id} violates the collision bound: {bound} > {c}')
        reports.append(report)
    return reports


def empirical_collision_rate(keys: Sequence[bytes], width: int, trials: int, seed: int) -> float:
    """Monte Carlo fraction of keys sharing their cell with another key.

    Each trial draws a fresh single-row hash of the given width.
    """
    validate_positive(trials, 'trials')
    distinct = list(dict.fromkeys(keys))
    if len(distinct) < 2:
        return 0.0
    colliding = 0
    for trial in range(trials):
        row = CountMinSketch.with_dims(width, 1, derive_seed(seed, f'collision-{trial}'))
        cells = [row.row_indices(key)[0] for key in distinct]
        occupancy = Counter(cells)
        colliding += sum(1 for cell in cells if occupancy[cell] > 1)
    return colliding / (trials * len(distinct))
