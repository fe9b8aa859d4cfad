"""Sketch engines answering edge and aggregate subgraph queries.

``PartitionedSketchEngine`` materializes a partition plan: one CountMin sketch
per leaf plus an outlier sketch for source vertices the plan never saw.
``GlobalSketchEngine`` is the single-sketch baseline of the same byte budget.
Both ingest until ``freeze()`` and answer queries afterwards.
"""

import logging
import math
from abc import ABC, abstractmethod
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from enum import StrEnum
from fractions import Fraction

from partisketch.countmin import CountMinSketch, SketchDims
from partisketch.error_handling import EngineStateError, MalformedQueryError, PlanError
from partisketch.partitioner import PartitionPlan
from partisketch.seeds import derive_seed
from partisketch.stream import Edge, StreamElement, VertexLabel, make_edge_key

logger = logging.getLogger(__name__)

OUTLIER = 'outlier'
GLOBAL = 'global'


class Aggregate(StrEnum):
    SUM = 'sum'
    MIN = 'min'
    AVERAGE = 'average'

    def apply(self, values: Sequence[int]) -> int | Fraction:
        if not values:
            raise MalformedQueryError(f'{self.value} over no values', data_type='Aggregate')
        if self is Aggregate.SUM:
            return sum(values)
        if self is Aggregate.MIN:
            return min(values)
        return Fraction(sum(values), len(values))


@dataclass(frozen=True)
class SubgraphQuery:
    """An aggregate over the frequencies of a bag of edges."""

    edges: tuple[Edge, ...]
    aggregate: Aggregate = Aggregate.SUM

    def __post_init__(self):
        object.__setattr__(self, 'edges', tuple((bytes(src), bytes(dst)) for src, dst in self.edges))
        object.__setattr__(self, 'aggregate', Aggregate(self.aggregate))
        if not self.edges:
            raise MalformedQueryError('Subgraph query has no edges', data_type='SubgraphQuery')


@dataclass(frozen=True)
class QueryConfidence:
    """Which sketch answers a source vertex and how tight its answer is."""

    sketch: str
    width: int
    depth: int
    mass: int
    error_bound: float
    probability: float


def leaf_name(leaf_id: int) -> str:
    return f'leaf-{leaf_id}'


class SketchEngine(ABC):
    """Shared ingest/query surface; subclasses choose the sketch for a source vertex."""

    def __init__(self):
        self._frozen = False

    @abstractmethod
    def _sketch_for(self, src: VertexLabel) -> CountMinSketch: ...

    @abstractmethod
    def sketch_name_for(self, src: VertexLabel) -> str: ...

    @property
    @abstractmethod
    def sketches(self) -> Mapping[str, CountMinSketch]: ...

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> None:
        """End the ingest phase; the engine becomes read-only."""
        self._frozen = True

    def _check_writable(self) -> None:
        if self._frozen:
            raise EngineStateError(f'{type(self).__name__} is frozen; ingest is closed')

    @property
    def ingested_mass(self) -> int:
        return sum(sketch.total_mass for sketch in self.sketches.values())

    @property
    def memory_bytes(self) -> int:
        return sum(sketch.dims.memory_bytes for sketch in self.sketches.values())

    def ingest(self, element: StreamElement) -> None:
        self._check_writable()
        self._sketch_for(element.src).update(make_edge_key(element.src, element.dst), element.freq)

    def ingest_many(self, elements: Iterable[StreamElement]) -> int:
        """Ingest a batch, aggregating equal edges into one update each.

        Returns:
            Total frequency ingested
        """
        self._check_writable()
        totals: Counter[Edge] = Counter()
        for element in elements:
            totals[element.edge] += element.freq

        batches: dict[int, tuple[CountMinSketch, list[tuple[bytes, int]]]] = {}
        for (src, dst), freq in totals.items():
            sketch = self._sketch_for(src)
            batches.setdefault(id(sketch), (sketch, []))[1].append((make_edge_key(src, dst), freq))
        for sketch, items in batches.values():
            sketch.update_many(items)

        mass = sum(totals.values())
        logger.debug(f'{type(self).__name__} ingested {mass} over {len(totals)} distinct edges')
        return mass

    def estimate_edge(self, src: VertexLabel, dst: VertexLabel) -> int:
        return self._sketch_for(src).estimate(make_edge_key(src, dst))

    def estimate_subgraph(self, query: SubgraphQuery) -> int | Fraction:
        return query.aggregate.apply([self.estimate_edge(src, dst) for src, dst in query.edges])

    def confidence(self, src: VertexLabel) -> QueryConfidence:
        """Additive error bound ``e * N / w`` of the sketch answering ``src``."""
        sketch = self._sketch_for(src)
        return QueryConfidence(
            sketch=self.sketch_name_for(src),
            width=sketch.width,
            depth=sketch.depth,
            mass=sketch.total_mass,
            error_bound=sketch.error_bound(),
            probability=1 - math.exp(-sketch.depth),
        )


class PartitionedSketchEngine(SketchEngine):
    """Leaf sketches routed by source vertex, plus the outlier sketch."""

    def __init__(self, plan: PartitionPlan, leaf_sketches: Mapping[int, CountMinSketch], outlier: CountMinSketch):
        """Assemble an engine from a plan and its already-built sketches.

        Raises:
            PlanError: If the sketches do not match the plan's leaves and dimensions
        """
        super().__init__()
        if set(leaf_sketches) != {leaf.leaf_id for leaf in plan.leaves}:
            raise PlanError('Leaf sketches do not match the plan leaves')
        for leaf in plan.leaves:
            sketch = leaf_sketches[leaf.leaf_id]
            if sketch.dims != SketchDims(leaf.width, plan.depth):
                raise PlanError(
                    f'Leaf {leaf.leaf_id} sketch is {sketch.width}x{sketch.depth}, '
                    f'plan says {leaf.width}x{plan.depth}'
                )
        if outlier.dims != SketchDims(plan.outlier_width, plan.depth):
            raise PlanError(
                f'Outlier sketch is {outlier.width}x{outlier.depth}, plan says {plan.outlier_width}x{plan.depth}'
            )
        self._plan = plan
        self._routing = dict(plan.routing)
        self._leaf_sketches = dict(sorted(leaf_sketches.items()))
        self._outlier = outlier

    @classmethod
    def build(cls, plan: PartitionPlan, seed: int) -> 'PartitionedSketchEngine':
        """Zeroed sketches with the plan's dimensions and independent per-sketch seeds."""
        leaf_sketches = {
            leaf.leaf_id: CountMinSketch.with_dims(leaf.width, plan.depth, derive_seed(seed, leaf_name(leaf.leaf_id)))
            for leaf in plan.leaves
        }
        outlier = CountMinSketch.with_dims(plan.outlier_width, plan.depth, derive_seed(seed, OUTLIER))
        logger.info(f'Built {len(leaf_sketches)} leaf sketches and an outlier sketch of width {plan.outlier_width}')
        return cls(plan, leaf_sketches, outlier)

    @property
    def plan(self) -> PartitionPlan:
        return self._plan

    @property
    def leaf_sketches(self) -> Mapping[int, CountMinSketch]:
        return self._leaf_sketches

    @property
    def outlier(self) -> CountMinSketch:
        return self._outlier

    @property
    def sketches(self) -> dict[str, CountMinSketch]:
        named = {leaf_name(leaf_id): sketch for leaf_id, sketch in self._leaf_sketches.items()}
        named[OUTLIER] = self._outlier
        return named

    def is_routed(self, src: VertexLabel) -> bool:
        return src in self._routing

    def _sketch_for(self, src: VertexLabel) -> CountMinSketch:
        leaf_id = self._routing.get(src)
        if leaf_id is None:
            return self._outlier
        return self._leaf_sketches[leaf_id]

    def sketch_name_for(self, src: VertexLabel) -> str:
        leaf_id = self._routing.get(src)
        return OUTLIER if leaf_id is None else leaf_name(leaf_id)


class GlobalSketchEngine(SketchEngine):
    """One sketch receiving every edge."""

    def __init__(self, sketch: CountMinSketch):
        super().__init__()
        self._sketch = sketch

    @classmethod
    def build(cls, byte_budget: int, depth: int, seed: int) -> 'GlobalSketchEngine':
        """Sketch of width ``byte_budget // (8 * depth)``.

        Raises:
            ConfigurationError: If the budget cannot buy a single column
        """
        dims = SketchDims.from_byte_budget(byte_budget, depth)
        return cls(CountMinSketch(dims, derive_seed(seed, GLOBAL)))

    @property
    def sketch(self) -> CountMinSketch:
        return self._sketch

    @property
    def sketches(self) -> dict[str, CountMinSketch]:
        return {GLOBAL: self._sketch}

    def _sketch_for(self, src: VertexLabel) -> CountMinSketch:
        return self._sketch

    def sketch_name_for(self, src: VertexLabel) -> str:
        return GLOBAL
