"""Exact oracle and accuracy metrics for sketch estimates."""

import logging
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from partisketch.config import Config
from partisketch.engine import Aggregate
from partisketch.error_handling import (
    EmptyQuerySetError,
    InsufficientDataError,
    MalformedQueryError,
    UndefinedTruthError,
    validate_positive,
)
from partisketch.stream import Edge, StreamElement, VertexLabel

logger = logging.getLogger(__name__)

Number = int | float | Fraction


class ExactOracle:
    """Exact per-edge frequencies of an ingested stream."""

    def __init__(self):
        self._counts: Counter[Edge] = Counter()
        self._total_mass = 0

    @classmethod
    def from_stream(cls, stream: Iterable[StreamElement]) -> 'ExactOracle':
        oracle = cls()
        for element in stream:
            oracle.add(element)
        return oracle

    def add(self, element: StreamElement) -> None:
        self._counts[element.edge] += element.freq
        self._total_mass += element.freq

    def truth(self, src: VertexLabel, dst: VertexLabel) -> int:
        return self._counts.get((src, dst), 0)

    def __len__(self) -> int:
        return len(self._counts)

    def __contains__(self, edge: Edge) -> bool:
        return edge in self._counts

    @property
    def total_mass(self) -> int:
        return self._total_mass

    @property
    def distinct_edges(self) -> list[Edge]:
        """Distinct edges in a stable (sorted) order."""
        return sorted(self._counts)

    def out_edges(self) -> dict[VertexLabel, list[tuple[VertexLabel, int]]]:
        """Per source vertex, its ``(dst, frequency)`` pairs sorted by destination."""
        grouped: dict[VertexLabel, list[tuple[VertexLabel, int]]] = defaultdict(list)
        for (src, dst), freq in sorted(self._counts.items()):
            grouped[src].append((dst, freq))
        return dict(grouped)

    @property
    def source_vertices(self) -> list[VertexLabel]:
        return sorted({src for src, _ in self._counts})


def _fraction(value: Number) -> Fraction:
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def relative_error(estimate: Number, truth: Number) -> Fraction:
    """``(estimate - truth) / truth``.

    Raises:
        UndefinedTruthError: If truth is not positive
    """
    truth = _fraction(truth)
    if truth <= 0:
        raise UndefinedTruthError(
            f'Relative error needs a positive truth, got {truth}', processing_stage='relative_error'
        )
    return (_fraction(estimate) - truth) / truth


def average_relative_error(errors: Sequence[Number]) -> Fraction:
    """Arithmetic mean of relative errors.

    Raises:
        EmptyQuerySetError: If no errors are given
    """
    if not errors:
        raise EmptyQuerySetError('Average relative error over an empty query set')
    return sum((_fraction(error) for error in errors), Fraction(0)) / len(errors)


def effective_queries(errors: Iterable[Number], g0: Number | None = None) -> int:
    """Number of queries whose relative error is at most ``g0`` (default from config)."""
    threshold = _fraction(Config().G0 if g0 is None else g0)
    validate_positive(threshold, 'g0')
    return sum(1 for error in errors if _fraction(error) <= threshold)


def subgraph_relative_error(
    estimates: Sequence[int], truths: Sequence[int], aggregate: Aggregate = Aggregate.SUM
) -> Fraction:
    """Relative error of an aggregate: ``G(estimates) / G(truths) - 1``.

    Raises:
        MalformedQueryError: If the lists are empty or of different lengths
        UndefinedTruthError: If the true aggregate is zero
    """
    if not estimates or len(estimates) != len(truths):
        raise MalformedQueryError(
            f'Need equal non-empty estimate and truth lists, got {len(estimates)} and {len(truths)}',
            processing_stage='subgraph_relative_error',
        )
    aggregate = Aggregate(aggregate)
    true_value = _fraction(aggregate.apply(truths))
    if true_value == 0:
        raise UndefinedTruthError('True subgraph aggregate is zero', processing_stage='subgraph_relative_error')
    return _fraction(aggregate.apply(estimates)) / true_value - 1


def _population_variance(values: Sequence[int]) -> Fraction:
    count = len(values)
    total = sum(values)
    return Fraction(count * sum(value * value for value in values) - total * total, count * count)


def variance_ratio(oracle: ExactOracle, exclude_single_edge_vertices: bool = False) -> Fraction | None:
    """Global edge-frequency variance over the mean per-source-vertex variance.

    Population variances throughout, computed exactly. A large ratio means edges
    leaving the same vertex have similar frequencies.

    Args:
        oracle: Exact frequencies of the stream
        exclude_single_edge_vertices: Leave vertices with one out-edge out of the mean

    Returns:
        The exact ratio, or None when the mean per-vertex variance is zero

    Raises:
        InsufficientDataError: If the stream has fewer than 2 distinct edges
    """
    if len(oracle) < 2:
        raise InsufficientDataError(
            f'Variance ratio needs at least 2 distinct edges, got {len(oracle)}',
            processing_stage='variance_ratio',
        )
    grouped = oracle.out_edges()
    global_variance = _population_variance([freq for edges in grouped.values() for _, freq in edges])
    per_vertex = [
        _population_variance([freq for _, freq in edges])
        for edges in grouped.values()
        if not (exclude_single_edge_vertices and len(edges) == 1)
    ]
    if not per_vertex:
        return None
    local_variance = sum(per_vertex, Fraction(0)) / len(per_vertex)
    if local_variance == 0:
        return None
    return global_variance / local_variance


@dataclass(frozen=True)
class MetricsReport:
    """Accuracy and timing of one engine over one query set."""

    engine: str
    scenario: str
    budget_bytes: int
    alpha: float | None
    avg_relative_error: Fraction
    effective_count: int
    query_count: int
    g0: Fraction
    t_construct_s: float
    t_query_s: float
    seed: int
    query_kind: str
    outlier_avg_rel_err: Fraction | None = None
    outlier_query_count: int | None = None

    def __post_init__(self):
        if self.query_count < 1:
            raise EmptyQuerySetError('A report needs at least one query')
        if not 0 <= self.effective_count <= self.query_count:
            raise InsufficientDataError(
                f'effective_count {self.effective_count} outside [0, {self.query_count}]',
                data_type='MetricsReport',
            )

    def to_row(self) -> dict[str, Any]:
        """CSV row with fixed float precision."""
        return {
            'engine': self.engine,
            'scenario': self.scenario,
            'budget_bytes': self.budget_bytes,
            'alpha': '' if self.alpha is None else f'{self.alpha:g}',
            'avg_rel_err': f'{float(self.avg_relative_error):.6f}',
            'effective_count': self.effective_count,
            'query_count': self.query_count,
            'G0': f'{float(self.g0):g}',
            't_construct_s': f'{self.t_construct_s:.6f}',
            't_query_s': f'{self.t_query_s:.9f}',
            'seed': self.seed,
            'query_kind': self.query_kind,
            'outlier_avg_rel_err': ''
            if self.outlier_avg_rel_err is None
            else f'{float(self.outlier_avg_rel_err):.6f}',
            'outlier_query_count': '' if self.outlier_query_count is None else self.outlier_query_count,
        }


CSV_COLUMNS = [
    'engine',
    'scenario',
    'budget_bytes',
    'alpha',
    'avg_rel_err',
    'effective_count',
    'query_count',
    'G0',
    't_construct_s',
    't_query_s',
    'seed',
    'query_kind',
    'outlier_avg_rel_err',
    'outlier_query_count',
]

TIMING_COLUMNS = ('t_construct_s', 't_query_s')
