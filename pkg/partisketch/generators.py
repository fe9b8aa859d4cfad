"""Synthetic streams, query workloads and query sets."""

import logging
import math
from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from partisketch.engine import Aggregate, SubgraphQuery
from partisketch.error_handling import ConfigurationError, InsufficientDataError, validate_positive
from partisketch.metrics import ExactOracle
from partisketch.seeds import derive_seed
from partisketch.stream import DataSample, Edge, StreamElement, VertexLabel

logger = logging.getLogger(__name__)

_RMAT_CHUNK = 1 << 16


@dataclass(frozen=True)
class RmatParams:
    """Recursive-matrix generator parameters over ``2**scale`` vertices."""

    scale: int
    edge_count: int
    a: float = 0.45
    b: float = 0.15
    c: float = 0.15
    d: float = 0.25
    seed: int = 0
    max_freq: int = 1000

    def __post_init__(self):
        validate_positive(self.scale, 'scale')
        validate_positive(self.max_freq, 'max_freq')
        if self.edge_count < 0:
            raise ConfigurationError(
                f'edge_count must be non-negative, got {self.edge_count}',
                config_key='edge_count',
                actual_value=self.edge_count,
            )
        probabilities = self.probabilities
        if any(not 0 <= p <= 1 for p in probabilities) or not math.isclose(sum(probabilities), 1.0, abs_tol=1e-9):
            raise ConfigurationError(
                f'Quadrant probabilities a+b+c+d must each lie in [0, 1] and sum to 1, got {probabilities}',
                config_key='rmat',
                expected_type='a + b + c + d = 1',
                actual_value=probabilities,
            )

    @property
    def probabilities(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    @property
    def vertex_count(self) -> int:
        return 1 << self.scale


def vertex_label(index: int) -> VertexLabel:
    return f'v{index}'.encode()


def generate_rmat_stream(
    params: RmatParams, freq_zipf_alpha: float | None = None, edge_freq_spread: int | None = None
) -> list[StreamElement]:
    """R-MAT edge arrivals; repeated pairs are kept as frequency mass.

    Every arrival descends ``scale`` levels, picking a quadrant per level:
    ``a`` top-left, ``b`` top-right, ``c`` bottom-left, ``d`` bottom-right.

    Args:
        params: Generator parameters
        freq_zipf_alpha: When set (> 1), each source vertex draws one Zipf frequency
            level, clipped to ``max_freq``, carried by all of its arrivals
        edge_freq_spread: When set, each distinct edge also draws one factor in
            ``1..edge_freq_spread`` that scales every one of its arrivals, clipped to ``max_freq``

    Returns:
        ``edge_count`` elements with ``ts`` equal to the arrival index
    """
    if freq_zipf_alpha is not None and freq_zipf_alpha <= 1:
        raise ConfigurationError(
            f'freq_zipf_alpha must exceed 1, got {freq_zipf_alpha}',
            config_key='freq_zipf_alpha',
            expected_type='> 1',
            actual_value=freq_zipf_alpha,
        )
    if edge_freq_spread is not None:
        validate_positive(edge_freq_spread, 'edge_freq_spread')

    rng = np.random.default_rng(params.seed)
    probabilities = np.asarray(params.probabilities, dtype=np.float64)
    probabilities = probabilities / probabilities.sum()
    bit_weights = np.left_shift(np.int64(1), np.arange(params.scale - 1, -1, -1, dtype=np.int64))

    sources = np.empty(params.edge_count, dtype=np.int64)
    targets = np.empty(params.edge_count, dtype=np.int64)
    for start in range(0, params.edge_count, _RMAT_CHUNK):
        stop = min(start + _RMAT_CHUNK, params.edge_count)
        quadrants = rng.choice(4, size=(stop - start, params.scale), p=probabilities)
        sources[start:stop] = (quadrants >> 1) @ bit_weights
        targets[start:stop] = (quadrants & 1) @ bit_weights

    frequencies = np.ones(params.edge_count, dtype=np.int64)
    if freq_zipf_alpha is not None and params.edge_count:
        zipf_rng = np.random.default_rng(derive_seed(params.seed, 'freq-zipf'))
        unique_sources, inverse = np.unique(sources, return_inverse=True)
        levels = np.minimum(zipf_rng.zipf(freq_zipf_alpha, size=len(unique_sources)), params.max_freq)
        frequencies = levels[inverse]
    if edge_freq_spread is not None and params.edge_count:
        spread_rng = np.random.default_rng(derive_seed(params.seed, 'edge-freq-spread'))
        _, pair_inverse = np.unique(np.stack([sources, targets], axis=1), axis=0, return_inverse=True)
        pair_inverse = pair_inverse.reshape(-1)
        factors = spread_rng.integers(1, edge_freq_spread + 1, size=int(pair_inverse.max()) + 1)
        frequencies = np.minimum(frequencies * factors[pair_inverse], params.max_freq)

    labels: dict[int, VertexLabel] = {}

    def label(index: int) -> VertexLabel:
        if index not in labels:
            labels[index] = vertex_label(index)
        return labels[index]

    stream = [
        StreamElement(label(int(src)), label(int(dst)), int(freq), ts)
        for ts, (src, dst, freq) in enumerate(zip(sources.tolist(), targets.tolist(), frequencies.tolist(), strict=True))
    ]
    logger.info(
        f'Generated {len(stream)} R-MAT arrivals over {params.vertex_count} vertices (seed {params.seed})'
    )
    return stream


def zipf_rank_probabilities(n: int, alpha: float) -> np.ndarray:
    """Normalized ``rank**-alpha`` weights for ranks ``1..n``."""
    weights = np.arange(1, n + 1, dtype=np.float64) ** -float(alpha)
    return weights / weights.sum()


def zipf_rank_order(n: int, rank_seed: int) -> np.ndarray:
    """Seeded permutation: position ``r`` holds the index of the edge with rank ``r + 1``."""
    return np.random.default_rng(rank_seed).permutation(n)


def _zipf_indices(n: int, alpha: float, size: int, seed: int, rank_seed: int | None) -> list[int]:
    if alpha <= 0:
        raise ConfigurationError(
            f'Zipf alpha must be positive, got {alpha}', config_key='alpha', expected_type='> 0', actual_value=alpha
        )
    if size < 0 or size > n:
        raise InsufficientDataError(
            f'Cannot sample {size} distinct edges from a population of {n}',
            data_type='zipf_workload',
            context={'size': size, 'population': n},
        )
    if size == 0:
        return []
    order = zipf_rank_order(n, seed if rank_seed is None else rank_seed)
    ranks = np.random.default_rng(seed).choice(n, size=size, replace=False, p=zipf_rank_probabilities(n, alpha))
    return [int(order[rank]) for rank in ranks]


def generate_zipf_workload(
    stream_edges: Sequence[Edge], alpha: float, size: int, seed: int, rank_seed: int | None = None
) -> DataSample:
    """Sample distinct edges without replacement, weighted by Zipf rank.

    Args:
        stream_edges: Distinct edges of the stream
        alpha: Skew; larger values concentrate the sample on top ranks
        size: Number of edges to draw
        seed: Seed for the selection
        rank_seed: Seed for the rank permutation; share it between a workload
            and a query set so the workload predicts the queries

    Raises:
        InsufficientDataError: If ``size`` exceeds the number of edges
    """
    indices = _zipf_indices(len(stream_edges), alpha, size, seed, rank_seed)
    elements = tuple(StreamElement(*stream_edges[index], freq=1, ts=ts) for ts, index in enumerate(indices))
    return DataSample(elements, max(1, size))


class QueryKind(StrEnum):
    UNIFORM_EDGES = 'uniform_edges'
    ZIPF_EDGES = 'zipf_edges'
    BFS_SUBGRAPHS = 'bfs_subgraphs'
    ZIPF_SUBGRAPHS = 'zipf_subgraphs'

    @property
    def is_subgraph(self) -> bool:
        return self in (QueryKind.BFS_SUBGRAPHS, QueryKind.ZIPF_SUBGRAPHS)


def bfs_subgraph(
    out_edges: dict[VertexLabel, list[tuple[VertexLabel, int]]],
    start: VertexLabel,
    max_edges: int,
    rng: np.random.Generator,
) -> list[Edge]:
    """Grow a subgraph from ``start`` breadth-first, one random unexplored out-edge at a time.

    Stops at ``max_edges`` or when the reachable out-edges are exhausted.
    """
    chosen: list[Edge] = []
    taken: set[Edge] = set()
    visited = {start}
    frontier = deque([start])
    while frontier and len(chosen) < max_edges:
        vertex = frontier[0]
        candidates = [(vertex, dst) for dst, _ in out_edges.get(vertex, ()) if (vertex, dst) not in taken]
        if not candidates:
            frontier.popleft()
            continue
        edge = candidates[int(rng.integers(len(candidates)))]
        chosen.append(edge)
        taken.add(edge)
        if edge[1] not in visited:
            visited.add(edge[1])
            frontier.append(edge[1])
    return chosen


def generate_queries(
    oracle: ExactOracle,
    kind: QueryKind | str,
    count: int,
    seed: int,
    *,
    alpha: float = 1.5,
    rank_seed: int | None = None,
    subgraph_edges: int = 10,
    aggregate: Aggregate = Aggregate.SUM,
) -> list[Edge] | list[SubgraphQuery]:
    """Build a query set over the oracle's ingested edges.

    Edge kinds return ``(src, dst)`` pairs and subgraph kinds return
    ``SubgraphQuery`` objects. Every queried edge has a positive true frequency.

    Raises:
        InsufficientDataError: If the oracle holds no edges
    """
    kind = QueryKind(kind)
    if count < 0:
        raise ConfigurationError(f'Query count must be non-negative, got {count}', config_key='count')
    if count == 0:
        return []
    if not len(oracle):
        raise InsufficientDataError('Cannot draw queries from an empty stream', data_type='ExactOracle')

    edges = oracle.distinct_edges
    rng = np.random.default_rng(seed)

    if kind is QueryKind.UNIFORM_EDGES:
        picks = rng.choice(len(edges), size=count, replace=count > len(edges))
        return [edges[int(i)] for i in picks]

    if kind is QueryKind.ZIPF_EDGES:
        return [edges[i] for i in _zipf_indices(len(edges), alpha, count, seed, rank_seed)]

    out_edges = oracle.out_edges()
    if kind is QueryKind.BFS_SUBGRAPHS:
        sources = oracle.source_vertices
        starts = [sources[int(i)] for i in rng.choice(len(sources), size=count)]
    else:
        zipf_edges = [edges[i] for i in _zipf_indices(len(edges), alpha, min(count, len(edges)), seed, rank_seed)]
        starts = [zipf_edges[i % len(zipf_edges)][0] for i in range(count)]

    walk_rng = np.random.default_rng(derive_seed(seed, 'bfs'))
    queries = [SubgraphQuery(tuple(bfs_subgraph(out_edges, start, subgraph_edges, walk_rng)), aggregate) for start in starts]
    logger.info(f'Generated {len(queries)} {kind.value} queries')
    return queries
