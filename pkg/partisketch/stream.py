"""Graph-stream data model, edge keying, sampling and per-vertex statistics."""

import logging
import random
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from partisketch.error_handling import (
    DataProcessingError,
    InsufficientDataError,
    MalformedLabelError,
    PartiSketchError,
    StorageError,
    handle_storage_errors,
    validate_positive,
)

logger = logging.getLogger(__name__)

SEPARATOR = b'\x1f'

VertexLabel = bytes
Edge = tuple[VertexLabel, VertexLabel]


def as_label(value: str | bytes) -> VertexLabel:
    """Coerce a text or byte label to the byte form used everywhere in the library."""
    label = value.encode('utf-8', 'surrogateescape') if isinstance(value, str) else bytes(value)
    _check_label(label)
    return label


def label_text(label: VertexLabel) -> str:
    """Render a byte label for text files and JSON."""
    return label.decode('utf-8', 'surrogateescape')


def _check_label(label: VertexLabel) -> None:
    if not label:
        raise MalformedLabelError('Vertex label must not be empty', data_type='label')
    if SEPARATOR in label:
        raise MalformedLabelError(
            f'Vertex label {label!r} contains the reserved 0x1F separator',
            data_type='label',
            context={'label': label_text(label)},
        )


@dataclass(frozen=True, slots=True)
class StreamElement:
    """One timestamped, weighted directed edge arrival."""

    src: VertexLabel
    dst: VertexLabel
    freq: int = 1
    ts: int = 0

    def __post_init__(self):
        _check_label(self.src)
        _check_label(self.dst)
        if self.freq < 1:
            raise DataProcessingError(f'Edge frequency must be >= 1, got {self.freq}', data_type='StreamElement')
        if self.ts < 0:
            raise DataProcessingError(f'Timestamp must be non-negative, got {self.ts}', data_type='StreamElement')

    @property
    def edge(self) -> Edge:
        return (self.src, self.dst)


def make_edge_key(src: VertexLabel, dst: VertexLabel, undirected: bool = False) -> bytes:
    """Build the sketch key of an edge.

    Args:
        src: Source label
        dst: Destination label
        undirected: Put the bytewise smaller label first so both orientations share a key

    Returns:
        ``src + 0x1F + dst``

    Raises:
        MalformedLabelError: If a label is empty or contains the separator
    """
    _check_label(src)
    _check_label(dst)
    if undirected and dst < src:
        src, dst = dst, src
    return src + SEPARATOR + dst


def split_edge_key(key: bytes) -> Edge:
    """Decode an edge key back into its ``(src, dst)`` pair."""
    src, sep, dst = key.partition(SEPARATOR)
    if not sep or not src or not dst or SEPARATOR in dst:
        raise MalformedLabelError(f'Not an edge key: {key!r}', data_type='edge_key')
    return src, dst


@dataclass(frozen=True)
class DataSample:
    """A bounded multiset of stream elements."""

    elements: tuple[StreamElement, ...]
    capacity: int

    def __post_init__(self):
        validate_positive(self.capacity, 'capacity')
        if len(self.elements) > self.capacity:
            raise InsufficientDataError(
                f'Sample holds {len(self.elements)} elements but capacity is {self.capacity}',
                data_type='DataSample',
            )

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @property
    def source_vertices(self) -> set[VertexLabel]:
        return {element.src for element in self.elements}


def reservoir_sample(stream: Iterable[StreamElement], k: int, seed: int) -> DataSample:
    """Uniform fixed-size sample of a stream in one pass.

    Args:
        stream: Stream elements in arrival order
        k: Reservoir capacity
        seed: Seed for the replacement draws

    Returns:
        A sample of ``min(k, len(stream))`` elements in reservoir slot order
    """
    validate_positive(k, 'k')
    rng = random.Random(seed)
    reservoir: list[StreamElement] = []
    seen = 0
    for element in stream:
        seen += 1
        if len(reservoir) < k:
            reservoir.append(element)
            continue
        slot = rng.randrange(seen)
        if slot < k:
            reservoir[slot] = element

    if seen < k:
        logger.warning(f'Stream has {seen} elements, fewer than sample size {k}; sampling all')
    logger.info(f'Reservoir sampled {len(reservoir)} of {seen} elements')
    return DataSample(tuple(reservoir), k)


@dataclass(frozen=True)
class VertexStats:
    """Per-source-vertex frequency mass ``fv`` and distinct out-degree ``deg``."""

    fv: Mapping[VertexLabel, int] = field(default_factory=dict)
    deg: Mapping[VertexLabel, int] = field(default_factory=dict)

    def __contains__(self, vertex: VertexLabel) -> bool:
        return vertex in self.fv

    def __len__(self) -> int:
        return len(self.fv)

    @property
    def vertices(self) -> list[VertexLabel]:
        return sorted(self.fv)

    @property
    def total_mass(self) -> int:
        return sum(self.fv.values())

    @property
    def distinct_edges(self) -> int:
        return sum(self.deg.values())


def compute_vertex_stats(sample: Iterable[StreamElement]) -> VertexStats:
    """Aggregate frequency mass and distinct out-degree per source vertex."""
    fv: dict[VertexLabel, int] = defaultdict(int)
    out_edges: dict[VertexLabel, set[VertexLabel]] = defaultdict(set)
    for element in sample:
        fv[element.src] += element.freq
        out_edges[element.src].add(element.dst)
    return VertexStats(dict(fv), {vertex: len(dsts) for vertex, dsts in out_edges.items()})


@dataclass(frozen=True)
class WorkloadWeights:
    """Smoothed relative query weight per source vertex."""

    weights: Mapping[VertexLabel, Fraction]
    normalization: int

    def __contains__(self, vertex: VertexLabel) -> bool:
        return vertex in self.weights

    def weight(self, vertex: VertexLabel) -> Fraction:
        return self.weights[vertex]

    @property
    def total(self) -> Fraction:
        return sum(self.weights.values(), Fraction(0))


def compute_workload_weights(
    workload: Iterable[StreamElement], known_vertices: Iterable[VertexLabel]
) -> WorkloadWeights:
    """Add-one smoothed query weights over the known source vertices.

    ``w(n) = (c(n) + 1) / (T + V)`` where ``c(n)`` counts workload queries whose
    source is ``n``, ``T`` is the number of those queries landing on known
    vertices and ``V`` is the number of known vertices.

    Raises:
        InsufficientDataError: If there are no known vertices
    """
    known = set(known_vertices)
    if not known:
        raise InsufficientDataError(
            'Workload weights need at least one known source vertex',
            data_type='WorkloadWeights',
            processing_stage='compute_workload_weights',
        )

    counts = Counter(element.src for element in workload)
    unknown = [vertex for vertex in counts if vertex not in known]
    if unknown:
        logger.warning(f'{len(unknown)} workload source vertices are absent from the data sample')

    total = sum(counts[vertex] for vertex in known)
    normalization = total + len(known)
    weights = {vertex: Fraction(counts[vertex] + 1, normalization) for vertex in known}
    return WorkloadWeights(weights, normalization)


def _decode_line(path: Path, line_number: int, raw: bytes, operation: str) -> str:
    try:
        return raw.decode('utf-8')
    except UnicodeDecodeError as e:
        raise StorageError(
            f'{path}:{line_number}: not valid UTF-8 at byte {e.start}',
            path=str(path),
            operation=operation,
            line_number=line_number,
            cause=e,
        ) from e


def parse_stream_line(
    path: Path, line_number: int, line: str | bytes, operation: str = 'read_stream'
) -> StreamElement:
    """Parse one ``src<TAB>dst[<TAB>freq[<TAB>ts]]`` line; errors name the file and line.

    Raw lines are decoded as strict UTF-8 first.
    """
    if isinstance(line, bytes):
        line = _decode_line(path, line_number, line, operation)
    fields = line.rstrip('\r\n').split('\t')
    if not 2 <= len(fields) <= 4:
        raise StorageError(
            f'{path}:{line_number}: expected 2 to 4 tab-separated fields, got {len(fields)}',
            path=str(path),
            operation=operation,
            line_number=line_number,
        )
    try:
        src = as_label(fields[0])
        dst = as_label(fields[1])
        freq = int(fields[2]) if len(fields) > 2 and fields[2] else 1
        ts = int(fields[3]) if len(fields) > 3 and fields[3] else line_number
        return StreamElement(src, dst, freq, ts)
    except (ValueError, PartiSketchError) as e:
        raise StorageError(
            f'{path}:{line_number}: {e}',
            path=str(path),
            operation=operation,
            line_number=line_number,
            cause=e,
        ) from e


@handle_storage_errors
def read_stream(path: str | Path) -> list[StreamElement]:
    """Read a tab-separated stream file.

    Each non-blank line is ``src<TAB>dst[<TAB>freq[<TAB>ts]]``. ``freq`` defaults
    to 1 and ``ts`` to the 1-based line number.

    Raises:
        StorageError: On I/O failure or a malformed line (the message names the line)
    """
    path = Path(path)
    elements = []
    with open(path, 'rb') as f:
        for line_number, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            elements.append(parse_stream_line(path, line_number, raw))
    logger.info(f'Read {len(elements)} stream elements from {path}')
    return elements


@handle_storage_errors
def write_stream(path: str | Path, elements: Sequence[StreamElement]) -> int:
    """Write stream elements in the tab-separated format.

    Returns:
        Number of elements written

    Raises:
        StorageError: On I/O failure, or a label that is not valid UTF-8 (the
            message names the output line)
    """
    path = Path(path)
    with open(path, 'wb') as f:
        for line_number, element in enumerate(elements, start=1):
            line = f'{label_text(element.src)}\t{label_text(element.dst)}\t{element.freq}\t{element.ts}\n'
            try:
                f.write(line.encode('utf-8'))
            except UnicodeEncodeError as e:
                raise StorageError(
                    f'{path}:{line_number}: label of {element.edge!r} is not valid UTF-8',
                    path=str(path),
                    operation='write_stream',
                    line_number=line_number,
                    cause=e,
                ) from e
    logger.info(f'Wrote {len(elements)} stream elements to {path}')
    return len(elements)
