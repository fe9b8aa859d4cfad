"""Plan JSON files and engine snapshot containers.

A plan file is a JSON document with sorted keys. An engine snapshot is a binary
container::

    magic 'PSKE' | version u16 | reserved u16 | toc length u32 | toc JSON | payloads

The table of contents lists ``{name, offset, length}`` per section, offsets
relative to the first payload byte. Sections are ``plan`` (the plan JSON),
``leaf/<id>`` and ``outlier`` (sketch snapshots) and, when present, ``global``.
"""

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from partisketch.countmin import CountMinSketch
from partisketch.engine import GlobalSketchEngine, PartitionedSketchEngine
from partisketch.error_handling import PlanError, StorageError, handle_storage_errors
from partisketch.partitioner import LeafCriterion, PartitionConfig, PartitionPlan, PlanLeaf
from partisketch.stream import as_label, label_text

logger = logging.getLogger(__name__)

PLAN_VERSION = 1
CONTAINER_MAGIC = b'PSKE'
CONTAINER_VERSION = 1
_CONTAINER_HEADER = struct.Struct('<4sHHI')


def plan_to_dict(plan: PartitionPlan) -> dict[str, Any]:
    return {
        'version': PLAN_VERSION,
        'depth': plan.depth,
        'total_width': plan.total_width,
        'outlier_width': plan.outlier_width,
        'leaves': [
            {
                'id': leaf.leaf_id,
                'width': leaf.width,
                'creation_width': leaf.creation_width,
                'degree_sum': leaf.degree_sum,
                'criterion': leaf.criterion.value,
                'vertices': [label_text(vertex) for vertex in leaf.vertices],
            }
            for leaf in plan.leaves
        ],
        'config': plan.config.to_dict() if plan.config else None,
    }


def plan_from_dict(data: dict[str, Any]) -> PartitionPlan:
    """Rebuild a plan from its JSON form.

    Raises:
        PlanError: On an unknown version or missing fields
    """
    if data.get('version') != PLAN_VERSION:
        raise PlanError(f'Unsupported plan version {data.get("version")!r}', context={'version': data.get('version')})
    try:
        leaves = tuple(
            PlanLeaf(
                leaf_id=entry['id'],
                width=entry['width'],
                vertices=tuple(as_label(vertex) for vertex in entry['vertices']),
                creation_width=entry['creation_width'],
                degree_sum=entry['degree_sum'],
                criterion=LeafCriterion(entry['criterion']),
            )
            for entry in data['leaves']
        )
        config = PartitionConfig.from_dict(data['config']) if data.get('config') else None
        return PartitionPlan(leaves, data['outlier_width'], data['depth'], data['total_width'], config)
    except (KeyError, TypeError, ValueError) as e:
        raise PlanError(f'Malformed plan document: {e}', cause=e) from e


def plan_to_json(plan: PartitionPlan) -> str:
    return json.dumps(plan_to_dict(plan), sort_keys=True, indent=2) + '\n'


@handle_storage_errors
def save_plan(path: str | Path, plan: PartitionPlan) -> None:
    Path(path).write_text(plan_to_json(plan), encoding='utf-8')
    logger.info(f'Saved plan with {len(plan.leaves)} leaves to {path}')


@handle_storage_errors
def load_plan(path: str | Path) -> PartitionPlan:
    """Load a plan JSON file.

    Raises:
        StorageError: If the file cannot be read or is not JSON
        PlanError: If the document is not a valid plan
    """
    text = Path(path).read_text(encoding='utf-8')
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise StorageError(
            f'{path}:{e.lineno}: invalid plan JSON: {e.msg}',
            path=str(path),
            operation='load_plan',
            line_number=e.lineno,
            cause=e,
        ) from e
    return plan_from_dict(data)


@dataclass
class EngineSnapshot:
    """Engines restored from a snapshot container."""

    engine: PartitionedSketchEngine
    global_engine: GlobalSketchEngine | None = None

    @property
    def plan(self) -> PartitionPlan:
        return self.engine.plan


def snapshot_sections(
    engine: PartitionedSketchEngine, global_engine: GlobalSketchEngine | None = None
) -> dict[str, bytes]:
    sections = {'plan': plan_to_json(engine.plan).encode('utf-8')}
    for leaf_id, sketch in engine.leaf_sketches.items():
        sections[f'leaf/{leaf_id}'] = sketch.to_bytes()
    sections['outlier'] = engine.outlier.to_bytes()
    if global_engine is not None:
        sections['global'] = global_engine.sketch.to_bytes()
    return sections


def snapshot_to_bytes(engine: PartitionedSketchEngine, global_engine: GlobalSketchEngine | None = None) -> bytes:
    sections = snapshot_sections(engine, global_engine)
    toc = []
    offset = 0
    for name, payload in sections.items():
        toc.append({'name': name, 'offset': offset, 'length': len(payload)})
        offset += len(payload)
    toc_bytes = json.dumps(toc, sort_keys=True, separators=(',', ':')).encode('utf-8')
    header = _CONTAINER_HEADER.pack(CONTAINER_MAGIC, CONTAINER_VERSION, 0, len(toc_bytes))
    return b''.join([header, toc_bytes, *sections.values()])


def _read_sections(data: bytes, path: str | None) -> dict[str, bytes]:
    def fail(message: str) -> StorageError:
        return StorageError(f'{path}: {message}' if path else message, path=path, operation='load_snapshot')

    if len(data) < _CONTAINER_HEADER.size:
        raise fail('snapshot is truncated')
    magic, version, _reserved, toc_length = _CONTAINER_HEADER.unpack_from(data, 0)
    if magic != CONTAINER_MAGIC:
        raise fail(f'not an engine snapshot (magic {magic!r})')
    if version != CONTAINER_VERSION:
        raise fail(f'unsupported snapshot version {version}')

    payload_start = _CONTAINER_HEADER.size + toc_length
    try:
        toc = json.loads(data[_CONTAINER_HEADER.size : payload_start].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise fail(f'unreadable table of contents: {e}') from e

    sections = {}
    for entry in toc:
        start = payload_start + entry['offset']
        end = start + entry['length']
        if end > len(data):
            raise fail(f'section {entry["name"]} runs past the end of the file')
        sections[entry['name']] = data[start:end]
    return sections


def snapshot_from_bytes(data: bytes, path: str | None = None) -> EngineSnapshot:
    sections = _read_sections(data, path)
    if 'plan' not in sections or 'outlier' not in sections:
        raise StorageError(f'{path}: snapshot lacks plan or outlier section', path=path, operation='load_snapshot')
    plan = plan_from_dict(json.loads(sections['plan'].decode('utf-8')))
    missing = [leaf.leaf_id for leaf in plan.leaves if f'leaf/{leaf.leaf_id}' not in sections]
    if missing:
        raise StorageError(f'{path}: snapshot lacks sketches for leaves {missing}', path=path, operation='load_snapshot')
    leaf_sketches = {
        leaf.leaf_id: CountMinSketch.from_bytes(sections[f'leaf/{leaf.leaf_id}']) for leaf in plan.leaves
    }
    engine = PartitionedSketchEngine(plan, leaf_sketches, CountMinSketch.from_bytes(sections['outlier']))
    global_engine = None
    if 'global' in sections:
        global_engine = GlobalSketchEngine(CountMinSketch.from_bytes(sections['global']))
    return EngineSnapshot(engine, global_engine)


@handle_storage_errors
def save_snapshot(
    path: str | Path, engine: PartitionedSketchEngine, global_engine: GlobalSketchEngine | None = None
) -> int:
    """Write an engine snapshot container.

    Returns:
        Number of bytes written
    """
    data = snapshot_to_bytes(engine, global_engine)
    Path(path).write_bytes(data)
    logger.info(f'Saved snapshot of {len(engine.sketches)} sketches ({len(data)} bytes) to {path}')
    return len(data)


@handle_storage_errors
def load_snapshot(path: str | Path) -> EngineSnapshot:
    """Read an engine snapshot container written by ``save_snapshot``.

    Raises:
        StorageError: If the file is unreadable or not a snapshot
        PlanError: If the embedded plan does not match the sketches
    """
    return snapshot_from_bytes(Path(path).read_bytes(), str(path))


@handle_storage_errors
def detect_kind(path: str | Path) -> str:
    """Tell a plan JSON file from an engine snapshot by its leading bytes.

    Returns:
        ``'snapshot'`` or ``'plan'``
    """
    with open(path, 'rb') as f:
        head = f.read(len(CONTAINER_MAGIC))
    if head == CONTAINER_MAGIC:
        return 'snapshot'
    if head.lstrip().startswith(b'{'):
        return 'plan'
    raise StorageError(f'{path}: neither a plan JSON file nor an engine snapshot', path=str(path), operation='inspect')
