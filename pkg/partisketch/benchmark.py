"""Accuracy benchmark of the partitioned engine against the global baseline.

For each byte budget both engines are built from the same stream, queried with
the same query set and scored against the exact oracle. Construction time
covers planning (partitioned only), sketch allocation and ingest; query time
is the mean wall time per query.
"""

import csv
import logging
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import partial
from pathlib import Path
from typing import Any

import numpy as np

from partisketch.config import Config
from partisketch.engine import GlobalSketchEngine, PartitionedSketchEngine, SketchEngine
from partisketch.error_handling import (
    ConfigurationError,
    UnderestimateError,
    handle_storage_errors,
    validate_positive,
)
from partisketch.generators import QueryKind, generate_queries, generate_zipf_workload
from partisketch.metrics import (
    CSV_COLUMNS,
    ExactOracle,
    MetricsReport,
    average_relative_error,
    effective_queries,
    relative_error,
    subgraph_relative_error,
)
from partisketch.partitioner import PartitionConfig, Scenario, build_plan
from partisketch.seeds import derive_seed
from partisketch.stream import (
    DataSample,
    StreamElement,
    WorkloadWeights,
    compute_workload_weights,
    label_text,
    reservoir_sample,
)

logger = logging.getLogger(__name__)

PARTITIONED = 'partitioned'
GLOBAL = 'global'


@dataclass(frozen=True)
class BenchmarkSpec:
    """Everything a benchmark run needs besides the stream."""

    budgets: tuple[int, ...] = (65536, 262144, 1048576)
    depth: int = 5
    sample_size: int | None = None
    sample_fraction: float = 0.05
    scenario: Scenario = Scenario.DATA_ONLY
    workload_alpha: float = 1.5
    workload_size: int | None = None
    query_kind: QueryKind = QueryKind.UNIFORM_EDGES
    query_count: int = 2000
    subgraph_edges: int = 10
    g0: float = 5
    min_width: int = 64
    collision_constant: float = 0.2
    outlier_fraction: float = 0.1
    withhold_fraction: float = 0.0
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'budgets', tuple(self.budgets))
        object.__setattr__(self, 'scenario', Scenario(self.scenario))
        object.__setattr__(self, 'query_kind', QueryKind(self.query_kind))
        validate_positive(self.depth, 'depth')
        validate_positive(self.query_count, 'query_count')
        validate_positive(self.workers, 'workers')
        for budget in self.budgets:
            validate_positive(budget, 'budget_bytes')
        if not 0 <= self.withhold_fraction < 1:
            raise ConfigurationError(
                f'withhold_fraction must lie in [0, 1), got {self.withhold_fraction}',
                config_key='withhold_fraction',
                actual_value=self.withhold_fraction,
            )

    @classmethod
    def from_config(cls, config: Config | None = None, **overrides: Any) -> 'BenchmarkSpec':
        """Spec seeded from configuration defaults; keyword overrides win."""
        config = config or Config()
        values = {
            'budgets': tuple(config.BUDGETS),
            'depth': config.DEPTH,
            'sample_fraction': config.SAMPLE_FRACTION,
            'workload_alpha': config.WORKLOAD_ALPHA,
            'query_count': config.QUERY_COUNT,
            'subgraph_edges': config.SUBGRAPH_EDGES,
            'g0': config.G0,
            'min_width': config.MIN_WIDTH,
            'collision_constant': config.COLLISION_CONSTANT,
            'outlier_fraction': config.OUTLIER_FRACTION,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    def resolved_sample_size(self, stream_length: int) -> int:
        if self.sample_size is not None:
            return self.sample_size
        return max(1, round(self.sample_fraction * stream_length))

    @property
    def uses_alpha(self) -> bool:
        return self.scenario is Scenario.DATA_AND_WORKLOAD or self.query_kind in (
            QueryKind.ZIPF_EDGES,
            QueryKind.ZIPF_SUBGRAPHS,
        )


@dataclass
class BenchmarkInputs:
    """Budget-independent inputs shared by every budget point."""

    oracle: ExactOracle
    sample: DataSample
    weights: WorkloadWeights | None
    queries: list = field(default_factory=list)


def withhold_vertices(sample: DataSample, fraction: float, seed: int) -> DataSample:
    """Drop every element of a seeded random fraction of the sample's source vertices."""
    if fraction <= 0:
        return sample
    sources = sorted(sample.source_vertices)
    count = round(fraction * len(sources))
    picks = np.random.default_rng(seed).choice(len(sources), size=count, replace=False)
    withheld = {sources[int(i)] for i in picks}
    logger.info(f'Withholding {len(withheld)} of {len(sources)} sampled source vertices')
    return DataSample(tuple(e for e in sample if e.src not in withheld), sample.capacity)


def prepare_inputs(stream: Sequence[StreamElement], spec: BenchmarkSpec) -> BenchmarkInputs:
    oracle = ExactOracle.from_stream(stream)
    sample = reservoir_sample(stream, spec.resolved_sample_size(len(stream)), derive_seed(spec.seed, 'sample'))
    sample = withhold_vertices(sample, spec.withhold_fraction, derive_seed(spec.seed, 'withhold'))

    rank_seed = derive_seed(spec.seed, 'zipf-rank')
    weights = None
    if spec.scenario is Scenario.DATA_AND_WORKLOAD:
        edges = oracle.distinct_edges
        size = spec.workload_size if spec.workload_size is not None else min(spec.query_count, len(edges))
        workload = generate_zipf_workload(
            edges, spec.workload_alpha, size, derive_seed(spec.seed, 'workload'), rank_seed=rank_seed
        )
        weights = compute_workload_weights(workload, sample.source_vertices)

    queries = generate_queries(
        oracle,
        spec.query_kind,
        spec.query_count,
        derive_seed(spec.seed, 'queries'),
        alpha=spec.workload_alpha,
        rank_seed=rank_seed,
        subgraph_edges=spec.subgraph_edges,
    )
    return BenchmarkInputs(oracle, sample, weights, queries)


@dataclass
class QueryEvaluation:
    errors: list[Fraction]
    seconds_per_query: float
    outlier_errors: list[Fraction]


def _guard(estimate, truth, engine_name: str, query) -> None:
    if estimate < truth:
        raise UnderestimateError(
            f'{engine_name} estimated {estimate} below the true {truth}',
            processing_stage='evaluate_queries',
            context={'engine': engine_name, 'query': repr(query)},
        )


def evaluate_queries(
    engine: SketchEngine, engine_name: str, oracle: ExactOracle, queries: Sequence, kind: QueryKind
) -> QueryEvaluation:
    """Score every query against the oracle.

    Raises:
        UnderestimateError: If any answer falls below the truth
    """
    started = time.perf_counter()
    if kind.is_subgraph:
        answers = [[engine.estimate_edge(src, dst) for src, dst in query.edges] for query in queries]
    else:
        answers = [engine.estimate_edge(src, dst) for src, dst in queries]
    elapsed = time.perf_counter() - started

    errors: list[Fraction] = []
    outlier_errors: list[Fraction] = []
    routed = engine.is_routed if isinstance(engine, PartitionedSketchEngine) else None
    for query, answer in zip(queries, answers, strict=True):
        if kind.is_subgraph:
            truths = [oracle.truth(src, dst) for src, dst in query.edges]
            _guard(query.aggregate.apply(answer), query.aggregate.apply(truths), engine_name, query)
            errors.append(subgraph_relative_error(answer, truths, query.aggregate))
            continue
        src, dst = query
        truth = oracle.truth(src, dst)
        _guard(answer, truth, engine_name, (label_text(src), label_text(dst)))
        error = relative_error(answer, truth)
        errors.append(error)
        if routed is not None and not routed(src):
            outlier_errors.append(error)
    return QueryEvaluation(errors, elapsed / max(1, len(queries)), outlier_errors)


def _report(
    engine_name: str,
    spec: BenchmarkSpec,
    budget: int,
    evaluation: QueryEvaluation,
    construct_seconds: float,
    with_outliers: bool,
) -> MetricsReport:
    g0 = Fraction(str(spec.g0))
    outlier_avg = None
    outlier_count = None
    if with_outliers:
        outlier_count = len(evaluation.outlier_errors)
        outlier_avg = average_relative_error(evaluation.outlier_errors) if outlier_count else None
    return MetricsReport(
        engine=engine_name,
        scenario=spec.scenario.value,
        budget_bytes=budget,
        alpha=spec.workload_alpha if spec.uses_alpha else None,
        avg_relative_error=average_relative_error(evaluation.errors),
        effective_count=effective_queries(evaluation.errors, g0),
        query_count=len(evaluation.errors),
        g0=g0,
        t_construct_s=construct_seconds,
        t_query_s=evaluation.seconds_per_query,
        seed=spec.seed,
        query_kind=spec.query_kind.value,
        outlier_avg_rel_err=outlier_avg,
        outlier_query_count=outlier_count,
    )


def run_budget_point(
    stream: Sequence[StreamElement], inputs: BenchmarkInputs, spec: BenchmarkSpec, budget: int
) -> list[MetricsReport]:
    """Build, ingest and score both engines at one byte budget."""
    config = PartitionConfig.from_byte_budget(
        budget,
        spec.depth,
        min_width=spec.min_width,
        collision_constant=spec.collision_constant,
        outlier_fraction=spec.outlier_fraction,
        scenario=spec.scenario,
    )

    started = time.perf_counter()
    plan = build_plan(inputs.sample, config, inputs.weights)
    engine = PartitionedSketchEngine.build(plan, derive_seed(spec.seed, 'engine'))
    engine.ingest_many(stream)
    engine.freeze()
    partitioned_construct = time.perf_counter() - started

    started = time.perf_counter()
    baseline = GlobalSketchEngine.build(budget, spec.depth, derive_seed(spec.seed, 'engine'))
    baseline.ingest_many(stream)
    baseline.freeze()
    global_construct = time.perf_counter() - started

    with_outliers = spec.withhold_fraction > 0 and not spec.query_kind.is_subgraph
    reports = [
        _report(
            PARTITIONED,
            spec,
            budget,
            evaluate_queries(engine, PARTITIONED, inputs.oracle, inputs.queries, spec.query_kind),
            partitioned_construct,
            with_outliers,
        ),
        _report(
            GLOBAL,
            spec,
            budget,
            evaluate_queries(baseline, GLOBAL, inputs.oracle, inputs.queries, spec.query_kind),
            global_construct,
            False,
        ),
    ]
    logger.info(
        f'Budget {budget}: partitioned avg error {float(reports[0].avg_relative_error):.4f}, '
        f'global {float(reports[1].avg_relative_error):.4f} over {reports[0].query_count} queries'
    )
    return reports


def run_benchmark(stream: Sequence[StreamElement], spec: BenchmarkSpec) -> list[MetricsReport]:
    """Run every budget point; two reports per budget, partitioned first.

    With ``spec.workers > 1`` budget points run in separate processes. Each point
    derives its seeds from ``spec.seed`` alone, so results match a sequential run.
    """
    stream = list(stream)
    inputs = prepare_inputs(stream, spec)
    if not inputs.queries:
        logger.warning('Query set is empty; nothing to report')
        return []

    point = partial(run_budget_point, stream, inputs, spec)
    if spec.workers > 1 and len(spec.budgets) > 1:
        with ProcessPoolExecutor(max_workers=min(spec.workers, len(spec.budgets))) as executor:
            results = list(executor.map(point, spec.budgets))
    else:
        results = [point(budget) for budget in spec.budgets]
    return [report for reports in results for report in reports]


def run_alpha_sweep(
    stream: Sequence[StreamElement], spec: BenchmarkSpec, alphas: Sequence[float]
) -> list[MetricsReport]:
    """Rerun the workload scenario once per skew value; one row group per alpha."""
    if spec.scenario is not Scenario.DATA_AND_WORKLOAD:
        logger.warning('Alpha sweep requested without a workload; switching to the workload scenario')
    reports = []
    for alpha in alphas:
        reports.extend(
            run_benchmark(stream, replace(spec, scenario=Scenario.DATA_AND_WORKLOAD, workload_alpha=alpha))
        )
    return reports


@handle_storage_errors
def write_report_csv(path: str | Path, reports: Sequence[MetricsReport]) -> None:
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS, lineterminator='\n')
        writer.writeheader()
        for report in reports:
            writer.writerow(report.to_row())
    logger.info(f'Wrote {len(reports)} report rows to {path}')

