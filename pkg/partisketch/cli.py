"""Command-line front door: generate, plan, ingest, query, bench and inspect."""

import argparse
import logging
import sys
from collections.abc import Sequence
from fractions import Fraction
from pathlib import Path

from partisketch.benchmark import BenchmarkSpec, run_alpha_sweep, run_benchmark, write_report_csv
from partisketch.config import Config
from partisketch.config_manager import get_config_manager, load_config_file
from partisketch.countmin import SketchDims
from partisketch.engine import Aggregate, GlobalSketchEngine, PartitionedSketchEngine, SubgraphQuery
from partisketch.error_handling import PartiSketchError, handle_storage_errors
from partisketch.generators import QueryKind, RmatParams, generate_rmat_stream
from partisketch.logging_config import setup_logging
from partisketch.partitioner import PartitionConfig, PartitionPlan, Scenario, build_plan, verify_collision_bound
from partisketch.seeds import derive_seed
from partisketch.snapshot import detect_kind, load_plan, load_snapshot, save_plan, save_snapshot
from partisketch.stream import (
    Edge,
    as_label,
    compute_vertex_stats,
    compute_workload_weights,
    label_text,
    parse_stream_line,
    read_stream,
    reservoir_sample,
    write_stream,
)
from partisketch.version import get_version

logger = logging.getLogger(__name__)


def _pick(value, default):
    return default if value is None else value


def _csv_list(cast):
    def parse(text: str) -> list:
        try:
            return [cast(part) for part in text.split(',') if part.strip()]
        except ValueError as e:
            raise argparse.ArgumentTypeError(f'invalid list {text!r}: {e}') from e

    return parse


def _out(line: str) -> None:
    sys.stdout.write(line + '\n')


def _number(value: int | Fraction) -> str:
    # averages are exact rationals; print those as decimals
    if isinstance(value, Fraction) and value.denominator != 1:
        return f'{float(value):.6f}'
    return str(int(value))


def cmd_generate(args: argparse.Namespace) -> int:
    config = Config()
    a, b, c, d = config.RMAT_PROBABILITIES
    params = RmatParams(
        scale=_pick(args.scale, config.RMAT_SCALE),
        edge_count=_pick(args.edges, config.RMAT_EDGES),
        a=_pick(args.a, a),
        b=_pick(args.b, b),
        c=_pick(args.c, c),
        d=_pick(args.d, d),
        seed=args.seed,
        max_freq=_pick(args.max_freq, config.RMAT_MAX_FREQ),
    )
    stream = generate_rmat_stream(params, args.freq_zipf_alpha, args.edge_freq_spread)
    count = write_stream(args.output, stream)
    _out(f'elements\t{count}')
    return 0


def _sketch_dims(args: argparse.Namespace) -> SketchDims:
    if args.epsilon is not None:
        if args.delta is None or args.depth is not None:
            args.parser.error('--epsilon needs --delta and excludes --depth')
        return SketchDims.from_error_bounds(args.epsilon, args.delta)
    if args.delta is not None:
        args.parser.error('--delta is only valid with --epsilon')
    return SketchDims.from_byte_budget(args.budget_bytes, _pick(args.depth, Config().DEPTH))


def _partition_config(args: argparse.Namespace, dims: SketchDims) -> PartitionConfig:
    config = Config()
    return PartitionConfig(
        total_width=dims.width,
        depth=dims.depth,
        min_width=_pick(args.w0, config.MIN_WIDTH),
        collision_constant=_pick(args.collision_constant, config.COLLISION_CONSTANT),
        outlier_fraction=_pick(args.outlier_fraction, config.OUTLIER_FRACTION),
        scenario=Scenario(args.scenario),
    )


def _print_plan_summary(plan: PartitionPlan) -> None:
    _out(f'leaves\t{len(plan.leaves)}')
    _out(f'vertices\t{len(plan.routing)}')
    _out(f'depth\t{plan.depth}')
    _out(f'total_width\t{plan.total_width}')
    _out(f'leaf_width\t{plan.leaf_width_sum}')
    _out(f'outlier_width\t{plan.outlier_width}')
    _out(f'freed_width\t{plan.freed_width}')


def cmd_plan(args: argparse.Namespace) -> int:
    scenario = Scenario(args.scenario)
    if (scenario is Scenario.DATA_AND_WORKLOAD) != (args.workload is not None):
        args.parser.error('--workload is required with --scenario workload and not allowed otherwise')
    dims = _sketch_dims(args)
    _out(f'dims\t{dims.width}x{dims.depth}')
    config = _partition_config(args, dims)

    stream = read_stream(args.stream)
    sample_size = _pick(args.sample_size, max(1, round(Config().SAMPLE_FRACTION * len(stream))))
    sample = reservoir_sample(stream, sample_size, derive_seed(args.seed, 'sample'))
    weights = None
    if scenario is Scenario.DATA_AND_WORKLOAD:
        weights = compute_workload_weights(read_stream(args.workload), compute_vertex_stats(sample).vertices)

    plan = build_plan(sample, config, weights)
    save_plan(args.output, plan)
    _print_plan_summary(plan)
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    plan = load_plan(args.plan)
    stream = read_stream(args.stream)
    engine = PartitionedSketchEngine.build(plan, derive_seed(args.seed, 'engine'))
    engine.ingest_many(stream)
    engine.freeze()

    global_engine = None
    if args.with_global:
        budget = plan.total_width * 8 * plan.depth
        global_engine = GlobalSketchEngine.build(budget, plan.depth, derive_seed(args.seed, 'engine'))
        global_engine.ingest_many(stream)
        global_engine.freeze()

    save_snapshot(args.output, engine, global_engine)
    _out(f'ingested_mass\t{engine.ingested_mass}')
    return 0


@handle_storage_errors
def read_query_file(path: str | Path, subgraphs: bool) -> list[list[Edge]]:
    """Read edge queries, or blank-line separated subgraph blocks.

    Each query line uses the stream format; only ``src`` and ``dst`` are used.
    Edge queries come back as one-edge blocks.
    """
    path = Path(path)
    blocks: list[list[Edge]] = [[]]
    with open(path, 'rb') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                if subgraphs and blocks[-1]:
                    blocks.append([])
                continue
            element = parse_stream_line(path, line_number, line, operation='read_queries')
            if subgraphs:
                blocks[-1].append(element.edge)
            else:
                blocks.append([element.edge])
    return [block for block in blocks if block]


def cmd_query(args: argparse.Namespace) -> int:
    if (args.queries is None) == (not args.edge):
        args.parser.error('give either --queries or at least one --edge')
    snapshot = load_snapshot(args.snapshot)
    if args.engine == 'global':
        if snapshot.global_engine is None:
            args.parser.error(f'{args.snapshot} holds no global sketch; ingest with --with-global')
        engine = snapshot.global_engine
    else:
        engine = snapshot.engine
    engine.freeze()

    if args.edge:
        blocks = [[(as_label(src), as_label(dst))] for src, dst in args.edge]
    else:
        blocks = read_query_file(args.queries, args.subgraphs)

    aggregate = Aggregate(args.aggregate)
    for index, block in enumerate(blocks):
        if args.subgraphs:
            value = engine.estimate_subgraph(SubgraphQuery(tuple(block), aggregate))
            _out(f'{index}\t{aggregate.value}\t{_number(value)}')
        else:
            src, dst = block[0]
            _out(f'{label_text(src)}\t{label_text(dst)}\t{engine.estimate_edge(src, dst)}')
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    overrides = {
        'budgets': args.budgets,
        'depth': args.depth,
        'sample_size': args.sample_size,
        'sample_fraction': args.sample_fraction,
        'scenario': args.scenario,
        'workload_alpha': args.workload_alpha,
        'workload_size': args.workload_size,
        'query_kind': args.query_kind,
        'query_count': args.query_count,
        'g0': args.g0,
        'min_width': args.w0,
        'collision_constant': args.collision_constant,
        'outlier_fraction': args.outlier_fraction,
        'withhold_fraction': args.withhold_fraction,
        'workers': args.workers,
        'seed': args.seed,
    }
    spec = BenchmarkSpec.from_config(**overrides)
    stream = read_stream(args.stream)
    if args.alpha_sweep:
        reports = run_alpha_sweep(stream, spec, args.alpha_sweep)
    else:
        reports = run_benchmark(stream, spec)
    write_report_csv(args.output, reports)

    echo = {
        'bench': {
            'budgets': list(spec.budgets),
            'g0': spec.g0,
            'sample_fraction': spec.sample_fraction,
            'query_count': spec.query_count,
            'workload_alpha': spec.workload_alpha,
        },
        'sketch': {'depth': spec.depth},
        'partition': {
            'min_width': spec.min_width,
            'collision_constant': spec.collision_constant,
            'outlier_fraction': spec.outlier_fraction,
        },
        'run': {
            'scenario': spec.scenario.value,
            'query_kind': spec.query_kind.value,
            'seed': spec.seed,
            'withhold_fraction': spec.withhold_fraction,
            'alpha_sweep': list(args.alpha_sweep or []),
        },
    }
    get_config_manager().dump(f'{args.output}.config.toml', echo)
    _out(f'rows\t{len(reports)}')
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    kind = detect_kind(args.path)
    _out(f'kind\t{kind}')
    if kind == 'plan':
        plan = load_plan(args.path)
    else:
        snapshot = load_snapshot(args.path)
        plan = snapshot.plan
        for name, sketch in snapshot.engine.sketches.items():
            _out(f'sketch\t{name}\t{sketch.width}x{sketch.depth}\tmass={sketch.total_mass}')
        if snapshot.global_engine is not None:
            sketch = snapshot.global_engine.sketch
            _out(f'sketch\tglobal\t{sketch.width}x{sketch.depth}\tmass={sketch.total_mass}')
    _print_plan_summary(plan)

    if plan.config is not None:
        for report in verify_collision_bound(plan, None, plan.config.collision_constant):
            status = 'pass' if report.passed else 'FAIL'
            _out(
                f'collision_bound\tleaf-{report.leaf_id}\t{status}\tbound={float(report.bound):.4f}'
                f'\tload={float(report.load_factor):.4f}'
            )
    return 0


def _add_partition_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--w0', type=int, help='minimum leaf width')
    parser.add_argument('--collision-constant', type=float, help='collision bound constant C in (0, 1)')
    parser.add_argument('--outlier-fraction', type=float, help='share of the width kept for the outlier sketch')
    parser.add_argument('--scenario', choices=[s.value for s in Scenario], default=Scenario.DATA_ONLY.value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='partisketch', description='Partitioned CountMin sketches for graph streams')
    parser.add_argument('--config', help='TOML file supplying defaults for flags')
    parser.add_argument('--log-level', help='DEBUG, INFO, WARNING or ERROR')
    parser.add_argument('--version', action='version', version=f'%(prog)s {get_version()}')
    sub = parser.add_subparsers(dest='command', required=True)

    generate = sub.add_parser('generate', help='write a synthetic R-MAT stream')
    generate.add_argument('--output', required=True)
    generate.add_argument('--scale', type=int)
    generate.add_argument('--edges', type=int)
    for quadrant in ('a', 'b', 'c', 'd'):
        generate.add_argument(f'--{quadrant}', type=float)
    generate.add_argument('--freq-zipf-alpha', type=float)
    generate.add_argument('--edge-freq-spread', type=int)
    generate.add_argument('--max-freq', type=int)
    generate.add_argument('--seed', type=int, default=0)
    generate.set_defaults(handler=cmd_generate, parser=generate)

    plan = sub.add_parser('plan', help='sample a stream and write a partition plan')
    plan.add_argument('--stream', required=True)
    plan.add_argument('--output', required=True)
    plan.add_argument('--sample-size', type=int)
    sizing = plan.add_mutually_exclusive_group(required=True)
    sizing.add_argument('--budget-bytes', type=int)
    sizing.add_argument('--epsilon', type=float)
    plan.add_argument('--depth', type=int)
    plan.add_argument('--delta', type=float)
    _add_partition_flags(plan)
    plan.add_argument('--workload', help='workload sample in stream format')
    plan.add_argument('--seed', type=int, default=0)
    plan.set_defaults(handler=cmd_plan, parser=plan)

    ingest = sub.add_parser('ingest', help='populate sketches from a plan and a stream')
    ingest.add_argument('--plan', required=True)
    ingest.add_argument('--stream', required=True)
    ingest.add_argument('--output', required=True)
    ingest.add_argument('--with-global', action='store_true', help='also build the single-sketch baseline')
    ingest.add_argument('--seed', type=int, default=0)
    ingest.set_defaults(handler=cmd_ingest, parser=ingest)

    query = sub.add_parser('query', help='estimate edges or subgraphs from a snapshot')
    query.add_argument('--snapshot', required=True)
    query.add_argument('--queries')
    query.add_argument('--subgraphs', action='store_true', help='query file holds blank-line separated subgraphs')
    query.add_argument('--edge', nargs=2, action='append', metavar=('SRC', 'DST'))
    query.add_argument('--aggregate', choices=[a.value for a in Aggregate], default=Aggregate.SUM.value)
    query.add_argument('--engine', choices=['partitioned', 'global'], default='partitioned')
    query.set_defaults(handler=cmd_query, parser=query)

    bench = sub.add_parser('bench', help='compare partitioned and global sketches against the exact oracle')
    bench.add_argument('--stream', required=True)
    bench.add_argument('--output', required=True)
    bench.add_argument('--budgets', type=_csv_list(int))
    bench.add_argument('--depth', type=int)
    sample = bench.add_mutually_exclusive_group()
    sample.add_argument('--sample-size', type=int)
    sample.add_argument('--sample-fraction', type=float)
    bench.add_argument('--workload-alpha', type=float)
    bench.add_argument('--workload-size', type=int)
    bench.add_argument('--alpha-sweep', type=_csv_list(float))
    bench.add_argument('--query-kind', choices=[k.value for k in QueryKind])
    bench.add_argument('--query-count', type=int)
    bench.add_argument('--g0', type=float)
    bench.add_argument('--withhold-fraction', type=float)
    bench.add_argument('--workers', type=int)
    _add_partition_flags(bench)
    bench.add_argument('--seed', type=int, default=0)
    bench.set_defaults(handler=cmd_bench, parser=bench)

    inspect = sub.add_parser('inspect', help='summarize a plan file or an engine snapshot')
    inspect.add_argument('path')
    inspect.set_defaults(handler=cmd_inspect, parser=inspect)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            load_config_file(args.config)
        setup_logging(args.log_level)
        return args.handler(args)
    except PartiSketchError as e:
        logger.debug(f'Command failed: {e.to_dict()}')
        sys.stderr.write(f'partisketch {args.command}: {e}\n')
        return 1


if __name__ == '__main__':
    sys.exit(main())
