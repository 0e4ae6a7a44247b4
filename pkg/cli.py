import json
import logging
import sys
from typing import Optional

import click

from benchmark import BenchFailure, bench_suite
from config import BROADCAST_KINDS, HELPER_VARIANTS, SimulationConfig
from gossip_protocol import GossipError, GossipSession
from radio_engine import Topology, TopologyError, load_topology
from selective_family import (
    SIZE_SWEEP, SelectiveFamilyBuilder, SelectiveFamilyError, load_family, size_tracking, verify_selective,
)
from topology_generator import FAMILIES, LABEL_MODES, TopologySpec, TopologySpecError, gen_topology
from verification import (
    CORPUS_SIZES, check_determinism, check_run, estimate_equivalence, verification_corpus, verify_corpus,
)

logger = logging.getLogger(__name__)


def _config(**overrides) -> SimulationConfig:
    try:
        return SimulationConfig.from_env().replace(**overrides)
    except ValueError as e:
        raise click.UsageError(str(e))


def _spec_options(command):
    options = [
        click.option('--family', type=click.Choice(FAMILIES), default='path', show_default=True),
        click.option('--n', 'n', type=int, default=8, show_default=True, help='Node count'),
        click.option('--c', 'c', type=int, default=2, show_default=True, help='Labels come from [1..n^c]'),
        click.option('--label-mode', type=click.Choice(LABEL_MODES), default='consecutive', show_default=True),
        click.option('--seed', type=int, default=0, show_default=True),
        click.option('--p', 'p', type=float, default=0.1, show_default=True, help='Edge probability (random-connected)'),
        click.option('--width', type=int, default=None, help='Grid width'),
        click.option('--height', type=int, default=None, help='Grid height'),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _build_spec(family, n, c, label_mode, seed, p, width, height) -> TopologySpec:
    try:
        return TopologySpec(family, n, c=c, label_mode=label_mode, seed=seed, p=p, width=width, height=height)
    except TopologySpecError as e:
        raise click.UsageError(str(e))


@click.group(name='gossip')
@click.option('--log-level', default='WARNING', show_default=True, help='Python logging level')
def gossip_cli(log_level: str):
    """Deterministic radio-network gossip simulator"""
    logging.getLogger().setLevel(log_level.upper())


@gossip_cli.command('gen')
@_spec_options
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Write the topology file here')
def gen_command(family, n, c, label_mode, seed, p, width, height, out):
    """Generate a connected labeled topology"""
    spec = _build_spec(family, n, c, label_mode, seed, p, width, height)
    try:
        topology = gen_topology(spec)
    except (TopologySpecError, TopologyError) as e:
        raise click.UsageError(str(e))
    if out:
        with open(out, 'w', encoding='utf-8') as handle:
            handle.write(topology.to_text())
        click.echo(f"wrote {spec.name} n={topology.n} D={topology.diameter} to {out}")
    else:
        click.echo(topology.to_text(), nl=False)


def _load_or_generate(topology_path: Optional[str], spec: TopologySpec) -> Topology:
    try:
        return load_topology(topology_path) if topology_path else gen_topology(spec)
    except (TopologySpecError, TopologyError, OSError) as e:
        raise click.UsageError(str(e))


@gossip_cli.command('run')
@click.option('--topology', 'topology_path', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Topology file; overrides the generator options')
@_spec_options
@click.option('--broadcast', type=click.Choice(BROADCAST_KINDS), default=None)
@click.option('--c-rb', default=None, help='Oracle accounting constant, a rational such as 1 or 3/2')
@click.option('--helper-variant', type=click.Choice(HELPER_VARIANTS), default=None)
@click.option('--trace', 'trace_path', type=click.Path(dir_okay=False), default=None,
              help='Write the round-by-round trace as JSON lines')
def run_command(topology_path, family, n, c, label_mode, seed, p, width, height,
                broadcast, c_rb, helper_variant, trace_path):
    """Run one gossip simulation and check it"""
    topology = _load_or_generate(topology_path, _build_spec(family, n, c, label_mode, seed, p, width, height))
    config = _config(broadcast=broadcast, c_rb=c_rb, helper_variant=helper_variant,
                     record_trace=True if trace_path else None)
    try:
        result = GossipSession(topology, config).run()
    except GossipError as e:
        click.echo(f"gossip failed: {e}", err=True)
        sys.exit(1)

    verdict = check_run(topology, result, traces=bool(trace_path))
    if trace_path:
        result.trace.write(trace_path)
    record = dict(result.summary(), n=topology.n, N=topology.N, broadcast=config.broadcast,
                  valid=verdict.valid, violations=verdict.violations)
    click.echo(json.dumps(record, sort_keys=True))
    sys.exit(0 if verdict.valid else 1)


@gossip_cli.command('verify')
@click.option('--sizes', default=','.join(str(n) for n in CORPUS_SIZES), show_default=True,
              help='Comma-separated network sizes')
@click.option('--broadcast', 'kinds', multiple=True, type=click.Choice(BROADCAST_KINDS),
              help='Broadcast kinds (default: all)')
@click.option('--traces/--no-traces', default=False, help='Replay traces through the collision checker')
@click.option('--estimate-cases', type=int, default=0, help='Randomized estimate cases to add')
@click.option('--determinism/--no-determinism', default=False, help='Replay a few instances twice')
def verify_command(sizes, kinds, traces, estimate_cases, determinism):
    """Run the verification corpus through every oracle"""
    config = _config()
    try:
        ns = [int(x) for x in sizes.split(',') if x.strip()]
    except ValueError:
        raise click.UsageError(f"--sizes must be comma-separated integers, got '{sizes}'")
    specs = verification_corpus(config, ns)
    report = verify_corpus(specs, config, kinds or BROADCAST_KINDS, traces=traces)
    failed = not report.passed
    for failure in report.failures:
        click.echo(f"FAIL {failure.spec.name} n={failure.spec.n} {failure.spec.label_mode} "
                   f"seed={failure.spec.seed} [{failure.broadcast}]: {'; '.join(failure.violations)}")
    click.echo(f"corpus: {report.instances} runs, {len(report.failures)} failures")

    if estimate_cases:
        verdict = estimate_equivalence(estimate_cases, seed=config.selector_seed)
        click.echo(f"estimate oracle: {estimate_cases} cases, {len(verdict.violations)} mismatches")
        failed = failed or not verdict.valid

    if determinism:
        for spec in specs[:: max(1, len(specs) // 10)]:
            verdict = check_determinism(gen_topology(spec), config)
            if not verdict.valid:
                click.echo(f"FAIL determinism {spec.name} n={spec.n}: {verdict.violations[0]}")
                failed = True
    sys.exit(1 if failed else 0)


@gossip_cli.command('bench')
@click.option('--n', 'ns', type=int, multiple=True, help='Network sizes (repeatable)')
@click.option('--c', 'c', type=int, default=2, show_default=True)
@click.option('--broadcast', type=click.Choice(BROADCAST_KINDS), default='oracle', show_default=True)
@click.option('--seeds', type=int, default=3, show_default=True, help='Seeds per (family, n)')
@click.option('--c-rb', default=None)
@click.option('--workers', type=int, default=None)
@click.option('--baseline', 'baseline_path', default=None, help='Frozen ratio baseline (JSON)')
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='CSV output')
def bench_command(ns, c, broadcast, seeds, c_rb, workers, baseline_path, out):
    """Measure total rounds against n lg^2 n lg lg n"""
    ns = list(ns) or [8, 16, 32, 64]
    if min(ns) < 2:
        raise click.UsageError("bench sizes must be at least 2")
    config = _config(c_rb=c_rb, workers=workers, baseline_path=baseline_path)
    try:
        summary = bench_suite(ns, c, broadcast, range(seeds), out=out, config=config)
    except BenchFailure as e:
        click.echo(f"bench aborted (seed {e.seed}): {e}", err=True)
        sys.exit(1)
    for record in summary.records:
        click.echo(f"{record.family:24s} n={record.n:4d} seed={record.seed} total={record.total} "
                   f"ratio={record.ratio:.4f}")
    for note in summary.notes:
        click.echo(note)
    click.echo(f"max ratio {summary.max_ratio:.4f}, baseline {summary.baseline}, passed={summary.passed}")
    sys.exit(0 if summary.passed else 1)


@gossip_cli.group('family')
def family_group():
    """Build and verify selective families"""


@family_group.command('build')
@click.option('--k', 'k', type=int, required=True)
@click.option('--N', 'N', type=int, required=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', type=click.Path(dir_okay=False), default=None)
def family_build(k, N, seed, out):
    """Construct a (k, N)-selective family"""
    builder = SelectiveFamilyBuilder.from_config(_config())
    try:
        family = builder.build(k, N, seed)
    except (SelectiveFamilyError, ValueError) as e:
        raise click.UsageError(str(e))
    if out:
        with open(out, 'w', encoding='utf-8') as handle:
            handle.write(family.to_text())
        click.echo(f"wrote {family!r} to {out}")
    else:
        click.echo(family.to_text(), nl=False)


@family_group.command('sizes')
@click.option('--instance', 'instances', multiple=True, metavar='K,N',
              help='Sweep instance, smallest first (repeatable)')
@click.option('--seed', type=int, default=0, show_default=True)
def family_sizes(instances, seed):
    """Report family sizes against f * k * lg(2N/k), f taken from the first instance"""
    try:
        sweep = [tuple(int(x) for x in item.split(',')) for item in instances] or list(SIZE_SWEEP)
        if any(len(pair) != 2 for pair in sweep):
            raise ValueError
    except ValueError:
        raise click.UsageError("--instance takes K,N")
    builder = SelectiveFamilyBuilder.from_config(_config())
    try:
        report = size_tracking(sweep, seed=seed, builder=builder)
    except (SelectiveFamilyError, ValueError) as e:
        raise click.UsageError(str(e))
    click.echo(f"f = {report.f:.4f}")
    for row in report.rows:
        mark = '' if row.within else '  over'
        click.echo(f"k={row.k:3d} N={row.N:5d} {row.method:8s} size={row.size:5d} "
                   f"bound={row.bound:8.1f} ratio={row.ratio:.2f}{mark}")


@family_group.command('verify')
@click.argument('path', type=click.Path(exists=True, dir_okay=False))
@click.option('--k', 'k', type=int, default=None, help='Check selectivity for this k instead of the header')
@click.option('--mode', type=click.Choice(('exhaustive', 'sampled')), default='exhaustive', show_default=True)
@click.option('--trials', type=int, default=None)
@click.option('--seed', type=int, default=0)
def family_verify(path, k, mode, trials, seed):
    """Check a family file for selectivity"""
    config = _config()
    try:
        family = load_family(path)
        verdict = verify_selective(family, mode=mode, trials=trials or config.sample_trials, seed=seed,
                                   cap=config.exhaustive_cap, k=k)
    except SelectiveFamilyError as e:
        raise click.UsageError(str(e))
    if verdict.valid:
        click.echo(f"valid ({verdict.mode}, {verdict.checked} subsets checked)")
        sys.exit(0)
    click.echo(f"invalid: counterexample {list(verdict.counterexample)}")
    sys.exit(1)


if __name__ == '__main__':
    gossip_cli()
