"""
Round-complexity sweeps.

Every cell is one (family, n, seed) gossip run. Its total round count is
normalized by n lg^2 n max(1, lg lg n); a sweep passes when every run is
complete, the largest ratio stays within the frozen baseline, and the ratio
does not grow from the smallest n to the largest.
"""
import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import repeat
from typing import Dict, Iterable, List, Optional, Sequence

from config import SimulationConfig
from gossip_protocol import GossipSession
from topology_generator import TopologySpec, gen_topology
from verification import check_run

logger = logging.getLogger(__name__)

BENCH_FAMILIES = ('path', 'grid', 'random-connected')
CSV_FIELDS = ('spec', 'family', 'seed', 'broadcast', 'n', 'N', 'stage1', 'stage2', 'stage3', 'stage4',
              'total', 'token_passes', 'ratio')


class BenchFailure(Exception):
    def __init__(self, message: str, spec: Optional[TopologySpec] = None):
        super().__init__(message)
        self.spec = spec
        self.seed = spec.seed if spec is not None else None


def scaling_denominator(n: int) -> float:
    lg = math.log2(n)
    return n * lg * lg * max(1.0, math.log2(lg))


@dataclass(frozen=True)
class BenchRecord:
    spec: str
    family: str
    seed: int
    broadcast: str
    n: int
    N: int
    stage1: int
    stage2: int
    stage3: int
    stage4: int
    total: int
    token_passes: int
    ratio: float

    @property
    def sort_key(self):
        return self.n, self.family, self.seed

    def to_row(self) -> Dict[str, object]:
        row = asdict(self)
        row['ratio'] = f"{self.ratio:.6f}"
        return row


def bench_cell(spec: TopologySpec, config: SimulationConfig) -> BenchRecord:
    """Run and check one cell; raises BenchFailure on any oracle violation"""
    if spec.n < 2:
        raise BenchFailure(f"bench cells need n >= 2, got {spec.n}", spec)
    topology = gen_topology(spec)
    try:
        result = GossipSession(topology, config).run()
    except Exception as e:
        raise BenchFailure(f"{spec.name} n={spec.n} seed={spec.seed}: {e}", spec) from e
    verdict = check_run(topology, result)
    if not verdict.valid:
        raise BenchFailure(f"{spec.name} n={spec.n} seed={spec.seed}: {'; '.join(verdict.violations)}", spec)
    return BenchRecord(
        spec=spec.digest(),
        family=spec.name,
        seed=spec.seed,
        broadcast=config.broadcast,
        n=topology.n,
        N=topology.N,
        stage1=result.stage1,
        stage2=result.stage2,
        stage3=result.stage3,
        stage4=result.stage4,
        total=result.total,
        token_passes=result.token_passes,
        ratio=result.total / scaling_denominator(topology.n),
    )


def bench_specs(ns: Iterable[int], c: int, seeds: Iterable[int],
                families: Sequence[str] = BENCH_FAMILIES) -> List[TopologySpec]:
    seeds = list(seeds)
    return [
        TopologySpec(family, n, c=c, label_mode='random', seed=seed, p=min(1.0, 4.0 / n))
        for n in ns
        for family in families
        for seed in seeds
    ]


@dataclass
class BenchSummary:
    records: List[BenchRecord]
    max_ratio: float
    baseline: Optional[float] = None
    within_baseline: bool = True
    trend_ok: bool = True
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.within_baseline and self.trend_ok


def _mean_ratio(records: Sequence[BenchRecord], n: int) -> float:
    ratios = [r.ratio for r in records if r.n == n]
    return sum(ratios) / len(ratios)


def _baseline_key(config: SimulationConfig, c: int) -> str:
    return f"{config.broadcast}:c{c}:crb{config.c_rb}"


def load_baselines(path: str) -> Dict[str, float]:
    if not path or not os.path.exists(path):
        return {}
    with open(path, 'r', encoding='utf-8') as handle:
        return json.load(handle)


def save_baselines(path: str, baselines: Dict[str, float]):
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(baselines, handle, indent=2, sort_keys=True)
        handle.write('\n')


def write_records(records: Iterable[BenchRecord], out: str):
    with open(out, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.DictWriter(handle, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for record in records:
            writer.writerow(record.to_row())


def summarize(records: List[BenchRecord], config: SimulationConfig, c: int) -> BenchSummary:
    """Compare a sweep against the frozen baseline, recording one if none exists"""
    max_ratio = max(r.ratio for r in records)
    summary = BenchSummary(records, max_ratio)

    sizes = sorted({r.n for r in records})
    smallest, largest = _mean_ratio(records, sizes[0]), _mean_ratio(records, sizes[-1])
    if largest > (1 + config.trend_slack) * smallest:
        summary.trend_ok = False
        summary.notes.append(f"ratio grows from {smallest:.3f} at n={sizes[0]} to {largest:.3f} at n={sizes[-1]}")

    baselines = load_baselines(config.baseline_path)
    key = _baseline_key(config, c)
    if key in baselines:
        summary.baseline = baselines[key]
        cap = (1 + config.ratio_slack) * summary.baseline
        if max_ratio > cap:
            summary.within_baseline = False
            summary.notes.append(f"max ratio {max_ratio:.3f} exceeds baseline cap {cap:.3f}")
    elif summary.trend_ok and config.baseline_path:
        baselines[key] = max_ratio
        save_baselines(config.baseline_path, baselines)
        summary.baseline = max_ratio
        summary.notes.append(f"recorded baseline {max_ratio:.6f} for {key}")
        logger.info(f"Froze baseline {max_ratio:.6f} for {key} in {config.baseline_path}")
    return summary


def bench_suite(ns: Sequence[int], c: int, broadcast: str, seeds: Sequence[int],
                out: Optional[str] = None, config: Optional[SimulationConfig] = None,
                families: Sequence[str] = BENCH_FAMILIES) -> BenchSummary:
    """
    Run a scaling sweep

    Args:
        ns: Network sizes, each at least 2
        c: Label exponent
        broadcast: Broadcast kind used by every cell
        seeds: Seeds per (family, n)
        out: Optional CSV path for the records
        config: Base settings; workers > 1 runs cells in a process pool
        families: Topology families to sweep

    Returns:
        BenchSummary with the records sorted by (n, family, seed)
    """
    config = (config or SimulationConfig()).replace(broadcast=broadcast, record_trace=False)
    specs = bench_specs(ns, c, seeds, families)
    logger.info(f"Benchmarking {len(specs)} cells with {broadcast} broadcast on {config.workers} worker(s)")

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            records = list(executor.map(bench_cell, specs, repeat(config)))
    else:
        records = [bench_cell(spec, config) for spec in specs]
    records.sort(key=lambda r: r.sort_key)

    if out:
        write_records(records, out)
    summary = summarize(records, config, c)
    logger.info(f"Sweep max ratio {summary.max_ratio:.4f}, passed={summary.passed}")
    return summary
