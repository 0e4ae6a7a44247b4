"""
Oracles and corpus verification.

The oracles recompute every claim from the topology directly (set arithmetic,
breadth-first search) and never call back into the protocol code they judge.
"""
import logging
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set

from broadcast import BroadcastKind
from config import SimulationConfig
from gossip_protocol import STAGE_TOKEN, GossipResult, GossipSession, token_round_bound
from primitives import (
    TWO_PLUS, ZERO_NEW, EstimateOutcome, LabelRange, PrimitiveRunner, lg_ceil, one_new, select_round_bound,
)
from radio_engine import ExecutionTrace, RadioEngine, Topology
from topology_generator import DETERMINISTIC_FAMILIES, TopologySpec, gen_topology

logger = logging.getLogger(__name__)

CORPUS_SIZES = (1, 2, 3, 4, 8, 16, 32, 64)


@dataclass
class OracleVerdict:
    valid: bool
    violations: List[str] = field(default_factory=list)

    @classmethod
    def of(cls, violations: List[str]) -> 'OracleVerdict':
        return cls(not violations, violations)

    def __bool__(self):
        return self.valid


def reachable(topology: Topology, source: int) -> Set[int]:
    """Labels reachable from `source`, by breadth-first search over the adjacency"""
    start = topology.index_of[source]
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in topology.neighbors[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return {topology.labels[i] for i in seen}


def classify_slice(topology: Topology, s: int, h: int, X: Iterable[int], Y: LabelRange) -> EstimateOutcome:
    """What an estimate must report: neighbors of s in Y, minus X and h, counted directly"""
    excluded = set(X)
    members = sorted(label for label in topology.neighbor_labels(s)
                     if label in Y and label not in excluded and label != h)
    if not members:
        return ZERO_NEW
    if len(members) == 1:
        return one_new(members[0])
    return TWO_PLUS


def oracle_estimate_check(topology: Topology, s: int, h: int, X: Iterable[int], Y: LabelRange,
                          outcome: EstimateOutcome) -> OracleVerdict:
    expected = classify_slice(topology, s, h, X, Y)
    if expected == outcome:
        return OracleVerdict(True)
    return OracleVerdict.of([f"estimate at {s} over {Y}: expected {expected}, got {outcome}"])


def oracle_select_check(topology: Topology, s: int, X: Iterable[int], found: Optional[int]) -> OracleVerdict:
    undiscovered = set(topology.neighbor_labels(s)) - set(X)
    if found is None:
        if undiscovered:
            return OracleVerdict.of([f"select at {s} found nothing but {sorted(undiscovered)} are undiscovered"])
    elif found not in undiscovered:
        return OracleVerdict.of([f"select at {s} returned {found}, not an undiscovered neighbor"])
    return OracleVerdict(True)


def oracle_gossip_check(topology: Topology, result: GossipResult) -> OracleVerdict:
    """
    Check a finished gossip run against an omniscient recomputation

    Returns:
        OracleVerdict listing every violated clause
    """
    violations = []
    everyone = frozenset(topology.labels)
    for label in topology.labels:
        missing = everyone - result.rumor_sets.get(label, frozenset())
        if missing:
            violations.append(f"node {label} is missing rumors {sorted(missing)}")
    if result.leader != topology.max_label:
        violations.append(f"leader {result.leader} is not the maximum label {topology.max_label}")
    expected_passes = 2 * (topology.n - 1)
    if result.token_passes != expected_passes:
        violations.append(f"token passed {result.token_passes} times, expected {expected_passes}")
    return OracleVerdict.of(violations)


def check_stage_accounting(topology: Topology, result: GossipResult) -> OracleVerdict:
    """Fixed-schedule arithmetic for stages 1, 2 and 4 and the stage-3 bound"""
    violations = []
    n, N = topology.n, topology.N
    if n == 1:
        if result.total != 0:
            violations.append(f"single node used {result.total} rounds")
        return OracleVerdict.of(violations)

    nb = result.primitive.nb_bound
    if result.stage1 != lg_ceil(N) * nb:
        violations.append(f"stage 1 took {result.stage1} rounds, expected {lg_ceil(N)} x {nb}")
    expected2 = 1 if result.family_size is None else 2 + result.family_size
    if result.stage2 != expected2:
        violations.append(f"stage 2 took {result.stage2} rounds, expected {expected2}")
    bound = token_round_bound(n, N)
    if result.stage3 > bound:
        violations.append(f"stage 3 took {result.stage3} rounds, bound is {bound}")
    if result.stage4 != nb:
        violations.append(f"stage 4 took {result.stage4} rounds, expected {nb}")
    return OracleVerdict.of(violations)


def check_token_ledger(topology: Topology, result: GossipResult) -> OracleVerdict:
    """DFS-tree shape, visited-set soundness and Binary-Select soundness and bounds"""
    violations = []
    ledger = result.ledger
    if ledger is None:
        return OracleVerdict.of(["no token ledger recorded"])

    visited = {result.leader}
    parent: Dict[int, int] = {}
    for p in ledger.passes:
        if p.visited != frozenset(visited):
            violations.append(f"pass {p.sender}->{p.target} carried visited {sorted(p.visited)}, "
                              f"holders so far were {sorted(visited)}")
        if not topology.are_adjacent(p.sender, p.target):
            violations.append(f"pass {p.sender}->{p.target} is not along an edge")
        if p.returning:
            if parent.get(p.sender) != p.target:
                violations.append(f"{p.sender} returned the token to {p.target}, not to its parent")
        else:
            if p.target in visited:
                violations.append(f"forward pass {p.sender}->{p.target} revisits a marked node")
            parent[p.target] = p.sender
            visited.add(p.target)
    if visited != set(topology.labels):
        violations.append(f"token never reached {sorted(set(topology.labels) - visited)}")

    cap = select_round_bound(topology.N)
    for call in ledger.selects:
        if call.rounds > cap:
            violations.append(f"select at {call.initiator} took {call.rounds} rounds, bound is {cap}")
        verdict = oracle_select_check(topology, call.initiator, call.excluded, call.found)
        violations.extend(verdict.violations)
    if topology.n > 1 and len(ledger.selects) > 2 * topology.n - 1:
        violations.append(f"{len(ledger.selects)} selects exceed one per token arrival")
    return OracleVerdict.of(violations)


def check_collision_law(topology: Topology, trace: ExecutionTrace) -> OracleVerdict:
    """
    Replay every stored round against the adjacency

    Checks half-duplex operation, that every reception comes from the unique
    transmitting neighbor, and that no listener with exactly one transmitting
    neighbor was left empty-handed.
    """
    violations = []
    for record in trace.stored_records:
        if record.oracle:
            continue
        transmitters = {label for label, _ in record.tx}
        for listener, sender in record.rx:
            if listener in transmitters:
                violations.append(f"round {record.round}: {listener} received while transmitting")
            active = [label for label in topology.neighbor_labels(listener) if label in transmitters]
            if active != [sender]:
                violations.append(f"round {record.round}: {listener} heard {sender} "
                                  f"but its transmitting neighbors were {active}")
        receivers = {listener for listener, _ in record.rx}
        for listener in record.listening:
            if listener in receivers:
                continue
            active = [label for label in topology.neighbor_labels(listener) if label in transmitters]
            if len(active) == 1:
                violations.append(f"round {record.round}: {listener} should have heard {active[0]}")
    return OracleVerdict.of(violations)


def check_single_active_neighborhood(topology: Topology, trace: ExecutionTrace,
                                     stage: str = STAGE_TOKEN) -> OracleVerdict:
    """In the token stage all transmitters of a round lie in one node's closed neighborhood"""
    violations = []
    for record in trace.stored_records:
        if record.stage != stage or not record.tx:
            continue
        common: Optional[Set[int]] = None
        for label, _ in record.tx:
            closed = set(topology.neighbor_labels(label)) | {label}
            common = closed if common is None else common & closed
        if not common:
            violations.append(f"round {record.round}: transmitters {[l for l, _ in record.tx]} "
                              f"do not share a neighborhood")
    return OracleVerdict.of(violations)


def check_run(topology: Topology, result: GossipResult, traces: bool = False) -> OracleVerdict:
    violations = []
    violations.extend(oracle_gossip_check(topology, result).violations)
    violations.extend(check_stage_accounting(topology, result).violations)
    violations.extend(check_token_ledger(topology, result).violations)
    if traces and result.trace is not None:
        violations.extend(check_collision_law(topology, result.trace).violations)
        violations.extend(check_single_active_neighborhood(topology, result.trace).violations)
    return OracleVerdict.of(violations)


def check_determinism(topology: Topology, config: SimulationConfig) -> OracleVerdict:
    """Two recorded runs of the same instance must export identical traces"""
    config = config.replace(record_trace=True)
    digests = [GossipSession(topology, config).run().trace.digest() for _ in range(2)]
    if digests[0] != digests[1]:
        return OracleVerdict.of([f"trace digests differ: {digests[0]} vs {digests[1]}"])
    return OracleVerdict(True)


def estimate_equivalence(cases: int, seed: int = 0, max_n: int = 12, c: int = 2) -> OracleVerdict:
    """
    Run randomized estimates on small random networks and compare with classify_slice

    Args:
        cases: Number of (graph, s, h, X, Y) cases
        seed: RNG seed
        max_n: Largest network drawn
        c: Label exponent

    Returns:
        OracleVerdict with one violation per mismatching case
    """
    rng = random.Random(seed)
    violations = []
    done = 0
    while done < cases:
        n = rng.randint(2, max_n)
        spec = TopologySpec('random-connected', n, c=c, label_mode='random', seed=rng.randrange(10 ** 6),
                            p=rng.choice((0.2, 0.4, 0.7)))
        topology = gen_topology(spec)
        runner = PrimitiveRunner(topology, RadioEngine(topology, record=False))
        for _ in range(min(50, cases - done)):
            s = rng.choice(topology.labels)
            h = rng.choice(topology.neighbor_labels(s))
            X = frozenset(label for label in topology.labels if rng.random() < 0.3)
            lo = rng.randint(1, topology.N)
            Y = LabelRange(lo, rng.randint(lo, topology.N))
            outcome = runner.estimate(s, h, X, Y)
            violations.extend(oracle_estimate_check(topology, s, h, X, Y, outcome).violations)
            done += 1
    return OracleVerdict.of(violations)


def verification_corpus(config: Optional[SimulationConfig] = None,
                        sizes: Sequence[int] = CORPUS_SIZES) -> List[TopologySpec]:
    """Every deterministic family in both label modes plus random-connected instances per size"""
    config = config or SimulationConfig()
    specs = []
    for n in sizes:
        for family in DETERMINISTIC_FAMILIES:
            for mode in ('consecutive', 'random'):
                specs.append(TopologySpec(family, n, c=config.corpus_c, label_mode=mode, seed=n))
        p = 0.5 if n < 16 else 0.1
        for seed in range(config.random_per_n):
            mode = 'random' if seed % 2 else 'consecutive'
            specs.append(TopologySpec('random-connected', n, c=config.corpus_c, label_mode=mode, seed=seed, p=p))
    return specs


@dataclass
class CorpusFailure:
    spec: TopologySpec
    broadcast: str
    violations: List[str]


@dataclass
class CorpusReport:
    instances: int = 0
    failures: List[CorpusFailure] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def verify_corpus(specs: Iterable[TopologySpec], config: Optional[SimulationConfig] = None,
                  kinds: Sequence[str] = tuple(k.value for k in BroadcastKind),
                  traces: bool = False) -> CorpusReport:
    """
    Run gossip on every spec with every broadcast kind and apply all oracles

    Args:
        specs: Corpus instances
        config: Base settings; the broadcast kind is overridden per run
        kinds: Broadcast kinds to exercise
        traces: Record traces and replay them through the trace checkers

    Returns:
        CorpusReport
    """
    config = (config or SimulationConfig()).replace(record_trace=traces)
    report = CorpusReport()
    for spec in specs:
        topology = gen_topology(spec)
        for kind in kinds:
            report.instances += 1
            try:
                result = GossipSession(topology, config.replace(broadcast=kind)).run()
                verdict = check_run(topology, result, traces=traces)
            except Exception as e:
                logger.error(f"Gossip failed on {spec.name} n={spec.n} seed={spec.seed} ({kind}): {e}")
                report.failures.append(CorpusFailure(spec, kind, [f"{type(e).__name__}: {e}"]))
                continue
            if not verdict.valid:
                report.failures.append(CorpusFailure(spec, kind, verdict.violations))
    logger.info(f"Corpus: {report.instances} runs, {len(report.failures)} failures")
    return report
