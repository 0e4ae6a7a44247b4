"""
Deterministic multi-source broadcast with a fixed round budget.

Three interchangeable primitives are available. Round-robin gives every label its
own slot. Selective flood uses the sets of an (n, N)-selective family as slots.
Oracle accounting delivers by reachability and then charges the asymptotic
budget n lg n lg lg n.

Every primitive runs for exactly `nb_bound` rounds on a fixed timetable.
"""
import heapq
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional

import networkx as nx
import numpy as np

from radio_engine import Payload, RadioEngine, Topology
from selective_family import SelectiveFamily, SelectiveFamilyBuilder, build_selective_family

logger = logging.getLogger(__name__)


class BroadcastKind(str, Enum):
    ROUND_ROBIN = 'roundrobin'
    SELECTIVE_FLOOD = 'sf'
    ORACLE = 'oracle'


def lg(n: int) -> float:
    return math.log2(n) if n > 1 else 0.0


def lglg(n: int) -> int:
    """lg lg n rounded up, never below 1"""
    if n <= 2:
        return 1
    return max(1, math.ceil(math.log2(math.log2(n))))


@dataclass(frozen=True)
class BroadcastPrimitive:
    kind: BroadcastKind
    n: int
    N: int
    nb_bound: int
    c_rb: Fraction = Fraction(1)
    family: Optional[SelectiveFamily] = field(default=None, compare=False)

    @property
    def period(self) -> int:
        """Rounds per pass of the slot schedule"""
        if self.kind is BroadcastKind.ROUND_ROBIN:
            return self.N
        if self.kind is BroadcastKind.SELECTIVE_FLOOD:
            return self.family.size
        return self.nb_bound


def oracle_bound(n: int, c_rb: Fraction = Fraction(1)) -> int:
    return max(1, math.ceil(float(c_rb) * n * lg(n) * lglg(n)))


def make_broadcast(kind, n: int, N: int, c_rb=Fraction(1), seed: int = 0,
                   builder: Optional[SelectiveFamilyBuilder] = None) -> BroadcastPrimitive:
    """
    Create a broadcast primitive and compute its round budget

    Args:
        kind: BroadcastKind or its string value
        n: Network size
        N: Label universe size
        c_rb: Constant factor for oracle accounting
        seed: Selective family seed (selective flood only)
        builder: Selective family builder (selective flood only)

    Returns:
        BroadcastPrimitive
    """
    kind = BroadcastKind(kind)
    if n < 1 or N < n:
        raise ValueError(f"broadcast needs n >= 1 and N >= n, got n={n}, N={N}")
    c_rb = Fraction(c_rb)
    if kind is BroadcastKind.ROUND_ROBIN:
        return BroadcastPrimitive(kind, n, N, n * N, c_rb)
    if kind is BroadcastKind.SELECTIVE_FLOOD:
        family = build_selective_family(n, N, seed, builder)
        return BroadcastPrimitive(kind, n, N, n * family.size, c_rb, family)
    return BroadcastPrimitive(kind, n, N, oracle_bound(n, c_rb), c_rb)


@dataclass
class BroadcastOutcome:
    informed: FrozenSet[int]
    rounds: int
    # label -> label of the first neighbor heard alone during the run
    first_heard: Dict[int, int] = field(default_factory=dict)


class BroadcastRunner:
    """Executes a primitive's timetable on an engine"""

    def __init__(self, primitive: BroadcastPrimitive, topology: Topology, engine: RadioEngine):
        self.logger = logging.getLogger(__name__)
        self.primitive = primitive
        self.topology = topology
        self.engine = engine
        self._slots: Optional[List[np.ndarray]] = None
        self._members: Optional[Dict[int, np.ndarray]] = None

    def _slot_tables(self):
        if self._slots is not None:
            return
        labels = self.topology.labels
        if self.primitive.kind is BroadcastKind.ROUND_ROBIN:
            slots = [np.array([label - 1]) for label in labels]
        else:
            family = self.primitive.family
            slots = [np.array(family.slots_of(label), dtype=np.int64) for label in labels]
        members: Dict[int, List[int]] = {}
        for i, node_slots in enumerate(slots):
            for j in node_slots:
                members.setdefault(int(j), []).append(i)
        self._slots = slots
        self._members = {j: np.array(idx) for j, idx in members.items()}

    def _closure(self, informed: np.ndarray) -> np.ndarray:
        reach = np.zeros(self.topology.n, dtype=bool)
        for component in nx.connected_components(self.topology.graph):
            idx = np.fromiter(component, dtype=np.int64)
            if informed[idx].any():
                reach[idx] = True
        return reach

    def run(self, sources: Iterable[int], payload: Payload) -> BroadcastOutcome:
        informed = np.zeros(self.topology.n, dtype=bool)
        for label in sources:
            informed[self.topology.index_of[label]] = True
        start = self.engine.round
        if self.primitive.kind is BroadcastKind.ORACLE:
            first_heard = self._run_oracle(informed, payload)
        else:
            first_heard = self._run_slots(informed, payload)
        rounds = self.engine.round - start
        labels = self.topology.labels
        return BroadcastOutcome(frozenset(labels[i] for i in np.flatnonzero(informed)), rounds, first_heard)

    def _run_oracle(self, informed: np.ndarray, payload: Payload) -> Dict[int, int]:
        budget = self.primitive.nb_bound
        if not informed.any():
            self.engine.skip(budget)
            return {}
        sources = informed.copy()
        parents: Dict[int, int] = {}
        frontier = list(np.flatnonzero(informed))
        while frontier:
            nxt = []
            for u in frontier:
                for v in self.topology.neighbors[u]:
                    if not informed[v]:
                        informed[v] = True
                        parents[v] = int(u)
                        nxt.append(v)
            frontier = nxt
        self.engine.oracle_round(sources, parents, payload)
        self.engine.skip(budget - 1)
        # oracle deliveries are not overheard transmissions
        return {}

    def _run_slots(self, informed: np.ndarray, payload: Payload) -> Dict[int, int]:
        self._slot_tables()
        period = self.primitive.period
        budget = self.primitive.nb_bound
        passes = budget // period
        labels = self.topology.labels
        first_heard: Dict[int, int] = {}
        target = None if self.engine.recording else self._closure(informed)
        cursor = 0

        for p in range(passes):
            if target is not None and (informed == target).all():
                break
            base = p * period
            pending = sorted({int(j) for i in np.flatnonzero(informed) for j in self._slots[i]})
            queued = set(pending)
            heapq.heapify(pending)
            grown = False
            while pending:
                j = heapq.heappop(pending)
                tx = np.zeros(self.topology.n, dtype=bool)
                members = self._members[j]
                tx[members] = informed[members]
                if not tx.any():
                    continue
                self.engine.skip(base + j - cursor)
                senders = self.engine.step_masks(tx, ~tx, payload)
                cursor = base + j + 1
                for i in np.flatnonzero(senders >= 0):
                    first_heard.setdefault(labels[i], labels[senders[i]])
                    if not informed[i]:
                        informed[i] = True
                        grown = True
                        for later in self._slots[i]:
                            later = int(later)
                            if later > j and later not in queued:
                                queued.add(later)
                                heapq.heappush(pending, later)
            self.logger.debug(f"pass {p}: {int(informed.sum())}/{self.topology.n} informed")
            if not grown and target is not None:
                break

        self.engine.skip(budget - cursor)
        return first_heard


def run_broadcast(primitive: BroadcastPrimitive, topology: Topology, initially_informed: Iterable[int],
                  payload: Payload, engine: Optional[RadioEngine] = None) -> BroadcastOutcome:
    """
    Run a broadcast for exactly primitive.nb_bound rounds

    Args:
        primitive: Broadcast primitive
        topology: Network
        initially_informed: Labels holding the payload at the start (may be empty)
        payload: Message to disseminate
        engine: Engine to run on; a fresh one is created when omitted

    Returns:
        BroadcastOutcome with the informed labels and rounds used
    """
    engine = engine or RadioEngine(topology)
    return BroadcastRunner(primitive, topology, engine).run(initially_informed, payload)
