"""
Synchronous radio network simulator.

Nodes are half-duplex: in every round each node transmits, listens or idles.
A listening node receives a message iff exactly one of its neighbors
transmits in that round; zero transmitters and collisions both look like
silence. Messages are authenticated with the sender's label.
"""
import hashlib
import json
import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Callable, Dict, Generator, Iterable, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)


class TopologyError(ValueError):
    """Base class for topology validation errors"""


class DuplicateLabelError(TopologyError):
    pass


class LabelOutOfUniverseError(TopologyError):
    pass


class SelfLoopError(TopologyError):
    pass


class NodeIndexError(TopologyError):
    pass


class LabelCountError(TopologyError):
    pass


class TopologyFormatError(TopologyError):
    pass


class Topology:
    """Immutable bidirectional graph whose nodes carry injective labels from [1..n^c]"""

    def __init__(self, n: int, c: int, labels: Sequence[int], edges: Iterable[Tuple[int, int]]):
        self.n = n
        self.c = c
        self.N = n ** c
        self.labels: Tuple[int, ...] = tuple(labels)
        self.index_of: Dict[int, int] = {label: i for i, label in enumerate(self.labels)}

        adjacency = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            adjacency[u, v] = True
            adjacency[v, u] = True
        adjacency.setflags(write=False)
        self.adjacency = adjacency
        # int copy for counting transmitters with a matrix product
        self._counts_matrix = adjacency.astype(np.int64)
        self.neighbors: Tuple[Tuple[int, ...], ...] = tuple(
            tuple(int(j) for j in np.flatnonzero(adjacency[i])) for i in range(n)
        )

    @property
    def edges(self) -> List[Tuple[int, int]]:
        rows, cols = np.nonzero(np.triu(self.adjacency, k=1))
        return [(int(u), int(v)) for u, v in zip(rows, cols)]

    @cached_property
    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    @cached_property
    def diameter(self) -> Optional[int]:
        """Diameter D, or None for a disconnected graph"""
        if self.n == 1:
            return 0
        if not self.is_connected():
            return None
        return nx.diameter(self.graph)

    def is_connected(self) -> bool:
        return nx.is_connected(self.graph)

    def neighbor_labels(self, label: int) -> Tuple[int, ...]:
        return tuple(self.labels[j] for j in self.neighbors[self.index_of[label]])

    def are_adjacent(self, a: int, b: int) -> bool:
        return bool(self.adjacency[self.index_of[a], self.index_of[b]])

    @property
    def max_label(self) -> int:
        return max(self.labels)

    def to_text(self) -> str:
        """Serialize in the topology file format"""
        lines = [f"{self.n} {self.c}", ' '.join(str(label) for label in self.labels)]
        lines.extend(f"{u} {v}" for u, v in self.edges)
        return '\n'.join(lines) + '\n'

    def digest(self) -> str:
        return hashlib.blake2b(self.to_text().encode('utf-8'), digest_size=8).hexdigest()

    def __repr__(self):
        return f'<Topology n={self.n} c={self.c} edges={len(self.edges)}>'


def build_topology(n: int, c: int, edges: Iterable[Tuple[int, int]], labels: Sequence[int]) -> Topology:
    """
    Validate inputs and build a Topology with symmetrized adjacency

    Args:
        n: Node count
        c: Label exponent, the universe is [1..n^c]
        edges: Node index pairs; direction is ignored
        labels: Label of each node index

    Returns:
        Validated Topology
    """
    if n < 1:
        raise NodeIndexError(f"node count must be positive, got {n}")
    if c < 1:
        raise LabelOutOfUniverseError(f"label exponent must be at least 1, got {c}")
    labels = list(labels)
    if len(labels) != n:
        raise LabelCountError(f"expected {n} labels, got {len(labels)}")

    universe = n ** c
    seen = set()
    for label in labels:
        if not isinstance(label, (int, np.integer)) or label < 1 or label > universe:
            raise LabelOutOfUniverseError(f"label {label} is outside [1..{universe}]")
        if label in seen:
            raise DuplicateLabelError(f"label {label} is used more than once")
        seen.add(label)

    edge_list = []
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise NodeIndexError(f"edge ({u}, {v}) references a node outside [0..{n - 1}]")
        if u == v:
            raise SelfLoopError(f"self-loop at node {u}")
        edge_list.append((int(u), int(v)))

    return Topology(n, c, [int(label) for label in labels], edge_list)


def is_connected(topology: Topology) -> bool:
    return topology.is_connected()


def parse_topology(text: str) -> Topology:
    """Parse the topology file format: `n c`, the labels line, then `u v` edge lines"""
    rows = []
    for raw in text.splitlines():
        line = raw.split('#', 1)[0].strip()
        if line:
            rows.append(line.split())
    if len(rows) < 2:
        raise TopologyFormatError("topology file needs a header line and a labels line")
    try:
        n, c = (int(x) for x in rows[0])
        labels = [int(x) for x in rows[1]]
        edges = []
        for row in rows[2:]:
            if len(row) != 2:
                raise TopologyFormatError(f"malformed edge line: {' '.join(row)}")
            edges.append((int(row[0]), int(row[1])))
    except ValueError as e:
        if isinstance(e, TopologyError):
            raise
        raise TopologyFormatError(f"malformed topology file: {e}") from e
    return build_topology(n, c, edges, labels)


def load_topology(path: str) -> Topology:
    with open(path, 'r', encoding='utf-8') as handle:
        return parse_topology(handle.read())


def _canonical(value: Any) -> Any:
    if isinstance(value, (set, frozenset)):
        return sorted(_canonical(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in value.items()}
    if isinstance(value, (bytes, bytearray)):
        return value.hex()
    if isinstance(value, np.integer):
        return int(value)
    return value


class Payload:
    """Message content with a canonical byte encoding (sorted keys, sets as sorted lists)"""

    __slots__ = ('kind', 'fields', 'data', 'digest')

    def __init__(self, kind: str, **fields: Any):
        self.kind = kind
        self.fields: Dict[str, Any] = {k: _canonical(v) for k, v in fields.items()}
        self.data: bytes = json.dumps(
            {'kind': kind, **self.fields}, sort_keys=True, separators=(',', ':')
        ).encode('utf-8')
        self.digest: str = hashlib.blake2b(self.data, digest_size=8).hexdigest()

    def __getitem__(self, key: str) -> Any:
        return self.fields[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.fields.get(key, default)

    def __eq__(self, other):
        return isinstance(other, Payload) and other.data == self.data

    def __hash__(self):
        return hash(self.data)

    def __repr__(self):
        return f'<Payload {self.kind} {self.digest}>'


class ActionKind(Enum):
    TRANSMIT = 'transmit'
    LISTEN = 'listen'
    IDLE = 'idle'


@dataclass(frozen=True)
class RoundAction:
    kind: ActionKind
    payload: Optional[Payload] = None

    @property
    def transmits(self) -> bool:
        return self.kind is ActionKind.TRANSMIT

    @property
    def listens(self) -> bool:
        return self.kind is ActionKind.LISTEN


LISTEN = RoundAction(ActionKind.LISTEN)
IDLE = RoundAction(ActionKind.IDLE)


def transmit(payload: Payload) -> RoundAction:
    return RoundAction(ActionKind.TRANSMIT, payload)


@dataclass(frozen=True)
class Inbox:
    sender: Optional[int] = None
    payload: Optional[Payload] = None

    @property
    def received(self) -> bool:
        return self.sender is not None


SILENCE = Inbox()


def resolve_round(topology: Topology, tx_mask: np.ndarray, listen_mask: np.ndarray) -> np.ndarray:
    """
    Apply the collision law to one round

    Returns:
        Array with the sender index for every node that receives, -1 elsewhere
    """
    tx = tx_mask.astype(np.int64)
    counts = topology._counts_matrix @ tx
    # index+1 of the transmitting neighbor; only meaningful where counts == 1
    sender_plus_one = topology._counts_matrix @ (tx * np.arange(1, topology.n + 1))
    receives = listen_mask & ~tx_mask & (counts == 1)
    return np.where(receives, sender_plus_one - 1, -1)


def step(topology: Topology, actions: Sequence[RoundAction]) -> List[Inbox]:
    """
    Resolve one round of the radio model

    Args:
        topology: Network
        actions: One RoundAction per node index

    Returns:
        One Inbox per node index
    """
    if len(actions) != topology.n:
        raise ValueError(f"expected {topology.n} actions, got {len(actions)}")
    tx_mask = np.fromiter((a.transmits for a in actions), dtype=bool, count=topology.n)
    listen_mask = np.fromiter((a.listens for a in actions), dtype=bool, count=topology.n)
    senders = resolve_round(topology, tx_mask, listen_mask)
    inboxes = []
    for i in range(topology.n):
        j = senders[i]
        if j < 0:
            inboxes.append(SILENCE)
        else:
            inboxes.append(Inbox(topology.labels[j], actions[j].payload))
    return inboxes


@dataclass(frozen=True)
class RoundRecord:
    round: int
    stage: str
    tx: Tuple[Tuple[int, str], ...] = ()
    rx: Tuple[Tuple[int, int], ...] = ()
    listening: Tuple[int, ...] = ()
    oracle: bool = False
    notes: Tuple[Dict[str, Any], ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            'round': self.round,
            'stage': self.stage,
            'tx': [f"{label}:{digest}" for label, digest in self.tx],
            'rx': [f"{label}:{sender}" for label, sender in self.rx],
        }
        if self.oracle:
            record['oracle'] = True
        if self.notes:
            record['notes'] = list(self.notes)
        return record


class ExecutionTrace:
    """
    Round-by-round record of a simulation.

    Only rounds with at least one transmission (or an annotation) are stored;
    silent rounds are kept as stage spans and expanded on iteration, so the
    exported stream is dense and consecutive from round 0.
    """

    def __init__(self, record: bool = True):
        self.record = record
        self.rounds = 0
        self.stage_rounds: Dict[str, int] = {}
        self._records: Dict[int, RoundRecord] = {}
        self._notes: Dict[int, List[Dict[str, Any]]] = {}
        self._spans: List[List[Any]] = []

    def _extend_span(self, stage: str, count: int):
        if count <= 0:
            return
        if self._spans and self._spans[-1][0] == stage and self._spans[-1][2] == self.rounds:
            self._spans[-1][2] += count
        else:
            self._spans.append([stage, self.rounds, self.rounds + count])
        self.stage_rounds[stage] = self.stage_rounds.get(stage, 0) + count
        self.rounds += count

    def add(self, record: RoundRecord):
        if record.round != self.rounds:
            raise ValueError(f"trace expected round {self.rounds}, got {record.round}")
        if self.record:
            self._records[record.round] = record
        self._extend_span(record.stage, 1)

    def advance(self, stage: str, count: int):
        """Append `count` rounds in which nobody transmitted"""
        self._extend_span(stage, count)

    def annotate(self, round_no: int, note: Dict[str, Any]):
        if self.record:
            self._notes.setdefault(round_no, []).append(_canonical(note))

    def stage_of(self, round_no: int) -> str:
        for stage, start, end in self._spans:
            if start <= round_no < end:
                return stage
        raise IndexError(round_no)

    @property
    def stored_records(self) -> List[RoundRecord]:
        return [self._records[r] for r in sorted(self._records)]

    def __len__(self):
        return self.rounds

    def __iter__(self) -> Iterator[RoundRecord]:
        for stage, start, end in self._spans:
            for r in range(start, end):
                record = self._records.get(r) or RoundRecord(r, stage)
                notes = self._notes.get(r)
                if notes:
                    record = RoundRecord(record.round, record.stage, record.tx, record.rx,
                                         record.listening, record.oracle, tuple(notes))
                yield record

    def export_lines(self) -> Iterator[str]:
        for record in self:
            yield json.dumps(record.to_dict(), sort_keys=True, separators=(',', ':'))

    def write(self, path: str):
        with open(path, 'w', encoding='utf-8') as handle:
            for line in self.export_lines():
                handle.write(line + '\n')

    def digest(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        for line in self.export_lines():
            h.update(line.encode('utf-8'))
            h.update(b'\n')
        h.update(json.dumps(self.stage_rounds, sort_keys=True).encode('utf-8'))
        return h.hexdigest()


class IdleBehavior:
    def act(self, round_no: int) -> RoundAction:
        return IDLE

    def deliver(self, round_no: int, inbox: Inbox):
        pass


NodeProcess = Generator[RoundAction, Inbox, Any]


class ProcessBehavior:
    """Drive a generator node process: it yields an action and is sent that round's inbox"""

    def __init__(self, process: NodeProcess):
        self._process = process
        self.finished = False
        self.result: Any = None
        try:
            self._pending = next(process)
        except StopIteration as stop:
            self._finish(stop.value)

    def _finish(self, value: Any):
        self.finished = True
        self.result = value
        self._pending = IDLE

    def act(self, round_no: int) -> RoundAction:
        return self._pending

    def deliver(self, round_no: int, inbox: Inbox):
        if self.finished:
            return
        try:
            self._pending = self._process.send(inbox)
        except StopIteration as stop:
            self._finish(stop.value)


@dataclass
class RunOutcome:
    stage: str
    rounds: int
    exhausted: bool = False


class RadioEngine:
    """Single-threaded round executor that appends every round to an ExecutionTrace"""

    def __init__(self, topology: Topology, trace: Optional[ExecutionTrace] = None, record: bool = True):
        self.logger = logging.getLogger(__name__)
        self.topology = topology
        self.trace = trace if trace is not None else ExecutionTrace(record=record)
        self.stage = 'init'

    @property
    def round(self) -> int:
        return self.trace.rounds

    @property
    def recording(self) -> bool:
        return self.trace.record

    def set_stage(self, stage: str):
        self.stage = stage

    def annotate(self, **note: Any):
        """Attach a note to the round that was just executed"""
        self.trace.annotate(max(self.round - 1, 0), note)

    def _record(self, tx_idx: np.ndarray, tx_digests: Sequence[str], senders: np.ndarray,
                listen_mask: np.ndarray, oracle: bool = False):
        labels = self.topology.labels
        if len(tx_idx) == 0 and not oracle:
            self.trace.advance(self.stage, 1)
            return
        rx_idx = np.flatnonzero(senders >= 0)
        record = RoundRecord(
            round=self.round,
            stage=self.stage,
            tx=tuple((labels[i], d) for i, d in zip(tx_idx, tx_digests)),
            rx=tuple((labels[i], labels[senders[i]]) for i in rx_idx),
            listening=tuple(labels[i] for i in np.flatnonzero(listen_mask)) if self.recording else (),
            oracle=oracle,
        )
        self.trace.add(record)

    def step(self, actions: Sequence[RoundAction]) -> List[Inbox]:
        """Execute one round with per-node actions"""
        inboxes = step(self.topology, actions)
        tx_idx = [i for i, a in enumerate(actions) if a.transmits]
        if not tx_idx:
            self.trace.advance(self.stage, 1)
            return inboxes
        senders = np.array([self.topology.index_of[b.sender] if b.received else -1 for b in inboxes])
        listen_mask = np.array([a.listens for a in actions], dtype=bool)
        self._record(np.array(tx_idx), [actions[i].payload.digest for i in tx_idx], senders, listen_mask)
        return inboxes

    def step_masks(self, tx_mask: np.ndarray, listen_mask: np.ndarray, payload: Payload) -> np.ndarray:
        """
        Execute one round in which every transmitter sends the same payload

        Returns:
            Sender index per node (-1 where nothing was received)
        """
        senders = resolve_round(self.topology, tx_mask, listen_mask)
        tx_idx = np.flatnonzero(tx_mask)
        self._record(tx_idx, [payload.digest] * len(tx_idx), senders, listen_mask)
        return senders

    def skip(self, rounds: int):
        """Advance through rounds in which no node transmits"""
        if rounds < 0:
            raise ValueError("cannot skip a negative number of rounds")
        self.trace.advance(self.stage, rounds)

    def oracle_round(self, sources: np.ndarray, parents: Dict[int, int], payload: Payload):
        """Record an oracle-assisted delivery: every node in `parents` gets the payload from its parent"""
        labels = self.topology.labels
        record = RoundRecord(
            round=self.round,
            stage=self.stage,
            tx=tuple((labels[i], payload.digest) for i in np.flatnonzero(sources)),
            rx=tuple((labels[i], labels[parents[i]]) for i in sorted(parents)),
            oracle=True,
        )
        self.trace.add(record)

    def run(self, behaviors: Sequence[Any], stage: str, round_budget: int,
            halt: Optional[Callable[[int], bool]] = None) -> RunOutcome:
        """
        Step all behaviors until `halt` says so or the budget runs out

        Args:
            behaviors: One object per node with act(round) and deliver(round, inbox)
            stage: Stage tag written into every record
            round_budget: Maximum rounds to execute
            halt: Harness-side predicate over rounds elapsed in this run, checked before each round

        Returns:
            RunOutcome with rounds consumed and whether the budget was exhausted
        """
        if round_budget < 0:
            raise ValueError("round budget must be non-negative")
        if len(behaviors) != self.topology.n:
            raise ValueError(f"expected {self.topology.n} behaviors, got {len(behaviors)}")
        self.set_stage(stage)
        elapsed = 0
        while True:
            if halt is not None and halt(elapsed):
                return RunOutcome(stage, elapsed, exhausted=False)
            if elapsed >= round_budget:
                if halt is not None:
                    self.logger.warning(f"Stage {stage} exhausted its budget of {round_budget} rounds")
                return RunOutcome(stage, elapsed, exhausted=True)
            round_no = self.round
            actions = [b.act(round_no) for b in behaviors]
            inboxes = self.step(actions)
            for behavior, inbox in zip(behaviors, inboxes):
                behavior.deliver(round_no, inbox)
            elapsed += 1
