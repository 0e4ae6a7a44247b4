"""
Deterministic gossiping for bidirectional radio networks with large labels.

Four stages, run back to back on one engine:

1. select-leader: log N bisection rounds over the label universe, each one a
   fixed-length multi-source broadcast of "someone is in the upper half".
2. designate-helper: the leader picks one neighbor as its helper.
3. mark-and-pass-token: a depth-first token walk that discovers neighbors with
   Binary-Select and collects every rumor.
4. disseminate: the leader broadcasts the collected rumors.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Set, Tuple

import numpy as np

from broadcast import BroadcastPrimitive, BroadcastRunner, make_broadcast
from config import SimulationConfig
from primitives import (
    ESTIMATE, SelectResult, binary_select_process, lg_ceil, respond_to_estimate,
    select_round_bound,
)
from radio_engine import LISTEN, ExecutionTrace, Payload, ProcessBehavior, RadioEngine, Topology, transmit
from selective_family import SelectiveFamily, SelectiveFamilyBuilder, build_selective_family

STAGE_LEADER = 'select-leader'
STAGE_HELPER = 'designate-helper'
STAGE_TOKEN = 'mark-and-pass-token'
STAGE_DISSEMINATE = 'disseminate'
STAGES = (STAGE_LEADER, STAGE_HELPER, STAGE_TOKEN, STAGE_DISSEMINATE)

ELECT = 'elect'
SOLICIT = 'solicit'
HELLO = 'hello'
HELPER = 'helper'
TOKEN = 'token'
RUMORS = 'rumors'


class GossipError(Exception):
    pass


class DisconnectedTopologyError(GossipError):
    pass


class RoundBudgetExceeded(GossipError):
    pass


@dataclass(frozen=True)
class Rumor:
    origin: int
    payload: bytes

    @classmethod
    def of(cls, label: int) -> 'Rumor':
        return cls(label, f"rumor-{label}".encode('utf-8'))


def encode_rumors(rumors: Dict[int, Rumor]) -> Dict[str, str]:
    return {str(origin): rumor.payload.hex() for origin, rumor in sorted(rumors.items())}


def decode_rumors(encoded: Dict[str, str]) -> Dict[int, Rumor]:
    return {int(origin): Rumor(int(origin), bytes.fromhex(data)) for origin, data in encoded.items()}


@dataclass
class NodeState:
    """What one node knows; it starts with its own label, n and c only"""
    label: int
    n: int
    c: int
    rumor: Rumor
    live_lo: int = 1
    live_hi: int = 1
    known: Dict[int, Rumor] = field(default_factory=dict)
    leader: Optional[int] = None
    helper: Optional[int] = None
    parent: Optional[int] = None
    overheard: Optional[int] = None

    @classmethod
    def initial(cls, label: int, n: int, c: int) -> 'NodeState':
        rumor = Rumor.of(label)
        return cls(label, n, c, rumor, live_lo=1, live_hi=n ** c, known={label: rumor})

    @property
    def N(self) -> int:
        return self.n ** self.c

    @property
    def is_leader(self) -> bool:
        return self.leader == self.label


@dataclass
class Token:
    visited: Set[int]
    rumors: Dict[int, Rumor]
    holder: Optional[int] = None
    helper: Optional[int] = None

    def payload(self, target: int) -> Payload:
        return Payload(TOKEN, target=target, visited=frozenset(self.visited), rumors=encode_rumors(self.rumors))

    @classmethod
    def from_payload(cls, payload: Payload) -> 'Token':
        return cls(set(payload['visited']), decode_rumors(payload['rumors']))


@dataclass(frozen=True)
class TokenPass:
    round: int
    sender: int
    target: int
    returning: bool
    visited: FrozenSet[int]


@dataclass(frozen=True)
class SelectCall:
    initiator: int
    helper: int
    excluded: FrozenSet[int]
    found: Optional[int]
    estimates: int

    @property
    def rounds(self) -> int:
        return 3 * self.estimates


class TokenLedger:
    """Harness-side record of the token walk; nodes never read it"""

    def __init__(self, clock: Callable[[], int], trace: ExecutionTrace):
        self.clock = clock
        self.trace = trace
        self.passes: List[TokenPass] = []
        self.selects: List[SelectCall] = []
        self.holders: List[int] = []
        self.done = False
        self.final: Optional[Token] = None

    def arrived(self, label: int):
        if label not in self.holders:
            self.holders.append(label)

    def passed(self, sender: int, target: int, returning: bool, token: Token):
        round_no = self.clock()
        self.passes.append(TokenPass(round_no, sender, target, returning, frozenset(token.visited)))
        self.trace.annotate(round_no, {'event': TOKEN, 'from': sender, 'to': target, 'returning': returning})

    def selected(self, initiator: int, helper: int, excluded: FrozenSet[int], result: SelectResult):
        self.selects.append(SelectCall(initiator, helper, excluded, result.label, result.estimates))

    def finish(self, token: Token):
        self.final = token
        self.done = True


def _pass_token(state: NodeState, ledger: TokenLedger, token: Token, target: int, returning: bool):
    ledger.passed(state.label, target, returning, token)
    yield transmit(token.payload(target))


def token_process(state: NodeState, ledger: TokenLedger, observer=None):
    """
    Stage-3 behavior of one node.

    Waiting nodes listen, answer estimate requests and pick up the token when it
    is addressed to them. Every token arrival triggers one Binary-Select; a new
    neighbor gets the token, otherwise it goes back to the node it first came
    from. The leader stops when its own select finds nothing.
    """
    if state.is_leader:
        token = Token({state.label}, {state.label: state.rumor})
        ledger.arrived(state.label)
        yield from _pass_token(state, ledger, token, state.helper, returning=False)

    while True:
        inbox = yield LISTEN
        if not inbox.received:
            continue
        message = inbox.payload
        if message.kind == ESTIMATE:
            yield from respond_to_estimate(state.label, message)
            continue
        if message.kind != TOKEN or message['target'] != state.label:
            continue

        token = Token.from_payload(message)
        if state.parent is None and not state.is_leader:
            state.parent = inbox.sender
        token.visited.add(state.label)
        token.rumors[state.label] = state.rumor
        state.known.update(token.rumors)
        ledger.arrived(state.label)

        helper = state.helper if state.is_leader else state.parent
        excluded = frozenset(token.visited)
        result = yield from binary_select_process(state.label, helper, excluded, state.n, state.N, observer)
        ledger.selected(state.label, helper, excluded, result)
        if result.label is not None:
            yield from _pass_token(state, ledger, token, result.label, returning=False)
        elif state.is_leader:
            ledger.finish(token)
            return token
        else:
            yield from _pass_token(state, ledger, token, state.parent, returning=True)


def token_round_bound(n: int, N: int) -> int:
    """Token passes plus one Binary-Select per token arrival"""
    if n < 2:
        return 0
    return 2 * (n - 1) + (2 * n - 1) * select_round_bound(N)


@dataclass
class GossipResult:
    leader: int
    helper: Optional[int]
    stage_rounds: Dict[str, int]
    rumor_sets: Dict[int, FrozenSet[int]]
    token_passes: int
    primitive: BroadcastPrimitive = field(compare=False)
    family_size: Optional[int] = None
    ledger: Optional[TokenLedger] = field(default=None, compare=False, repr=False)
    trace: Optional[ExecutionTrace] = field(default=None, compare=False, repr=False)

    @property
    def stage1(self) -> int:
        return self.stage_rounds.get(STAGE_LEADER, 0)

    @property
    def stage2(self) -> int:
        return self.stage_rounds.get(STAGE_HELPER, 0)

    @property
    def stage3(self) -> int:
        return self.stage_rounds.get(STAGE_TOKEN, 0)

    @property
    def stage4(self) -> int:
        return self.stage_rounds.get(STAGE_DISSEMINATE, 0)

    @property
    def total(self) -> int:
        return self.stage1 + self.stage2 + self.stage3 + self.stage4

    def summary(self) -> Dict[str, int]:
        return {
            'leader': self.leader,
            'stage1': self.stage1,
            'stage2': self.stage2,
            'stage3': self.stage3,
            'stage4': self.stage4,
            'total': self.total,
            'token_passes': self.token_passes,
        }


class GossipSession:
    """One network, one engine, and the per-node states the four stages act on"""

    def __init__(self, topology: Topology, config: Optional[SimulationConfig] = None,
                 primitive: Optional[BroadcastPrimitive] = None, engine: Optional[RadioEngine] = None):
        self.logger = logging.getLogger(__name__)
        self.topology = topology
        self.config = config or SimulationConfig()
        self.builder = SelectiveFamilyBuilder.from_config(self.config)
        self.primitive = primitive or make_broadcast(
            self.config.broadcast, topology.n, topology.N, self.config.c_rb,
            self.config.selector_seed, self.builder,
        )
        self.engine = engine or RadioEngine(topology, record=self.config.record_trace)
        self.states = [NodeState.initial(label, topology.n, topology.c) for label in topology.labels]
        self.ledger: Optional[TokenLedger] = None
        self._family: Optional[SelectiveFamily] = None
        self._runner = BroadcastRunner(self.primitive, topology, self.engine)

    @property
    def family(self) -> SelectiveFamily:
        """The (n, N)-selective family every node derives from n and c"""
        if self._family is None:
            if self.primitive.family is not None:
                self._family = self.primitive.family
            else:
                self._family = build_selective_family(
                    self.topology.n, self.topology.N, self.config.selector_seed, self.builder
                )
        return self._family

    def state_of(self, label: int) -> NodeState:
        return self.states[self.topology.index_of[label]]

    def _stage(self, stage: str) -> int:
        self.engine.set_stage(stage)
        return self.engine.round

    def assume_leader(self, leader: int):
        for state in self.states:
            state.leader = leader

    def assume_helper(self, helper: int):
        self.state_of(self.leader).helper = helper

    @property
    def leader(self) -> int:
        leaders = {state.leader for state in self.states}
        if len(leaders) != 1 or None in leaders:
            raise GossipError(f"nodes disagree on the leader: {sorted(l for l in leaders if l is not None)}")
        return leaders.pop()

    def select_leader(self) -> Tuple[int, int]:
        """
        Elect the maximum label by bisecting [1..N]

        Returns:
            (leader label, rounds)
        """
        start = self._stage(STAGE_LEADER)
        if self.topology.n == 1:
            self.assume_leader(self.topology.labels[0])
            return self.leader, 0

        for iteration in range(lg_ceil(self.topology.N)):
            seeds = []
            for state in self.states:
                upper = (state.live_lo + state.live_hi) // 2 + 1
                if upper <= state.label <= state.live_hi:
                    seeds.append(state.label)
            outcome = self._runner.run(seeds, Payload(ELECT, bit=1, iteration=iteration))
            for state in self.states:
                mid = (state.live_lo + state.live_hi) // 2
                if state.label in outcome.informed:
                    state.live_lo = mid + 1
                else:
                    state.live_hi = mid
            for label, sender in outcome.first_heard.items():
                state = self.state_of(label)
                if state.overheard is None:
                    state.overheard = sender
            self.logger.debug(f"bisection {iteration}: live range [{self.states[0].live_lo}..{self.states[0].live_hi}]")

        for state in self.states:
            if state.live_lo != state.live_hi:
                raise GossipError(f"node {state.label} ended with live range [{state.live_lo}..{state.live_hi}]")
            state.leader = state.live_lo
        rounds = self.engine.round - start
        self.logger.info(f"Elected leader {self.leader} in {rounds} rounds")
        return self.leader, rounds

    def _announce_helper(self, leader_idx: int, helper: int):
        tx = np.zeros(self.topology.n, dtype=bool)
        tx[leader_idx] = True
        senders = self.engine.step_masks(tx, ~tx, Payload(HELPER, leader=self.topology.labels[leader_idx], helper=helper))
        self.states[leader_idx].helper = helper
        for i in np.flatnonzero(senders >= 0):
            self.states[i].helper = helper

    def designate_helper(self, variant: Optional[str] = None) -> Tuple[Optional[int], int]:
        """
        Pick a neighbor of the leader as its helper

        Variant 'b' solicits the neighborhood and lets it answer on the
        selective-family schedule; variant 'a' reuses a neighbor the leader
        overheard during the election and falls back to 'b'.

        Returns:
            (helper label, rounds)
        """
        start = self._stage(STAGE_HELPER)
        if self.topology.n == 1:
            return None, 0
        variant = variant or self.config.helper_variant
        leader = self.leader
        leader_idx = self.topology.index_of[leader]
        leader_state = self.states[leader_idx]

        if variant == 'a' and leader_state.overheard is not None:
            self._announce_helper(leader_idx, leader_state.overheard)
            self.logger.info(f"Leader {leader} reused overheard neighbor {leader_state.overheard} as helper")
            return leader_state.overheard, self.engine.round - start

        family = self.family
        tx = np.zeros(self.topology.n, dtype=bool)
        tx[leader_idx] = True
        senders = self.engine.step_masks(tx, ~tx, Payload(SOLICIT, leader=leader))
        solicited = senders >= 0

        listen = np.zeros(self.topology.n, dtype=bool)
        listen[leader_idx] = True
        slots: Dict[int, List[int]] = {}
        for i in np.flatnonzero(solicited):
            for j in family.slots_of(self.topology.labels[i]):
                slots.setdefault(j, []).append(int(i))

        heard = None
        cursor = 0
        hello = Payload(HELLO)
        for j in sorted(slots):
            self.engine.skip(j - cursor)
            answer = np.zeros(self.topology.n, dtype=bool)
            answer[slots[j]] = True
            senders = self.engine.step_masks(answer, listen, hello)
            cursor = j + 1
            if heard is None and senders[leader_idx] >= 0:
                heard = self.topology.labels[senders[leader_idx]]
        self.engine.skip(family.size - cursor)

        if heard is None:
            raise GossipError(f"leader {leader} heard no neighbor on the selective schedule")
        self._announce_helper(leader_idx, heard)
        rounds = self.engine.round - start
        self.logger.info(f"Leader {leader} designated helper {heard} in {rounds} rounds")
        return heard, rounds

    def token_dfs(self) -> Tuple[Token, int]:
        """
        Walk the token depth-first from the leader, marking nodes and collecting rumors

        Returns:
            (final token, rounds)
        """
        start = self._stage(STAGE_TOKEN)
        self.ledger = TokenLedger(lambda: self.engine.round, self.engine.trace)
        leader_state = self.state_of(self.leader)
        if self.topology.n == 1:
            token = Token({leader_state.label}, dict(leader_state.known), holder=leader_state.label)
            self.ledger.arrived(leader_state.label)
            self.ledger.finish(token)
            return token, 0
        if leader_state.helper is None:
            raise GossipError("the leader has no helper; run designate_helper first")

        def observe(s, h, X, Y, outcome):
            self.engine.annotate(event=ESTIMATE, initiator=s, helper=h, excluded=Payload('x', x=X).digest,
                                 range=str(Y), outcome=str(outcome))

        observer = observe if self.engine.recording else None
        behaviors = [ProcessBehavior(token_process(state, self.ledger, observer)) for state in self.states]
        budget = token_round_bound(self.topology.n, self.topology.N)
        outcome = self.engine.run(behaviors, STAGE_TOKEN, budget, halt=lambda _: self.ledger.done)
        if not self.ledger.done:
            raise RoundBudgetExceeded(f"token walk did not finish within {budget} rounds")

        token = self.ledger.final
        token.holder = leader_state.label
        token.helper = leader_state.helper
        self.logger.info(
            f"Token walk visited {len(token.visited)} nodes with {len(self.ledger.passes)} passes "
            f"in {outcome.rounds} rounds"
        )
        return token, self.engine.round - start

    def disseminate(self) -> int:
        """Broadcast the leader's collected rumors; returns rounds used"""
        start = self._stage(STAGE_DISSEMINATE)
        if self.topology.n == 1:
            return 0
        leader_state = self.state_of(self.leader)
        payload = Payload(RUMORS, rumors=encode_rumors(leader_state.known))
        outcome = self._runner.run([leader_state.label], payload)
        for label in outcome.informed:
            self.state_of(label).known.update(leader_state.known)
        return self.engine.round - start

    def run(self) -> GossipResult:
        _require_connected(self.topology)
        self.select_leader()
        self.designate_helper()
        self.token_dfs()
        self.disseminate()
        return self.result()

    def result(self) -> GossipResult:
        stage_rounds = {stage: self.engine.trace.stage_rounds.get(stage, 0) for stage in STAGES}
        leader_state = self.state_of(self.leader)
        return GossipResult(
            leader=self.leader,
            helper=leader_state.helper,
            stage_rounds=stage_rounds,
            rumor_sets={state.label: frozenset(state.known) for state in self.states},
            token_passes=len(self.ledger.passes) if self.ledger else 0,
            primitive=self.primitive,
            family_size=self._family.size if self._family is not None else None,
            ledger=self.ledger,
            trace=self.engine.trace,
        )


def _require_connected(topology: Topology):
    if not topology.is_connected():
        raise DisconnectedTopologyError(f"gossiping needs a connected network, {topology!r} is not")


def select_leader(topology: Topology, primitive: Optional[BroadcastPrimitive] = None,
                  config: Optional[SimulationConfig] = None,
                  engine: Optional[RadioEngine] = None) -> Tuple[int, int]:
    _require_connected(topology)
    return GossipSession(topology, config, primitive, engine).select_leader()


def designate_helper(topology: Topology, leader: int, config: Optional[SimulationConfig] = None,
                     engine: Optional[RadioEngine] = None) -> Tuple[Optional[int], int]:
    _require_connected(topology)
    session = GossipSession(topology, config, engine=engine)
    session.assume_leader(leader)
    return session.designate_helper()


def token_dfs(topology: Topology, leader: int, helper: Optional[int],
              config: Optional[SimulationConfig] = None, engine: Optional[RadioEngine] = None,
              session: Optional[GossipSession] = None) -> Tuple[Token, int]:
    _require_connected(topology)
    session = session or GossipSession(topology, config, engine=engine)
    session.assume_leader(leader)
    if helper is not None:
        if not topology.are_adjacent(leader, helper):
            raise GossipError(f"helper {helper} is not a neighbor of leader {leader}")
        session.assume_helper(helper)
    return session.token_dfs()


def disseminate(topology: Topology, leader: int, collected: Dict[int, Rumor],
                primitive: Optional[BroadcastPrimitive] = None, config: Optional[SimulationConfig] = None,
                engine: Optional[RadioEngine] = None) -> int:
    _require_connected(topology)
    session = GossipSession(topology, config, primitive, engine)
    session.assume_leader(leader)
    session.state_of(leader).known.update(collected)
    return session.disseminate()


def gossip(topology: Topology, config: Optional[SimulationConfig] = None,
           primitive: Optional[BroadcastPrimitive] = None) -> GossipResult:
    """
    Run all four stages

    Args:
        topology: Connected network
        config: Broadcast kind, helper variant, selector settings
        primitive: Prebuilt broadcast primitive, overriding config.broadcast

    Returns:
        GossipResult with per-stage rounds and every node's final rumor set
    """
    _require_connected(topology)
    return GossipSession(topology, config, primitive).run()
