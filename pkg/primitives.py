"""
Neighborhood-discovery primitives for bidirectional radio networks.

`estimate` tells an initiator whether its neighbors with labels in a range,
minus an exclusion set and a helper, number zero, exactly one (and which),
or at least two. `binary_select` uses it to find one undiscovered neighbor.
Both are written as node processes: generators that yield the node's
action for a round and are sent the inbox of that round.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, FrozenSet, Generator, Iterable, List, Optional, Tuple

from radio_engine import (
    LISTEN, Inbox, Payload, ProcessBehavior, RadioEngine, RoundAction, Topology, transmit,
)

logger = logging.getLogger(__name__)

ESTIMATE = 'estimate'
LABEL = 'label'

ExclusionSet = FrozenSet[int]


class ModelViolation(RuntimeError):
    """A reception pattern that the radio model cannot produce"""


@dataclass(frozen=True)
class LabelRange:
    lo: int
    hi: int
    full: bool = False

    def __post_init__(self):
        if self.lo < 1 or self.lo > self.hi:
            raise ValueError(f"invalid label range [{self.lo}..{self.hi}]")

    @classmethod
    def universe(cls, N: int) -> 'LabelRange':
        return cls(1, N, full=True)

    def __contains__(self, label: int) -> bool:
        return self.lo <= label <= self.hi

    def __len__(self):
        return self.hi - self.lo + 1

    def halves(self) -> Tuple['LabelRange', 'LabelRange']:
        mid = (self.lo + self.hi) // 2
        return LabelRange(self.lo, mid), LabelRange(mid + 1, self.hi)

    def __str__(self):
        return 'full' if self.full else f"[{self.lo}..{self.hi}]"


class OutcomeKind(Enum):
    ZERO_NEW = 'zero'
    ONE_NEW = 'one'
    TWO_PLUS = 'two+'


@dataclass(frozen=True)
class EstimateOutcome:
    kind: OutcomeKind
    label: Optional[int] = None

    def __str__(self):
        return f"one({self.label})" if self.kind is OutcomeKind.ONE_NEW else self.kind.value


ZERO_NEW = EstimateOutcome(OutcomeKind.ZERO_NEW)
TWO_PLUS = EstimateOutcome(OutcomeKind.TWO_PLUS)


def one_new(label: int) -> EstimateOutcome:
    return EstimateOutcome(OutcomeKind.ONE_NEW, label)


def estimate_request(s: int, h: int, X: Iterable[int], Y: LabelRange) -> Payload:
    return Payload(ESTIMATE, initiator=s, helper=h, excluded=frozenset(X), lo=Y.lo, hi=Y.hi, full=Y.full)


def classify(first: Inbox, second: Inbox, h: int) -> EstimateOutcome:
    """Map the two listening rounds of an estimate to its outcome"""
    if first.received and not second.received:
        return one_new(first.sender)
    if not first.received and second.received:
        if second.sender != h:
            raise ModelViolation(f"step 2 delivered {second.sender}, only helper {h} can be heard alone")
        return ZERO_NEW
    if not first.received and not second.received:
        return TWO_PLUS
    raise ModelViolation(
        f"step 1 delivered {first.sender} and step 2 delivered {second.sender}; helper {h} should collide"
    )


EstimateObserver = Callable[[int, int, ExclusionSet, LabelRange, EstimateOutcome], None]


def estimate_initiator(s: int, h: int, X: ExclusionSet, Y: LabelRange,
                       observer: Optional[EstimateObserver] = None) -> Generator[RoundAction, Inbox, EstimateOutcome]:
    """Initiator side of an estimate: announce, then listen for two rounds"""
    yield transmit(estimate_request(s, h, X, Y))
    first = yield LISTEN
    second = yield LISTEN
    outcome = classify(first, second, h)
    if observer is not None:
        observer(s, h, X, Y, outcome)
    return outcome


def respond_to_estimate(own: int, request: Payload) -> Generator[RoundAction, Inbox, None]:
    """Neighbor side of an estimate, run for the two rounds after the request was heard"""
    excluded = request['excluded']
    helper = request['helper']
    in_slice = request['lo'] <= own <= request['hi'] and own not in excluded
    if in_slice and own != helper:
        yield transmit(Payload(LABEL, label=own))
    else:
        yield LISTEN
    if in_slice or own == helper:
        yield transmit(Payload(LABEL, label=own))
    else:
        yield LISTEN


def standby(own: int) -> Generator[RoundAction, Inbox, None]:
    """Listen forever, answering every estimate request heard"""
    while True:
        inbox = yield LISTEN
        if inbox.received and inbox.payload.kind == ESTIMATE:
            yield from respond_to_estimate(own, inbox.payload)


def lg_ceil(x: int) -> int:
    return max(0, math.ceil(math.log2(x))) if x > 1 else 0


def select_round_bound(N: int) -> int:
    """Upper bound on the rounds of one binary_select"""
    return 3 * (2 * lg_ceil(N) + 3)


@dataclass
class SelectResult:
    label: Optional[int]
    estimates: int
    outcomes: List[EstimateOutcome]

    @property
    def rounds(self) -> int:
        return 3 * self.estimates


def binary_select_process(s: int, h: int, X: ExclusionSet, n: int, N: int,
                          observer: Optional[EstimateObserver] = None) -> Generator[RoundAction, Inbox, SelectResult]:
    """
    Initiator side of Binary-Select

    Args:
        s: Initiator label
        h: Helper label, a discovered neighbor of s; must be in X
        X: Labels to exclude (the visited set)
        n: Network size, known to every node
        N: Label universe size

    Returns:
        SelectResult whose label is None iff every neighbor of s is in X
    """
    outcomes: List[EstimateOutcome] = []

    def ask(Y: LabelRange):
        outcome = yield from estimate_initiator(s, h, X, Y, observer)
        outcomes.append(outcome)
        return outcome

    outcome = yield from ask(LabelRange.universe(N))
    if outcome.kind is OutcomeKind.ZERO_NEW:
        return SelectResult(None, len(outcomes), outcomes)
    if outcome.kind is OutcomeKind.ONE_NEW:
        return SelectResult(outcome.label, len(outcomes), outcomes)

    # doubling: [1..2^i] from 2^i >= n toward N
    search = LabelRange(1, N)
    i = lg_ceil(n)
    while 2 ** i < N:
        prefix = LabelRange(1, 2 ** i)
        outcome = yield from ask(prefix)
        if outcome.kind is OutcomeKind.ONE_NEW:
            return SelectResult(outcome.label, len(outcomes), outcomes)
        if outcome.kind is OutcomeKind.TWO_PLUS:
            search = prefix
            break
        i += 1

    # halving; `search` holds at least two undiscovered neighbors
    while len(search) > 1:
        left, right = search.halves()
        outcome = yield from ask(left)
        if outcome.kind is OutcomeKind.ONE_NEW:
            return SelectResult(outcome.label, len(outcomes), outcomes)
        search = left if outcome.kind is OutcomeKind.TWO_PLUS else right

    outcome = yield from ask(search)
    if outcome.kind is not OutcomeKind.ONE_NEW:
        raise ModelViolation(f"range {search} was expected to hold an undiscovered neighbor of {s}")
    return SelectResult(outcome.label, len(outcomes), outcomes)


class PrimitiveRunner:
    """Run a single primitive on an otherwise silent network, for tests and the harness"""

    def __init__(self, topology: Topology, engine: Optional[RadioEngine] = None, stage: str = 'primitive'):
        self.logger = logging.getLogger(__name__)
        self.topology = topology
        self.engine = engine or RadioEngine(topology)
        self.stage = stage

    def _observer(self, s, h, X, Y, outcome):
        self.engine.annotate(event=ESTIMATE, initiator=s, helper=h,
                             excluded=Payload('x', x=X).digest, range=str(Y), outcome=str(outcome))
        self.logger.debug(f"estimate at {s} over {Y}: {outcome}")

    def _run(self, s: int, process) -> Tuple[object, int]:
        behaviors = []
        initiator = ProcessBehavior(process)
        for label in self.topology.labels:
            behaviors.append(initiator if label == s else ProcessBehavior(standby(label)))
        budget = select_round_bound(self.topology.N) + 3
        outcome = self.engine.run(behaviors, self.stage, budget, halt=lambda _: initiator.finished)
        if not initiator.finished:
            raise ModelViolation(f"primitive at {s} did not finish within {budget} rounds")
        return initiator.result, outcome.rounds

    def estimate(self, s: int, h: int, X: Iterable[int], Y: LabelRange) -> EstimateOutcome:
        result, _ = self._run(s, estimate_initiator(s, h, frozenset(X), Y, self._observer))
        return result

    def binary_select(self, s: int, h: int, X: Iterable[int]) -> SelectResult:
        X = frozenset(X)
        if h not in X:
            raise ValueError(f"helper {h} must belong to the exclusion set")
        result, rounds = self._run(
            s, binary_select_process(s, h, X, self.topology.n, self.topology.N, self._observer)
        )
        if rounds != result.rounds:
            raise ModelViolation(f"binary_select took {rounds} rounds for {result.estimates} estimates")
        return result


def estimate(topology: Topology, s: int, h: int, X: Iterable[int], Y: LabelRange,
             engine: Optional[RadioEngine] = None) -> EstimateOutcome:
    return PrimitiveRunner(topology, engine).estimate(s, h, X, Y)


def binary_select(topology: Topology, s: int, h: int, X: Iterable[int],
                  engine: Optional[RadioEngine] = None) -> SelectResult:
    return PrimitiveRunner(topology, engine).binary_select(s, h, X)
