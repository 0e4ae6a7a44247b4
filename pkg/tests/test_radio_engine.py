import json

import numpy as np
import pytest

from conftest import path_topology, star_topology
from radio_engine import (
    IDLE, LISTEN, DuplicateLabelError, ExecutionTrace, IdleBehavior, LabelCountError, LabelOutOfUniverseError,
    NodeIndexError, Payload, ProcessBehavior, RadioEngine, SelfLoopError, TopologyFormatError,
    build_topology, is_connected, parse_topology, step, transmit,
)


def hello(label):
    return transmit(Payload('hello', origin=label))


def test_single_transmitter_is_delivered():
    topology = star_topology(4)
    inboxes = step(topology, [LISTEN, hello(2), LISTEN, LISTEN])
    assert inboxes[0].received
    assert inboxes[0].sender == 2
    assert inboxes[0].payload['origin'] == 2
    # leaves are not adjacent to each other
    assert not inboxes[2].received
    assert not inboxes[3].received


def test_collision_looks_like_silence():
    topology = star_topology(4)
    collided = step(topology, [LISTEN, hello(2), hello(3), LISTEN])
    silent = step(topology, [LISTEN, LISTEN, LISTEN, LISTEN])
    assert not collided[0].received
    assert collided[0] == silent[0]


def test_transmitter_never_receives():
    topology = path_topology(2)
    inboxes = step(topology, [hello(1), hello(2)])
    assert not inboxes[0].received
    assert not inboxes[1].received


def test_idle_node_receives_nothing():
    topology = path_topology(2)
    inboxes = step(topology, [hello(1), IDLE])
    assert not inboxes[1].received


def test_sender_is_authenticated():
    topology = build_topology(3, 2, [(0, 1), (1, 2)], [9, 4, 7])
    inboxes = step(topology, [LISTEN, LISTEN, hello(999)])
    # the label comes from the topology, not from the payload
    assert inboxes[1].sender == 7


def test_collision_at_one_listener_delivery_at_another():
    # 0 - 1 - 2 - 3: nodes 0 and 2 transmit; 1 hears both, 3 hears only 2
    topology = path_topology(4)
    inboxes = step(topology, [hello(1), LISTEN, hello(3), LISTEN])
    assert not inboxes[1].received
    assert inboxes[3].sender == 3


def test_step_masks_matches_step():
    topology = path_topology(5)
    engine = RadioEngine(topology)
    tx = np.array([True, False, False, True, False])
    senders = engine.step_masks(tx, ~tx, Payload('x'))
    inboxes = step(topology, [transmit(Payload('x')) if t else LISTEN for t in tx])
    expected = [topology.index_of[b.sender] if b.received else -1 for b in inboxes]
    assert list(senders) == expected


@pytest.mark.parametrize('n, c, edges, labels, error', [
    (3, 2, [(0, 1)], [1, 1, 2], DuplicateLabelError),
    (3, 2, [(0, 1)], [1, 2, 10], LabelOutOfUniverseError),
    (3, 2, [(0, 1)], [0, 1, 2], LabelOutOfUniverseError),
    (3, 2, [(1, 1)], [1, 2, 3], SelfLoopError),
    (3, 2, [(0, 3)], [1, 2, 3], NodeIndexError),
    (3, 2, [(0, 1)], [1, 2], LabelCountError),
])
def test_build_topology_rejects_bad_input(n, c, edges, labels, error):
    with pytest.raises(error):
        build_topology(n, c, edges, labels)


def test_edges_are_symmetrized():
    topology = build_topology(3, 1, [(1, 0), (0, 1), (2, 1)], [1, 2, 3])
    assert topology.edges == [(0, 1), (1, 2)]
    assert topology.are_adjacent(2, 1)
    assert topology.neighbor_labels(2) == (1, 3)


def test_connectivity():
    assert is_connected(path_topology(4))
    assert not is_connected(build_topology(4, 2, [(0, 1), (2, 3)], [1, 2, 3, 4]))
    assert build_topology(4, 2, [(0, 1), (2, 3)], [1, 2, 3, 4]).diameter is None
    assert build_topology(1, 2, [], [1]).diameter == 0


def test_parse_topology_with_comments():
    text = "# a path\n3 2\n5 1 9\n0 1\n1 2  # tail\n"
    topology = parse_topology(text)
    assert topology.labels == (5, 1, 9)
    assert topology.N == 9
    assert parse_topology(topology.to_text()).digest() == topology.digest()


@pytest.mark.parametrize('text', ["", "3 2\n", "3 2\n1 2 3\n0 1 2\n", "x 2\n1 2 3\n"])
def test_parse_topology_rejects_malformed(text):
    with pytest.raises(TopologyFormatError):
        parse_topology(text)


def test_sparse_trace_expands_to_dense_rounds():
    topology = path_topology(3)
    engine = RadioEngine(topology)
    engine.set_stage('a')
    engine.skip(2)
    engine.step([hello(1), LISTEN, LISTEN])
    engine.set_stage('b')
    engine.skip(3)

    trace = engine.trace
    assert len(trace) == 6
    assert len(trace.stored_records) == 1
    records = list(trace)
    assert [r.round for r in records] == list(range(6))
    assert [r.stage for r in records] == ['a', 'a', 'a', 'b', 'b', 'b']
    assert records[2].rx == ((2, 1),)
    assert trace.stage_rounds == {'a': 3, 'b': 3}

    lines = [json.loads(line) for line in trace.export_lines()]
    assert lines[2]['tx'][0].startswith('1:')
    assert lines[2]['rx'] == ['2:1']


def test_unrecorded_trace_keeps_counts_only():
    topology = path_topology(2)
    engine = RadioEngine(topology, record=False)
    engine.step([hello(1), LISTEN])
    assert engine.round == 1
    assert engine.trace.stored_records == []


def test_annotation_attaches_to_previous_round():
    topology = path_topology(2)
    engine = RadioEngine(topology)
    engine.step([hello(1), LISTEN])
    engine.annotate(event='mark')
    assert list(engine.trace)[0].notes == ({'event': 'mark'},)


def test_payload_encoding_is_canonical():
    a = Payload('token', visited={3, 1, 2}, rumors={'2': 'aa', '1': 'bb'})
    b = Payload('token', rumors={'1': 'bb', '2': 'aa'}, visited=[1, 2, 3])
    assert a == b
    assert a.digest == b.digest
    assert a['visited'] == [1, 2, 3]


def ping_then_listen(label):
    yield hello(label)
    inbox = yield LISTEN
    return inbox.sender


def test_run_drives_processes_until_halt():
    topology = path_topology(2)
    engine = RadioEngine(topology)
    first = ProcessBehavior(ping_then_listen(1))
    second = ProcessBehavior(ping_then_listen(2))
    # both transmit in round 0, both listen in round 1
    outcome = engine.run([first, second], 'ping', 10, halt=lambda _: first.finished and second.finished)
    assert outcome.rounds == 2
    assert not outcome.exhausted
    assert first.result is None and second.result is None


def test_run_reports_exhausted_budget():
    topology = path_topology(2)
    engine = RadioEngine(topology)

    def forever():
        while True:
            yield LISTEN

    outcome = engine.run([ProcessBehavior(forever()), ProcessBehavior(forever())], 'idle', 5,
                         halt=lambda _: False)
    assert outcome.rounds == 5
    assert outcome.exhausted
    assert engine.trace.stage_rounds == {'idle': 5}


def test_all_idle_run_spends_its_budget():
    topology = star_topology(4)
    engine = RadioEngine(topology)
    outcome = engine.run([IdleBehavior() for _ in range(topology.n)], 'idle', 5)
    assert outcome.rounds == 5
    assert outcome.exhausted
    assert len(engine.trace) == 5
    assert [record.tx for record in engine.trace] == [()] * 5
    assert all(engine.trace.stage_of(r) == 'idle' for r in range(5))
    with pytest.raises(IndexError):
        engine.trace.stage_of(5)


def test_stage_of_follows_stage_spans():
    topology = path_topology(2)
    engine = RadioEngine(topology)
    engine.run([IdleBehavior(), IdleBehavior()], 'first', 2)
    engine.set_stage('second')
    engine.step([hello(1), LISTEN])
    engine.run([IdleBehavior(), IdleBehavior()], 'first', 1)
    assert [engine.trace.stage_of(r) for r in range(4)] == ['first', 'first', 'second', 'first']


def test_trace_digest_is_deterministic():
    def run():
        topology = path_topology(3)
        engine = RadioEngine(topology)
        engine.step([hello(1), LISTEN, hello(3)])
        engine.skip(4)
        return engine.trace.digest()

    assert run() == run()
    assert ExecutionTrace().digest() != run()
