from collections import deque
from fractions import Fraction

import pytest

from broadcast import BroadcastKind, lglg, make_broadcast, oracle_bound, run_broadcast
from conftest import path_topology
from radio_engine import Payload, RadioEngine, build_topology
from topology_generator import TopologySpec, gen_topology

MESSAGE = Payload('bcast', body='hello')


def bfs_layers(topology, sources):
    dist = {topology.index_of[s]: 0 for s in sources}
    queue = deque(dist)
    while queue:
        u = queue.popleft()
        for v in topology.neighbors[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def test_round_robin_budget():
    assert make_broadcast('roundrobin', 4, 4).nb_bound == 16


def test_oracle_budget():
    primitive = make_broadcast('oracle', 16, 16 ** 3)
    assert primitive.nb_bound == 128
    assert make_broadcast('oracle', 16, 16 ** 3, c_rb=Fraction(1, 2)).nb_bound == 64


def test_lglg_guard():
    assert lglg(2) == 1
    assert lglg(16) == 2
    assert oracle_bound(1) == 1


def test_selective_flood_budget_uses_family_size():
    primitive = make_broadcast('sf', 4, 16)
    assert primitive.kind is BroadcastKind.SELECTIVE_FLOOD
    assert primitive.nb_bound == 4 * primitive.family.size


def test_make_broadcast_rejects_bad_sizes():
    with pytest.raises(ValueError):
        make_broadcast('roundrobin', 5, 4)
    with pytest.raises(ValueError):
        make_broadcast('flood', 4, 4)


@pytest.mark.parametrize('kind', ['roundrobin', 'sf', 'oracle'])
def test_empty_source_set_informs_nobody(kind):
    topology = path_topology(4)
    primitive = make_broadcast(kind, 4, 16)
    outcome = run_broadcast(primitive, topology, [], MESSAGE)
    assert outcome.informed == frozenset()
    assert outcome.rounds == primitive.nb_bound


def test_round_robin_on_path_follows_bfs_layers():
    topology = path_topology(5)
    primitive = make_broadcast('roundrobin', 5, 25)
    engine = RadioEngine(topology)
    outcome = run_broadcast(primitive, topology, [1], MESSAGE, engine=engine)
    assert outcome.informed == frozenset(topology.labels)
    assert outcome.rounds == primitive.nb_bound

    # labels increase along the path, so one pass carries the message end to end
    first_rx = {}
    for record in engine.trace:
        for listener, _ in record.rx:
            if listener != 1:
                first_rx.setdefault(listener, record.round)
    layers = bfs_layers(topology, [1])
    order = sorted(first_rx, key=first_rx.get)
    assert order == sorted(order, key=lambda label: layers[topology.index_of[label]])
    assert max(first_rx.values()) < primitive.period


@pytest.mark.parametrize('kind', ['roundrobin', 'sf', 'oracle'])
def test_multi_source_on_grid(kind):
    topology = gen_topology(TopologySpec.grid(4, 4, label_mode='random', seed=5))
    primitive = make_broadcast(kind, topology.n, topology.N)
    sources = topology.labels[:3]
    outcome = run_broadcast(primitive, topology, sources, MESSAGE)
    assert outcome.informed == frozenset(topology.labels)
    assert outcome.rounds == primitive.nb_bound


def test_recorded_and_fast_forwarded_runs_agree():
    topology = gen_topology(TopologySpec('random-connected', 12, label_mode='random', seed=2, p=0.3))
    primitive = make_broadcast('sf', topology.n, topology.N)
    recorded = run_broadcast(primitive, topology, [topology.labels[0]], MESSAGE, RadioEngine(topology))
    quick = run_broadcast(primitive, topology, [topology.labels[0]], MESSAGE, RadioEngine(topology, record=False))
    assert recorded.informed == quick.informed
    assert recorded.rounds == quick.rounds == primitive.nb_bound


def test_oracle_round_is_flagged():
    topology = path_topology(4)
    engine = RadioEngine(topology)
    primitive = make_broadcast('oracle', 4, 16)
    outcome = run_broadcast(primitive, topology, [2], MESSAGE, engine=engine)
    assert outcome.informed == frozenset(topology.labels)
    assert outcome.first_heard == {}
    oracle_records = [r for r in engine.trace.stored_records if r.oracle]
    assert len(oracle_records) == 1
    assert dict(oracle_records[0].rx) == {1: 2, 3: 2, 4: 3}


def test_informed_set_is_reachable_closure():
    topology = build_topology(4, 2, [(0, 1), (2, 3)], [1, 2, 3, 4])
    for kind in ('roundrobin', 'sf', 'oracle'):
        primitive = make_broadcast(kind, 4, 16)
        outcome = run_broadcast(primitive, topology, [1], MESSAGE, RadioEngine(topology, record=False))
        assert outcome.informed == frozenset({1, 2})
