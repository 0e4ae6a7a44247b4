def test_index(client):
    response = client.get('/')
    assert response.status_code == 200
    assert response.get_json()['service'] == 'radio-gossip'


def test_generate_topology(client):
    response = client.post('/api/topology', json={'family': 'grid', 'n': 9, 'width': 3, 'height': 3})
    assert response.status_code == 200
    data = response.get_json()
    assert data['n'] == 9
    assert data['N'] == 81
    assert data['diameter'] == 4
    assert data['topology'].startswith('9 2\n')


def test_generate_topology_rejects_bad_spec(client):
    response = client.post('/api/topology', json={'family': 'hexagon', 'n': 4})
    assert response.status_code == 400
    assert 'hexagon' in response.get_json()['error']


def test_node_limit(client):
    response = client.post('/api/topology', json={'family': 'path', 'n': 10_000})
    assert response.status_code == 400


def test_gossip_from_spec_is_stored(client):
    response = client.post('/api/gossip', json={
        'spec': {'family': 'caterpillar', 'n': 6, 'label_mode': 'random', 'seed': 3},
        'broadcast': 'sf',
    })
    assert response.status_code == 200
    run = response.get_json()
    assert run['complete'] is True
    assert run['violations'] == []
    assert run['family'] == 'caterpillar'
    assert run['token_passes'] == 10

    stored = client.get(f"/api/runs/{run['id']}")
    assert stored.status_code == 200
    assert stored.get_json()['total'] == run['total']


def test_gossip_from_topology_text(client):
    response = client.post('/api/gossip', json={
        'topology': '3 2\n5 9 2\n0 1\n1 2\n',
        'broadcast': 'roundrobin',
        'helper_variant': 'a',
    })
    assert response.status_code == 200
    run = response.get_json()
    assert run['leader'] == 9
    assert run['stage1'] == 108
    assert run['helper_variant'] == 'a'
    assert run['family'] is None


def test_gossip_rejects_disconnected_topology(client):
    response = client.post('/api/gossip', json={'topology': '4 2\n1 2 3 4\n0 1\n2 3\n'})
    assert response.status_code == 400


def test_gossip_rejects_unknown_broadcast(client):
    response = client.post('/api/gossip', json={'spec': {'family': 'path', 'n': 3}, 'broadcast': 'flood'})
    assert response.status_code == 400


def test_missing_run(client):
    assert client.get('/api/runs/999999').status_code == 404


def test_bench(client):
    response = client.post('/api/bench', json={'n': [4, 8], 'seeds': 1})
    assert response.status_code == 200
    data = response.get_json()
    assert len(data['records']) == 6
    assert data['max_ratio'] > 0
    assert {row['n'] for row in data['records']} == {4, 8}
