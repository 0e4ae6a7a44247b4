import json

import pytest
from click.testing import CliRunner

from cli import gossip_cli
from radio_engine import load_topology
from selective_family import load_family


@pytest.fixture
def runner():
    return CliRunner()


def last_json(output):
    return json.loads(output.strip().splitlines()[-1])


def test_gen_prints_topology(runner):
    result = runner.invoke(gossip_cli, ['gen', '--family', 'path', '--n', '3'])
    assert result.exit_code == 0
    assert result.output.splitlines() == ['3 2', '1 2 3', '0 1', '1 2']


def test_gen_writes_file(runner, tmp_path):
    out = tmp_path / 'grid.txt'
    result = runner.invoke(gossip_cli, ['gen', '--family', 'grid', '--n', '9', '--width', '3', '--height', '3',
                                        '--label-mode', 'random', '--seed', '4', '--out', str(out)])
    assert result.exit_code == 0
    topology = load_topology(str(out))
    assert topology.n == 9
    assert topology.diameter == 4


def test_gen_rejects_bad_grid(runner):
    result = runner.invoke(gossip_cli, ['gen', '--family', 'grid', '--n', '9', '--width', '2', '--height', '4'])
    assert result.exit_code == 2


@pytest.mark.parametrize('broadcast', ['roundrobin', 'sf', 'oracle'])
def test_run_reports_valid_summary(runner, broadcast):
    result = runner.invoke(gossip_cli, ['run', '--family', 'star', '--n', '5', '--broadcast', broadcast])
    assert result.exit_code == 0, result.output
    record = last_json(result.output)
    assert record['valid'] is True
    assert record['leader'] == 5
    assert record['token_passes'] == 8
    assert record['total'] == record['stage1'] + record['stage2'] + record['stage3'] + record['stage4']


def test_run_from_topology_file_with_trace(runner, tmp_path):
    topology = tmp_path / 'path.txt'
    topology.write_text('4 2\n3 9 1 12\n0 1\n1 2\n2 3\n')
    trace = tmp_path / 'trace.jsonl'
    result = runner.invoke(gossip_cli, ['run', '--topology', str(topology), '--broadcast', 'sf',
                                        '--trace', str(trace)])
    assert result.exit_code == 0, result.output
    assert last_json(result.output)['leader'] == 12
    lines = trace.read_text().splitlines()
    assert lines
    assert 'round' in json.loads(lines[0])


def test_run_rejects_disconnected_topology(runner, tmp_path):
    topology = tmp_path / 'split.txt'
    topology.write_text('4 2\n1 2 3 4\n0 1\n2 3\n')
    result = runner.invoke(gossip_cli, ['run', '--topology', str(topology)])
    assert result.exit_code != 0


def test_run_rejects_unknown_broadcast(runner):
    result = runner.invoke(gossip_cli, ['run', '--broadcast', 'flood'])
    assert result.exit_code == 2


def test_verify_small_corpus(runner):
    result = runner.invoke(gossip_cli, ['verify', '--sizes', '1,2,3', '--traces', '--estimate-cases', '50'],
                           env={'GOSSIP_RANDOM_PER_N': '1'})
    assert result.exit_code == 0, result.output
    assert 'corpus: 117 runs, 0 failures' in result.output
    assert 'estimate oracle: 50 cases, 0 mismatches' in result.output


def test_verify_rejects_bad_sizes(runner):
    result = runner.invoke(gossip_cli, ['verify', '--sizes', 'eight'])
    assert result.exit_code == 2


def test_bench_writes_csv_and_baseline(runner, tmp_path):
    out = tmp_path / 'bench.csv'
    baseline = tmp_path / 'baseline.json'
    args = ['bench', '--n', '8', '--n', '16', '--seeds', '1', '--baseline', str(baseline), '--out', str(out)]
    result = runner.invoke(gossip_cli, args)
    assert result.exit_code == 0, result.output
    assert 'passed=True' in result.output
    assert out.read_text().startswith('spec,family,seed,broadcast,n,N,')
    assert 'oracle:c2:crb1' in json.loads(baseline.read_text())

    again = runner.invoke(gossip_cli, args)
    assert again.exit_code == 0, again.output


def test_bench_rejects_single_node(runner):
    result = runner.invoke(gossip_cli, ['bench', '--n', '1'])
    assert result.exit_code == 2


def test_family_build_and_verify(runner, tmp_path):
    out = tmp_path / 'family.txt'
    result = runner.invoke(gossip_cli, ['family', 'build', '--k', '3', '--N', '9', '--out', str(out)])
    assert result.exit_code == 0, result.output
    family = load_family(str(out))
    assert (family.k, family.N) == (3, 9)

    checked = runner.invoke(gossip_cli, ['family', 'verify', str(out)])
    assert checked.exit_code == 0
    assert checked.output.startswith('valid (exhaustive')


def test_family_verify_reports_counterexample(runner, tmp_path):
    path = tmp_path / 'broken.txt'
    path.write_text('2 3 2\n1 2\n3\n')
    result = runner.invoke(gossip_cli, ['family', 'verify', str(path)])
    assert result.exit_code == 1
    assert 'invalid: counterexample [1, 2]' in result.output


def test_family_verify_rejects_malformed_file(runner, tmp_path):
    path = tmp_path / 'bad.txt'
    path.write_text('2 3 5\n1 2\n')
    result = runner.invoke(gossip_cli, ['family', 'verify', str(path)])
    assert result.exit_code == 2


def test_family_sizes_reports_each_instance(runner):
    result = runner.invoke(gossip_cli, ['family', 'sizes', '--instance', '2,8', '--instance', '3,16'])
    assert result.exit_code == 0, result.output
    lines = result.output.strip().splitlines()
    assert lines[0].startswith('f = ')
    assert len(lines) == 3
    assert 'ratio=1.00' in lines[1]
    assert 'N=   16' in lines[2]


def test_family_sizes_rejects_bad_instance(runner):
    result = runner.invoke(gossip_cli, ['family', 'sizes', '--instance', '2-8'])
    assert result.exit_code == 2
