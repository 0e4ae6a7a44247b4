import logging
from flask import request, jsonify
from app import app, db
from models import GossipRun, BenchRun
from benchmark import BenchFailure, bench_suite
from config import SimulationConfig
from gossip_protocol import GossipError, GossipSession
from radio_engine import TopologyError, parse_topology
from selective_family import SelectiveFamilyError
from topology_generator import TopologySpec, TopologySpecError, gen_topology
from verification import check_run

SPEC_FIELDS = ('family', 'n', 'c', 'label_mode', 'seed', 'p', 'width', 'height')
DOMAIN_ERRORS = (TopologyError, TopologySpecError, GossipError, SelectiveFamilyError, BenchFailure,
                 ValueError, TypeError, KeyError)

def simulation_config(overrides=None):
    """Flask config plus per-request overrides"""
    config = SimulationConfig.from_mapping(app.config)
    overrides = overrides or {}
    return config.replace(
        broadcast=overrides.get('broadcast'),
        c_rb=overrides.get('c_rb'),
        helper_variant=overrides.get('helper_variant'),
    )

def spec_from(data):
    fields = {key: data[key] for key in SPEC_FIELDS if key in data}
    return TopologySpec(**fields)

def check_size(n):
    limit = app.config['MAX_API_NODES']
    if n > limit:
        raise ValueError(f"n={n} exceeds the API limit of {limit} nodes")

@app.route('/')
def index():
    """Service description"""
    return jsonify({
        'service': 'radio-gossip',
        'broadcast': app.config['GOSSIP_BROADCAST'],
        'endpoints': ['POST /api/topology', 'POST /api/gossip', 'GET /api/runs/<id>', 'POST /api/bench'],
    })

@app.route('/api/topology', methods=['POST'])
def generate_topology():
    """Generate a topology and return it in the file format"""
    try:
        spec = spec_from(request.get_json(force=True) or {})
        check_size(spec.n)
        topology = gen_topology(spec)
        return jsonify({
            'spec': spec.digest(),
            'n': topology.n,
            'N': topology.N,
            'diameter': topology.diameter,
            'topology': topology.to_text(),
        })
    except DOMAIN_ERRORS as e:
        return jsonify({'error': str(e)}), 400
    except Exception as e:
        logging.error(f"Error generating topology: {str(e)}")
        return jsonify({'error': 'Failed to generate topology'}), 500

@app.route('/api/gossip', methods=['POST'])
def run_gossip():
    """Run one simulation, check it with the oracles and store the summary"""
    try:
        data = request.get_json(force=True) or {}
        if 'topology' in data:
            topology = parse_topology(data['topology'])
            family = None
        else:
            spec = spec_from(data.get('spec', {}))
            check_size(spec.n)
            topology = gen_topology(spec)
            family = spec.name
        check_size(topology.n)

        config = simulation_config(data).replace(record_trace=False)
        result = GossipSession(topology, config).run()
        verdict = check_run(topology, result)

        run = GossipRun(
            topology_digest=topology.digest(),
            n=topology.n,
            c=topology.c,
            broadcast=config.broadcast,
            helper_variant=config.helper_variant,
            summary=result.summary(),
            complete=verdict.valid,
            violations=verdict.violations,
            family=family,
        )
        db.session.add(run)
        db.session.commit()
        return jsonify(run.to_dict())

    except DOMAIN_ERRORS as e:
        return jsonify({'error': str(e)}), 400
    except Exception as e:
        logging.error(f"Error running gossip: {str(e)}")
        return jsonify({'error': 'Failed to run gossip'}), 500

@app.route('/api/runs/<int:run_id>')
def view_run(run_id):
    """Return a stored run"""
    run = db.get_or_404(GossipRun, run_id)
    return jsonify(run.to_dict())

@app.route('/api/bench', methods=['POST'])
def run_bench():
    """Run a small scaling sweep and store its records"""
    try:
        data = request.get_json(force=True) or {}
        ns = [int(n) for n in data.get('n', [8, 16])]
        for n in ns:
            check_size(n)
        c = int(data.get('c', 2))
        config = simulation_config(data).replace(baseline_path='')
        broadcast = data.get('broadcast', 'oracle')
        summary = bench_suite(ns, c, broadcast, range(int(data.get('seeds', 1))), config=config)

        rows = [record.to_row() for record in summary.records]
        bench = BenchRun(broadcast=broadcast, c=c, records=rows, max_ratio=summary.max_ratio,
                         passed=summary.passed)
        db.session.add(bench)
        db.session.commit()
        return jsonify({'id': bench.id, 'max_ratio': summary.max_ratio, 'passed': summary.passed,
                        'notes': summary.notes, 'records': rows})

    except DOMAIN_ERRORS as e:
        return jsonify({'error': str(e)}), 400
    except Exception as e:
        logging.error(f"Error running benchmark: {str(e)}")
        return jsonify({'error': 'Failed to run benchmark'}), 500

@app.errorhandler(413)
def too_large(e):
    return jsonify({'error': 'Request too large'}), 413
