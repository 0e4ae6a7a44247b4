from app import db
from datetime import datetime

class GossipRun(db.Model):
    __tablename__ = 'gossip_run'

    id = db.Column(db.Integer, primary_key=True)
    topology_digest = db.Column(db.String(32), nullable=False)
    family = db.Column(db.String(64))  # generator family, None for uploaded topologies
    n = db.Column(db.Integer, nullable=False)
    c = db.Column(db.Integer, nullable=False)
    broadcast = db.Column(db.String(16), nullable=False)  # roundrobin, sf, oracle
    helper_variant = db.Column(db.String(1), nullable=False)
    leader = db.Column(db.Integer, nullable=False)

    # Rounds per stage
    stage1 = db.Column(db.Integer, nullable=False)
    stage2 = db.Column(db.Integer, nullable=False)
    stage3 = db.Column(db.Integer, nullable=False)
    stage4 = db.Column(db.Integer, nullable=False)
    total = db.Column(db.Integer, nullable=False)
    token_passes = db.Column(db.Integer, nullable=False)

    complete = db.Column(db.Boolean, nullable=False)
    violations = db.Column(db.JSON)  # oracle clauses that failed
    created_at = db.Column(db.DateTime, default=datetime.utcnow)

    def __init__(self, topology_digest, n, c, broadcast, helper_variant, summary, complete,
                 violations=None, family=None):
        self.topology_digest = topology_digest
        self.family = family
        self.n = n
        self.c = c
        self.broadcast = broadcast
        self.helper_variant = helper_variant
        self.leader = summary['leader']
        self.stage1 = summary['stage1']
        self.stage2 = summary['stage2']
        self.stage3 = summary['stage3']
        self.stage4 = summary['stage4']
        self.total = summary['total']
        self.token_passes = summary['token_passes']
        self.complete = complete
        self.violations = violations or []

    def to_dict(self):
        return {
            'id': self.id,
            'topology': self.topology_digest,
            'family': self.family,
            'n': self.n,
            'c': self.c,
            'broadcast': self.broadcast,
            'helper_variant': self.helper_variant,
            'leader': self.leader,
            'stage1': self.stage1,
            'stage2': self.stage2,
            'stage3': self.stage3,
            'stage4': self.stage4,
            'total': self.total,
            'token_passes': self.token_passes,
            'complete': self.complete,
            'violations': self.violations,
            'created_at': self.created_at.isoformat() if self.created_at else None,
        }

    def __repr__(self):
        return f'<GossipRun {self.id} n={self.n} {self.broadcast}>'

class BenchRun(db.Model):
    __tablename__ = 'bench_run'

    id = db.Column(db.Integer, primary_key=True)
    broadcast = db.Column(db.String(16), nullable=False)
    c = db.Column(db.Integer, nullable=False)
    records = db.Column(db.JSON)  # one row per (family, n, seed)
    max_ratio = db.Column(db.Float, nullable=False)
    passed = db.Column(db.Boolean, nullable=False)
    created_at = db.Column(db.DateTime, default=datetime.utcnow)

    def __init__(self, broadcast, c, records, max_ratio, passed):
        self.broadcast = broadcast
        self.c = c
        self.records = records
        self.max_ratio = max_ratio
        self.passed = passed

    def __repr__(self):
        return f'<BenchRun {self.id} {self.broadcast} max_ratio={self.max_ratio:.3f}>'
