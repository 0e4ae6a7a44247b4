import os
import sys
import tempfile

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

# app.py reads DATABASE_URL at import time
_DB_DIR = tempfile.mkdtemp(prefix='radiogossip-test-')
os.environ.setdefault('DATABASE_URL', f"sqlite:///{os.path.join(_DB_DIR, 'test.db')}")
os.environ.setdefault('LOG_LEVEL', 'WARNING')

from radio_engine import build_topology  # noqa: E402


def path_topology(n, c=2, labels=None):
    labels = labels or list(range(1, n + 1))
    return build_topology(n, c, [(i, i + 1) for i in range(n - 1)], labels)


def star_topology(n, c=2, labels=None):
    labels = labels or list(range(1, n + 1))
    return build_topology(n, c, [(0, i) for i in range(1, n)], labels)


@pytest.fixture
def client():
    from app import app
    app.config['TESTING'] = True
    with app.test_client() as client:
        yield client
