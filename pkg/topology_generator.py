import hashlib
import json
import logging
import math
import random
from dataclasses import asdict, dataclass
from typing import List, Optional, Tuple

import networkx as nx

from radio_engine import Topology, build_topology

logger = logging.getLogger(__name__)

FAMILIES = ('path', 'cycle', 'star', 'grid', 'balanced-binary-tree', 'caterpillar', 'random-connected')
DETERMINISTIC_FAMILIES = FAMILIES[:-1]
LABEL_MODES = ('consecutive', 'random')


class TopologySpecError(ValueError):
    pass


@dataclass(frozen=True)
class TopologySpec:
    """Recipe for one labeled network; the same spec always yields the same Topology"""
    family: str
    n: int
    c: int = 2
    label_mode: str = 'consecutive'
    seed: int = 0
    p: float = 0.1
    width: Optional[int] = None
    height: Optional[int] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise TopologySpecError(f"Unknown family '{self.family}', expected one of {FAMILIES}")
        if self.label_mode not in LABEL_MODES:
            raise TopologySpecError(f"Unknown label mode '{self.label_mode}'")
        if self.n < 1:
            raise TopologySpecError(f"n must be positive, got {self.n}")
        if self.c < 1:
            raise TopologySpecError(f"c must be at least 1, got {self.c}")
        if not 0.0 <= self.p <= 1.0:
            raise TopologySpecError(f"edge probability must lie in [0, 1], got {self.p}")
        if self.family == 'grid' and (self.width is not None or self.height is not None):
            if self.width is None or self.height is None or self.width < 1 or self.height < 1:
                raise TopologySpecError("grid needs both a positive width and a positive height")
            if self.width * self.height != self.n:
                raise TopologySpecError(f"grid {self.width}x{self.height} does not have {self.n} nodes")

    @classmethod
    def grid(cls, width: int, height: int, **kwargs) -> 'TopologySpec':
        return cls('grid', width * height, width=width, height=height, **kwargs)

    @property
    def name(self) -> str:
        if self.family == 'grid':
            w, h = self.grid_shape()
            return f"grid({w},{h})"
        if self.family == 'random-connected':
            return f"random-connected({self.p})"
        return self.family

    def grid_shape(self) -> Tuple[int, int]:
        if self.width is not None:
            return self.width, self.height
        # most square factorization; primes degrade to a 1 x n path
        w = int(math.isqrt(self.n))
        while self.n % w:
            w -= 1
        return self.n // w, w

    def digest(self) -> str:
        data = json.dumps(asdict(self), sort_keys=True).encode('utf-8')
        return hashlib.blake2b(data, digest_size=8).hexdigest()


def _random_tree(n: int, rng: random.Random) -> nx.Graph:
    if n <= 2:
        return nx.path_graph(n)
    sequence = [rng.randrange(n) for _ in range(n - 2)]
    return nx.from_prufer_sequence(sequence)


def _random_connected(spec: TopologySpec, max_attempts: int = 20) -> nx.Graph:
    g = nx.empty_graph(spec.n)
    for attempt in range(max_attempts):
        g = nx.gnp_random_graph(spec.n, spec.p, seed=spec.seed + attempt)
        if spec.n == 1 or nx.is_connected(g):
            return g
    logger.debug(f"gnp({spec.n}, {spec.p}) stayed disconnected; adding a random spanning tree")
    g.add_edges_from(_random_tree(spec.n, random.Random(spec.seed)).edges())
    return g


def _caterpillar(n: int) -> nx.Graph:
    """Spine of ceil(n/2) nodes with one leg hanging from each of the first floor(n/2)"""
    spine = (n + 1) // 2
    g = nx.path_graph(spine)
    for i in range(n - spine):
        g.add_edge(i, spine + i)
    return g


def _graph_for(spec: TopologySpec) -> nx.Graph:
    n = spec.n
    if spec.family == 'path':
        return nx.path_graph(n)
    if spec.family == 'cycle':
        return nx.cycle_graph(n) if n >= 3 else nx.path_graph(n)
    if spec.family == 'star':
        return nx.star_graph(n - 1) if n > 1 else nx.empty_graph(1)
    if spec.family == 'grid':
        w, h = spec.grid_shape()
        return nx.convert_node_labels_to_integers(nx.grid_2d_graph(h, w), ordering='sorted')
    if spec.family == 'balanced-binary-tree':
        return nx.full_rary_tree(2, n)
    if spec.family == 'caterpillar':
        return _caterpillar(n)
    return _random_connected(spec)


def _labels_for(spec: TopologySpec) -> List[int]:
    if spec.label_mode == 'consecutive':
        return list(range(1, spec.n + 1))
    rng = random.Random(f"labels:{spec.seed}")
    return rng.sample(range(1, spec.n ** spec.c + 1), spec.n)


def gen_topology(spec: TopologySpec) -> Topology:
    """
    Generate a connected labeled network

    Args:
        spec: Family, size, label mode and seed

    Returns:
        Topology over node indices 0..n-1
    """
    g = _graph_for(spec)
    if g.number_of_nodes() != spec.n:
        raise TopologySpecError(f"{spec.name} produced {g.number_of_nodes()} nodes instead of {spec.n}")
    if spec.n > 1 and not nx.is_connected(g):
        raise TopologySpecError(f"{spec.name} with n={spec.n} is not connected")
    edges = sorted((min(u, v), max(u, v)) for u, v in g.edges())
    return build_topology(spec.n, spec.c, edges, _labels_for(spec))
