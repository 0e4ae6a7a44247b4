"""
(k, N)-selective families: ordered lists of subsets of [1..N] such that every
nonempty S with |S| <= k meets some listed set in exactly one element.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

_NO_SLOTS = np.zeros(0, dtype=np.int64)
# witness x label cells the greedy builder may hold in memory
_GREEDY_CELLS = 40_000_000


class SelectiveFamilyError(Exception):
    pass


class ConstructionError(SelectiveFamilyError):
    pass


class ExhaustiveCapExceeded(SelectiveFamilyError):
    pass


class FamilyFormatError(SelectiveFamilyError):
    pass


@dataclass(frozen=True)
class SelectiveFamily:
    k: int
    N: int
    sets: Tuple[FrozenSet[int], ...]
    method: str = 'given'

    @property
    def size(self) -> int:
        return len(self.sets)

    def matrix(self) -> np.ndarray:
        """Boolean membership matrix of shape (size, N + 1); column 0 is unused"""
        m = np.zeros((self.size, self.N + 1), dtype=bool)
        for j, s in enumerate(self.sets):
            if s:
                m[j, list(s)] = True
        return m

    @cached_property
    def membership(self) -> Dict[int, np.ndarray]:
        """Inverse index: label -> sorted indices of the sets containing it"""
        slots: Dict[int, List[int]] = {}
        for j, s in enumerate(self.sets):
            for label in s:
                slots.setdefault(label, []).append(j)
        return {label: np.array(js, dtype=np.int64) for label, js in slots.items()}

    def slots_of(self, label: int) -> List[int]:
        """Indices of the sets containing `label`, in schedule order"""
        return [int(j) for j in self.membership.get(label, _NO_SLOTS)]

    def selects(self, subset: Iterable[int]) -> bool:
        """True iff some set meets `subset` in exactly one element"""
        parts = [self.membership.get(x, _NO_SLOTS) for x in subset]
        if not parts or self.size == 0:
            return False
        counts = np.bincount(np.concatenate(parts), minlength=self.size)
        return bool((counts == 1).any())

    def to_text(self) -> str:
        lines = [f"{self.k} {self.N} {self.size}"]
        lines.extend(' '.join(str(x) for x in sorted(s)) for s in self.sets)
        return '\n'.join(lines) + '\n'

    def __repr__(self):
        return f'<SelectiveFamily k={self.k} N={self.N} size={self.size} method={self.method}>'


def parse_family(text: str) -> SelectiveFamily:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise FamilyFormatError("family file is empty")
    try:
        k, N, size = (int(x) for x in lines[0].split())
        sets = [frozenset(int(x) for x in line.split()) for line in lines[1:1 + size]]
    except ValueError as e:
        raise FamilyFormatError(f"malformed family file: {e}") from e
    if len(sets) != size:
        raise FamilyFormatError(f"header announces {size} sets, found {len(sets)}")
    for s in sets:
        if any(x < 1 or x > N for x in s):
            raise FamilyFormatError(f"set {sorted(s)} is not a subset of [1..{N}]")
    return SelectiveFamily(k, N, tuple(sets), method='file')


def load_family(path: str) -> SelectiveFamily:
    with open(path, 'r', encoding='utf-8') as handle:
        return parse_family(handle.read())


def witness_count(k: int, N: int) -> int:
    """Number of nonempty subsets of [1..N] with at most k elements"""
    return sum(math.comb(N, i) for i in range(1, min(k, N) + 1))


@dataclass(frozen=True)
class Verdict:
    valid: bool
    mode: str
    checked: int
    counterexample: Optional[Tuple[int, ...]] = None

    @property
    def is_proof(self) -> bool:
        return self.mode == 'exhaustive'


def _chunks(iterable: Iterable, size: int) -> Iterator[list]:
    it = iter(iterable)
    while True:
        chunk = list(itertools.islice(it, size))
        if not chunk:
            return
        yield chunk


def _selected(matrix: np.ndarray, subsets: np.ndarray) -> np.ndarray:
    """For each row of `subsets` (labels), whether some family set meets it exactly once"""
    if matrix.shape[0] == 0:
        return np.zeros(len(subsets), dtype=bool)
    counts = matrix[:, subsets].sum(axis=2)
    return (counts == 1).any(axis=0)


def verify_selective(family: SelectiveFamily, mode: str = 'exhaustive', trials: int = 2000,
                     seed: int = 0, cap: int = 10 ** 7, k: Optional[int] = None) -> Verdict:
    """
    Check the selectivity property of a family

    Args:
        family: Family to check
        mode: 'exhaustive' (a proof) or 'sampled' (a screen, never a proof)
        trials: Random witnesses drawn in sampled mode
        seed: Sampling seed
        cap: Largest witness count allowed in exhaustive mode
        k: Check (k, N)-selectivity for this k instead of family.k

    Returns:
        Verdict; exhaustive mode reports the lexicographically smallest violating subset
    """
    k = family.k if k is None else k
    N = family.N

    if mode == 'exhaustive':
        total = witness_count(k, N)
        if total > cap:
            raise ExhaustiveCapExceeded(
                f"{total} witness subsets exceed the exhaustive cap of {cap}; use sampled mode"
            )
        matrix = family.matrix()
        smallest: Optional[Tuple[int, ...]] = None
        for s in range(1, min(k, N) + 1):
            chunk_size = max(1, 2_000_000 // max(1, family.size * s))
            for chunk in _chunks(itertools.combinations(range(1, N + 1), s), chunk_size):
                subsets = np.array(chunk, dtype=np.int64)
                hit = _selected(matrix, subsets)
                if not hit.all():
                    # combinations are lexicographic within a size
                    candidate = tuple(int(x) for x in subsets[int(np.argmin(hit))])
                    if smallest is None or candidate < smallest:
                        smallest = candidate
                    break
        return Verdict(smallest is None, 'exhaustive', total, smallest)

    if mode == 'sampled':
        rng = np.random.default_rng(seed)
        # singletons are cheap to check completely
        for label in range(1, N + 1):
            if label not in family.membership:
                return Verdict(False, 'sampled', label, (label,))
        checked = N
        upper = min(k, N)
        for _ in range(trials):
            size = int(rng.integers(1, upper + 1))
            subset = np.sort(rng.choice(N, size=size, replace=False) + 1)
            checked += 1
            if not family.selects(int(x) for x in subset):
                return Verdict(False, 'sampled', checked, tuple(int(x) for x in subset))
        return Verdict(True, 'sampled', checked)

    raise ValueError(f"unknown verification mode '{mode}'")


def brute_force_violation(family: SelectiveFamily, k: Optional[int] = None) -> Optional[Tuple[int, ...]]:
    """Pure-Python reference check: smallest (lexicographic) subset with no exact-one intersection"""
    k = family.k if k is None else k
    violations = []
    for s in range(1, min(k, family.N) + 1):
        for subset in itertools.combinations(range(1, family.N + 1), s):
            chosen = set(subset)
            if not any(len(chosen & fset) == 1 for fset in family.sets):
                violations.append(subset)
                break
    return min(violations) if violations else None


class SelectiveFamilyBuilder:
    """Builds verified (k, N)-selective families, choosing a construction by instance size"""

    def __init__(self, pool_width: int = 64, greedy_cap: int = 200_000, exhaustive_cap: int = 10 ** 7,
                 random_multiplier: int = 3, attempts: int = 8, sample_trials: int = 2000):
        self.logger = logging.getLogger(__name__)
        self.pool_width = pool_width
        self.greedy_cap = greedy_cap
        self.exhaustive_cap = exhaustive_cap
        self.random_multiplier = random_multiplier
        self.attempts = attempts
        self.sample_trials = sample_trials

    @classmethod
    def from_config(cls, config) -> 'SelectiveFamilyBuilder':
        return cls(pool_width=config.pool_width, greedy_cap=config.greedy_cap,
                   exhaustive_cap=config.exhaustive_cap, random_multiplier=config.random_multiplier,
                   attempts=config.construction_attempts, sample_trials=config.sample_trials)

    def build(self, k: int, N: int, seed: int = 0) -> SelectiveFamily:
        """
        Build a (k, N)-selective family

        Args:
            k: Selectivity parameter, 1 <= k <= N
            N: Universe size
            seed: Construction seed; the result is deterministic in (k, N, seed)

        Returns:
            SelectiveFamily that passed verification
        """
        if not 1 <= k <= N:
            raise ValueError(f"selective family needs 1 <= k <= N, got k={k}, N={N}")

        if k == 1:
            family = SelectiveFamily(k, N, (frozenset(range(1, N + 1)),), method='universe')
        elif witness_count(k, N) <= self.greedy_cap and witness_count(k, N) * N <= _GREEDY_CELLS:
            family = self._greedy(k, N, seed)
        elif k == N:
            family = self._binary_representation(N)
        else:
            family = self._random_sets(k, N, seed)

        self.logger.info(f"Built ({k},{N})-selective family by {family.method}: {family.size} sets")
        return family

    def _verify(self, family: SelectiveFamily, seed: int) -> Verdict:
        if witness_count(family.k, family.N) <= self.exhaustive_cap:
            return verify_selective(family, 'exhaustive', cap=self.exhaustive_cap)
        return verify_selective(family, 'sampled', trials=self.sample_trials, seed=seed)

    def _candidate_pool(self, rng: np.random.Generator, k: int, N: int) -> np.ndarray:
        # mixed densities 1, 1/2, 1/4, ... down to about 1/k
        levels = max(1, math.ceil(math.log2(k)) + 1)
        density = 0.5 ** (np.arange(self.pool_width) % levels)
        pool = rng.random((self.pool_width, N)) < density[:, None]
        empty = ~pool.any(axis=1)
        if empty.any():
            pool[empty, rng.integers(0, N, size=int(empty.sum()))] = True
        return pool

    def _greedy(self, k: int, N: int, seed: int) -> SelectiveFamily:
        """Greedy cover of all witness subsets; exact by construction"""
        rng = np.random.default_rng(seed)
        witnesses = [c for s in range(1, k + 1) for c in itertools.combinations(range(N), s)]
        w = np.zeros((len(witnesses), N), dtype=np.float32)
        for row, subset in enumerate(witnesses):
            w[row, list(subset)] = 1.0
        satisfied = np.zeros(len(witnesses), dtype=bool)
        chosen: List[FrozenSet[int]] = []

        while not satisfied.all():
            pool = self._candidate_pool(rng, k, N)
            counts = w @ pool.T.astype(np.float32)
            gains = ((counts == 1.0) & ~satisfied[:, None]).sum(axis=0)
            best = int(np.argmax(gains))  # lowest index wins ties
            if gains[best] > 0:
                members = pool[best]
            else:
                # a singleton inside an unsatisfied witness always makes progress
                members = np.zeros(N, dtype=bool)
                members[witnesses[int(np.argmin(satisfied))][0]] = True
            satisfied |= (w @ members.astype(np.float32)) == 1.0
            chosen.append(frozenset(int(i) + 1 for i in np.flatnonzero(members)))

        family = SelectiveFamily(k, N, tuple(chosen), method='greedy')
        verdict = verify_selective(family, 'exhaustive', cap=max(self.exhaustive_cap, len(witnesses)))
        if not verdict.valid:
            raise ConstructionError(f"greedy family failed verification at {verdict.counterexample}")
        return family

    def _binary_representation(self, N: int) -> SelectiveFamily:
        """Bit-position sets followed by all singletons; the singletons alone make it (N, N)-selective"""
        bits = max(1, math.ceil(math.log2(N)))
        sets = []
        for b in range(bits):
            for v in (0, 1):
                members = frozenset(x for x in range(1, N + 1) if ((x - 1) >> b) & 1 == v)
                if members:
                    sets.append(members)
        sets.extend(frozenset((x,)) for x in range(1, N + 1))
        family = SelectiveFamily(N, N, tuple(sets), method='binary')
        verdict = self._verify(family, seed=N)
        if not verdict.valid:
            raise ConstructionError(f"binary-representation family failed at {verdict.counterexample}")
        return family

    def random_sets(self, k: int, N: int, size: int, seed: int) -> SelectiveFamily:
        """Unverified family of `size` sets, each label included with probability 1/k"""
        rng = np.random.default_rng(seed)
        sets = []
        for count in rng.binomial(N, 1.0 / k, size=size):
            if count == 0:
                continue
            members = rng.choice(N, size=int(count), replace=False) + 1
            sets.append(frozenset(int(x) for x in members))
        return SelectiveFamily(k, N, tuple(sets), method='random')

    def _random_sets(self, k: int, N: int, seed: int) -> SelectiveFamily:
        size = math.ceil(self.random_multiplier * k * max(1.0, math.log2(2 * N / k)))
        for attempt in range(self.attempts):
            family = self.random_sets(k, N, size, seed + attempt)
            verdict = self._verify(family, seed=seed + attempt)
            if verdict.valid:
                return family
            self.logger.debug(f"Random family attempt {attempt} failed at {verdict.counterexample}")
        raise ConstructionError(
            f"no verified ({k},{N})-selective family after {self.attempts} attempts"
        )


@lru_cache(maxsize=128)
def _cached_build(k: int, N: int, seed: int, settings: Tuple) -> SelectiveFamily:
    return SelectiveFamilyBuilder(*settings).build(k, N, seed)


def build_selective_family(k: int, N: int, seed: int = 0,
                           builder: Optional[SelectiveFamilyBuilder] = None) -> SelectiveFamily:
    builder = builder or SelectiveFamilyBuilder()
    settings = (builder.pool_width, builder.greedy_cap, builder.exhaustive_cap,
                builder.random_multiplier, builder.attempts, builder.sample_trials)
    return _cached_build(k, N, seed, settings)


@dataclass(frozen=True)
class SizeRow:
    k: int
    N: int
    size: int
    method: str
    bound: float

    @property
    def ratio(self) -> float:
        return self.size / self.bound

    @property
    def within(self) -> bool:
        return self.size <= self.bound or math.isclose(self.size, self.bound)


@dataclass(frozen=True)
class SizeReport:
    f: float
    rows: Tuple[SizeRow, ...]

    @property
    def worst(self) -> float:
        return max((row.ratio for row in self.rows), default=0.0)

    @property
    def holds(self) -> bool:
        return all(row.within for row in self.rows)

    @property
    def exceeding(self) -> List[SizeRow]:
        return [row for row in self.rows if not row.within]


# greedy wherever it fits, random sets at (8, 64)
SIZE_SWEEP = ((2, 8), (3, 8), (4, 8), (2, 16), (3, 16), (4, 16), (2, 32), (4, 32), (2, 64), (8, 64))


def scale_of(k: int, N: int) -> float:
    return k * math.log2(2 * N / k)


def size_tracking(instances: Sequence[Tuple[int, int]], seed: int = 0,
                  builder: Optional[SelectiveFamilyBuilder] = None) -> SizeReport:
    """
    Measure family sizes against f * k * lg(2N/k)

    f is the size-to-scale ratio of the first instance (the caller lists the
    smallest first), held fixed for the rest of the sweep. Rows over the bound
    are reported, not raised.

    Returns:
        SizeReport
    """
    if not instances:
        return SizeReport(0.0, ())
    rows = []
    f = None
    for k, N in instances:
        family = build_selective_family(k, N, seed, builder)
        if f is None:
            f = family.size / scale_of(k, N)
        rows.append(SizeRow(k, N, family.size, family.method, f * scale_of(k, N)))
    report = SizeReport(f, tuple(rows))
    for row in report.exceeding:
        logger.warning(f"({row.k},{row.N}) {row.method} family has {row.size} sets, "
                       f"{row.ratio:.2f}x the tracked bound {row.bound:.1f}")
    return report
