import os
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from typing import Any, Dict, Mapping, Optional

BROADCAST_KINDS = ('roundrobin', 'sf', 'oracle')
HELPER_VARIANTS = ('a', 'b')

_TRUTHY = {'1', 'true', 'yes', 'on'}


def _as_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in _TRUTHY


@dataclass(frozen=True)
class SimulationConfig:
    """Settings shared by the simulator, the CLI and the web API"""

    broadcast: str = 'sf'
    c_rb: Fraction = Fraction(1)
    helper_variant: str = 'b'
    selector_seed: int = 0

    # selective family construction / verification
    exhaustive_cap: int = 10 ** 7
    greedy_cap: int = 200_000
    pool_width: int = 64
    random_multiplier: int = 3
    construction_attempts: int = 8
    sample_trials: int = 2000

    # benchmarking
    ratio_slack: float = 0.10
    trend_slack: float = 0.10
    baseline_path: str = 'bench_baseline.json'
    workers: int = 1

    # verification corpus
    corpus_c: int = 2
    random_per_n: int = 25

    record_trace: bool = True

    def __post_init__(self):
        if self.broadcast not in BROADCAST_KINDS:
            raise ValueError(f"Unknown broadcast kind '{self.broadcast}', expected one of {BROADCAST_KINDS}")
        if self.helper_variant not in HELPER_VARIANTS:
            raise ValueError(f"Unknown helper variant '{self.helper_variant}', expected 'a' or 'b'")
        if Fraction(self.c_rb) <= 0:
            raise ValueError("c_rb must be a positive rational")
        object.__setattr__(self, 'c_rb', Fraction(self.c_rb))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any], prefix: str = 'GOSSIP_') -> 'SimulationConfig':
        """
        Build a config from a flat mapping such as os.environ or app.config

        Args:
            mapping: Source of `GOSSIP_*` keys; missing keys keep their defaults
            prefix: Key prefix

        Returns:
            SimulationConfig
        """
        values: Dict[str, Any] = {}
        for f in fields(cls):
            key = f"{prefix}{f.name.upper()}"
            if key not in mapping or mapping[key] in (None, ''):
                continue
            raw = mapping[key]
            if f.type in (int, 'int'):
                values[f.name] = int(raw)
            elif f.type in (float, 'float'):
                values[f.name] = float(raw)
            elif f.type in (bool, 'bool'):
                values[f.name] = _as_bool(raw)
            elif f.name == 'c_rb':
                values[f.name] = Fraction(str(raw))
            else:
                values[f.name] = str(raw).strip().lower() if f.name in ('broadcast', 'helper_variant') else str(raw)
        return cls(**values)

    @classmethod
    def from_env(cls, environ: Optional[Mapping[str, str]] = None) -> 'SimulationConfig':
        return cls.from_mapping(os.environ if environ is None else environ)

    def to_flask(self, prefix: str = 'GOSSIP_') -> Dict[str, Any]:
        """Flatten into upper-case keys suitable for app.config"""
        return {f"{prefix}{f.name.upper()}": getattr(self, f.name) for f in fields(self)}

    def replace(self, **changes: Any) -> 'SimulationConfig':
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)
