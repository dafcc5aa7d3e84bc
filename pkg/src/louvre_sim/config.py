"""Simulator configuration: documented defaults plus a key=value file parser."""

from __future__ import annotations

from dataclasses import dataclass, field, fields


@dataclass
class SimConfig:
    mode: str = "louvre"              # "baseline" or "louvre"
    rob_entries: int = 192
    lsq_entries: int = 64
    sb_entries: int = 16
    retire_width: int = 4
    fetch_width: int = 6
    mem_ops_per_cycle: int = 2
    sb_drain_width: int = 1
    version_bits: int = 10
    strict_fence_order: bool = True
    write_combining: bool = False
    seed: int = 0

    # memory hierarchy
    l1_lat: int = 2
    l2_lat: int = 10
    l3_lat: int = 25
    mem_lat: int = 100
    inv_delay: int = 1
    l1_kb: float = 64
    l2_kb: float = 512
    l3_mb: float = 8
    # optional direct line-count overrides (64-byte lines assumed otherwise)
    l1_lines: int | None = None
    l2_lines: int | None = None
    l3_lines: int | None = None
    lat_jitter: int = 0               # extra uniform [0, jitter] cycles per memory request

    # harness knobs
    trace: bool = False               # collect the per-event log
    assert_min_registers: bool = False
    max_cycles: int = 5_000_000
    false_sharing_map: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("baseline", "louvre"):
            raise ValueError(f"mode must be baseline or louvre, got {self.mode!r}")
        if self.version_bits < 1:
            raise ValueError("version_bits must be >= 1")

    @property
    def max_version(self) -> int:
        return (1 << self.version_bits) - 1

    def cache_lines(self) -> tuple[int, int, int]:
        l1 = self.l1_lines if self.l1_lines is not None else max(1, int(self.l1_kb * 1024 // 64))
        l2 = self.l2_lines if self.l2_lines is not None else max(1, int(self.l2_kb * 1024 // 64))
        l3 = self.l3_lines if self.l3_lines is not None else max(1, int(self.l3_mb * 1024 * 1024 // 64))
        return l1, l2, l3

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "false_sharing_map":
                if not v:
                    continue
                v = dict(v)
            out[f.name] = v
        return out


_BOOL_KEYS = {"strict_fence_order", "write_combining", "trace", "assert_min_registers"}
_FLOAT_KEYS = {"l1_kb", "l2_kb", "l3_mb"}
_STR_KEYS = {"mode"}


def parse_config(text: str, base: SimConfig | None = None) -> SimConfig:
    """Parse ``key=value`` lines (``#`` comments allowed) over ``base`` defaults."""
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {line_no}: expected key=value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = val

    cfg_fields = {f.name for f in fields(SimConfig)}
    kwargs = {}
    if base is not None:
        kwargs = {f.name: getattr(base, f.name) for f in fields(SimConfig)}
    for key, val in values.items():
        if key not in cfg_fields or key == "false_sharing_map":
            raise ValueError(f"unknown config key {key!r}")
        if key in _BOOL_KEYS:
            if val.lower() in ("on", "true", "1", "yes"):
                kwargs[key] = True
            elif val.lower() in ("off", "false", "0", "no"):
                kwargs[key] = False
            else:
                raise ValueError(f"config key {key}: expected on/off, got {val!r}")
        elif key in _STR_KEYS:
            kwargs[key] = val
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(val)
        else:
            kwargs[key] = int(val)
    return SimConfig(**kwargs)
