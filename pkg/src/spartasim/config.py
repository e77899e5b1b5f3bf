"""Run configuration: a single YAML (or JSON) file determines a run.

The file is a nested key/value document; every field has a default so a
config can be as small as a mode and a workload. ``SystemConfig`` validates
cross-field consistency before anything executes and converts to the engine
and geometry objects.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .addrspace import PAGE_2M, PAGE_4K, PageGeometry
from .engine import CACHE_NONE, CACHE_PHYSICAL, CACHE_VIRTUAL, CacheConfig, EngineConfig
from .latency import MODE_CONV, MODE_IDEAL, MODE_SPARTA, LatencyParams, Topology
from .workloads import KINDS, WorkloadSpec


class ConfigError(Exception):
    pass


_SIZE_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([kmgt]i?b?)?\s*$", re.IGNORECASE)
_SIZE_MULT = {"k": 1 << 10, "m": 1 << 20, "g": 1 << 30, "t": 1 << 40}


def parse_size(value) -> int:
    """Accept plain ints or strings like '4k', '16KiB', '1GiB', '2m'."""
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    m = _SIZE_RE.match(str(value))
    if not m:
        raise ConfigError(f"cannot parse size {value!r}")
    number = float(m.group(1))
    suffix = (m.group(2) or "").lower()
    mult = _SIZE_MULT.get(suffix[:1], 1) if suffix else 1
    result = number * mult
    if result != int(result):
        raise ConfigError(f"size {value!r} is not a whole number of bytes")
    return int(result)


def parse_count(value) -> int:
    """Accept ints or strings like '1M', '200k' (decimal multipliers)."""
    if isinstance(value, int):
        return value
    s = str(value).strip().lower()
    mult = 1
    if s and s[-1] in "kmg":
        mult = {"k": 10 ** 3, "m": 10 ** 6, "g": 10 ** 9}[s[-1]]
        s = s[:-1]
    try:
        return int(float(s) * mult)
    except ValueError:
        raise ConfigError(f"cannot parse count {value!r}") from None


def parse_page_size(value) -> int:
    size = parse_size(value)
    if size not in (PAGE_4K, PAGE_2M):
        raise ConfigError(f"page_size must be 4k or 2m, got {value!r}")
    return size


@dataclass
class SystemConfig:
    mode: str = MODE_SPARTA
    page_size: int = PAGE_4K
    partitions: int = 4
    sockets: int = 2
    channels_per_socket: int = 2
    memory_bytes: int = 2 << 30
    latency: LatencyParams = field(default_factory=LatencyParams)
    mem_tlb_entries: int = 128
    mem_tlb_ways: int = 4
    mem_tlb_levels: int = 1
    mem_tlb_l2_entries: int = 1024
    accel_tlb_entries: int | None = None  # None: 128 for conv, 0 otherwise
    accel_tlb_ways: int = 4
    cache: CacheConfig = field(default_factory=CacheConfig)
    ipt_hash: str = "xor_fold"
    warmup: float = 0.1
    seed: int = 0
    chunk: int = 1
    workload: WorkloadSpec | None = None
    trace_path: str | None = None
    allow_accel_tlb_with_virtual_cache: bool = False

    # -- derived objects ------------------------------------------------------

    def effective_accel_tlb_entries(self) -> int:
        if self.accel_tlb_entries is not None:
            return self.accel_tlb_entries
        return 128 if self.mode == MODE_CONV else 0

    def geometry(self) -> PageGeometry:
        total_pages = self.memory_bytes // self.page_size
        capacity = total_pages // self.partitions
        return PageGeometry(self.page_size, self.partitions, capacity)

    def topology(self) -> Topology:
        return Topology(self.sockets, self.channels_per_socket, self.partitions)

    def engine_config(self) -> EngineConfig:
        self.validate()
        return EngineConfig(
            mode=self.mode,
            geom=self.geometry(),
            topo=self.topology(),
            lat=self.latency,
            mem_tlb_entries=self.mem_tlb_entries,
            mem_tlb_ways=self.mem_tlb_ways,
            mem_tlb_levels=self.mem_tlb_levels,
            mem_tlb_l2_entries=self.mem_tlb_l2_entries,
            accel_tlb_entries=self.effective_accel_tlb_entries(),
            accel_tlb_ways=self.accel_tlb_ways,
            cache=self.cache,
            ipt_hash=self.ipt_hash,
            warmup_fraction=self.warmup,
        )

    # -- validation -------------------------------------------------------------

    def validate(self) -> None:
        if self.mode not in (MODE_CONV, MODE_SPARTA, MODE_IDEAL):
            raise ConfigError(f"mode: unknown mode {self.mode!r}")
        if self.page_size not in (PAGE_4K, PAGE_2M):
            raise ConfigError("page_size: must be 4k or 2m")
        if self.partitions < 1:
            raise ConfigError("partitions: must be >= 1")
        if self.partitions % self.sockets and self.sockets % self.partitions:
            raise ConfigError("partitions: must evenly subdivide or group sockets")
        total_pages = self.memory_bytes // self.page_size
        if total_pages < self.partitions:
            raise ConfigError("memory_bytes: less than one page per partition")
        if total_pages % self.partitions:
            raise ConfigError("memory_bytes: pages not divisible by partitions")
        if self.mem_tlb_entries % self.mem_tlb_ways:
            raise ConfigError("mem_tlb_entries: not divisible by ways")
        accel = self.effective_accel_tlb_entries()
        if accel and accel % self.accel_tlb_ways:
            raise ConfigError("accel_tlb_entries: not divisible by ways")
        if (self.cache.kind == CACHE_VIRTUAL and accel > 0
                and not self.allow_accel_tlb_with_virtual_cache):
            raise ConfigError(
                "accel_tlb_entries: a virtual cache needs no accelerator TLB "
                "(set allow_accel_tlb_with_virtual_cache to override)")
        if not 0.0 <= self.warmup < 1.0:
            raise ConfigError("warmup: must be in [0, 1)")
        if self.chunk < 1:
            raise ConfigError("chunk: must be >= 1")
        if self.workload is None and self.trace_path is None:
            raise ConfigError("workload/trace: one of the two is required")
        if self.workload is not None and self.trace_path is not None:
            raise ConfigError("workload/trace: give only one")
        if self.trace_path is not None and not Path(self.trace_path).exists():
            raise ConfigError(f"trace: file not found: {self.trace_path}")

    # -- serialization ------------------------------------------------------------

    def to_dict(self) -> dict:
        d: dict = {
            "mode": self.mode,
            "page_size": self.page_size,
            "partitions": self.partitions,
            "topology": {
                "sockets": self.sockets,
                "channels_per_socket": self.channels_per_socket,
            },
            "memory_bytes": self.memory_bytes,
            "latency": asdict(self.latency),
            "mem_tlb": {
                "entries": self.mem_tlb_entries,
                "ways": self.mem_tlb_ways,
                "levels": self.mem_tlb_levels,
                "l2_entries": self.mem_tlb_l2_entries,
            },
            "accel_tlb": {
                "entries": self.accel_tlb_entries,
                "ways": self.accel_tlb_ways,
            },
            "cache": asdict(self.cache),
            "ipt_hash": self.ipt_hash,
            "warmup": self.warmup,
            "seed": self.seed,
            "chunk": self.chunk,
            "allow_accel_tlb_with_virtual_cache":
                self.allow_accel_tlb_with_virtual_cache,
        }
        if self.workload is not None:
            d["workload"] = asdict(self.workload)
        if self.trace_path is not None:
            d["trace"] = self.trace_path
        return d

    @classmethod
    def from_dict(cls, data: dict) -> SystemConfig:
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        known = {"mode", "page_size", "partitions", "topology", "memory_bytes",
                 "latency", "mem_tlb", "accel_tlb", "cache", "ipt_hash",
                 "warmup", "seed", "chunk", "workload", "trace",
                 "allow_accel_tlb_with_virtual_cache"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls()
        if "mode" in data:
            cfg.mode = str(data["mode"])
        if "page_size" in data:
            cfg.page_size = parse_page_size(data["page_size"])
        if "partitions" in data:
            cfg.partitions = int(data["partitions"])
        topo = data.get("topology", {})
        cfg.sockets = int(topo.get("sockets", cfg.sockets))
        cfg.channels_per_socket = int(topo.get("channels_per_socket",
                                               cfg.channels_per_socket))
        if "memory_bytes" in data:
            cfg.memory_bytes = parse_size(data["memory_bytes"])
        if "latency" in data:
            cfg.latency = LatencyParams(**{k: float(v)
                                           for k, v in data["latency"].items()})
        mem = data.get("mem_tlb", {})
        cfg.mem_tlb_entries = int(mem.get("entries", cfg.mem_tlb_entries))
        cfg.mem_tlb_ways = int(mem.get("ways", cfg.mem_tlb_ways))
        cfg.mem_tlb_levels = int(mem.get("levels", cfg.mem_tlb_levels))
        cfg.mem_tlb_l2_entries = int(mem.get("l2_entries", cfg.mem_tlb_l2_entries))
        accel = data.get("accel_tlb", {})
        if accel.get("entries") is not None:
            cfg.accel_tlb_entries = int(accel["entries"])
        cfg.accel_tlb_ways = int(accel.get("ways", cfg.accel_tlb_ways))
        if "cache" in data:
            c = data["cache"]
            cfg.cache = CacheConfig(kind=c.get("kind", CACHE_NONE),
                                    size=parse_size(c.get("size", 16 << 10)),
                                    ways=int(c.get("ways", 4)),
                                    line=parse_size(c.get("line", 64)))
        if "ipt_hash" in data:
            cfg.ipt_hash = str(data["ipt_hash"])
        if "warmup" in data:
            cfg.warmup = float(data["warmup"])
        if "seed" in data:
            cfg.seed = int(data["seed"])
        if "chunk" in data:
            cfg.chunk = int(data["chunk"])
        if "allow_accel_tlb_with_virtual_cache" in data:
            cfg.allow_accel_tlb_with_virtual_cache = bool(
                data["allow_accel_tlb_with_virtual_cache"])
        if "workload" in data and data["workload"] is not None:
            w = dict(data["workload"])
            if "footprint_bytes" in w:
                w["footprint_bytes"] = parse_size(w["footprint_bytes"])
            if "footprint" in w:
                w["footprint_bytes"] = parse_size(w.pop("footprint"))
            if "ops" in w:
                w["ops"] = parse_count(w["ops"])
            cfg.workload = WorkloadSpec(**w)
        if "trace" in data and data["trace"] is not None:
            cfg.trace_path = str(data["trace"])
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> SystemConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid syntax: {exc}") from None
        if data is None:
            data = {}
        try:
            return cls.from_dict(data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)
