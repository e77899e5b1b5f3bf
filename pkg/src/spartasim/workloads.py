"""Synthetic index-traversal trace generators.

The generators are statistical stand-ins for pointer-chasing index searches:
they emit the address pattern of each operation (bucket probe and chain walk,
tower descent, root-to-leaf path) without maintaining real key sets. Node
placement is pseudo-random within a contiguous heap region, so the per-level
page behavior matches the structure being mimicked: hash probes land on few
pages per op, tree searches reuse the hot top levels, skip-list towers are
scattered and reuse almost nothing.

Everything is deterministic under (spec, seed); thread t of a workload draws
from an independent stream over the same shared layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .traceio import TraceRecord

KIND_HASH_TABLE = "hash_table"
KIND_SKIP_LIST = "skip_list"
KIND_BST_INTERNAL = "bst_internal"
KIND_BST_EXTERNAL = "bst_external"
KINDS = (KIND_HASH_TABLE, KIND_SKIP_LIST, KIND_BST_INTERNAL, KIND_BST_EXTERNAL)

NODE_BYTES = 64
LEAF_BYTES = 128
BUCKET_BYTES = 8

# Virtual placement: each address space gets a disjoint heap window.
HEAP_BASE = 0x1000000000
HEAP_STRIDE = 0x4000000000

_SCRAMBLE = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str
    footprint_bytes: int = 1 << 30
    ops: int = 100_000
    seed: int = 0
    threads: int = 1
    asid: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown workload kind {self.kind!r}")
        if self.footprint_bytes < 4096:
            raise ValueError("footprint must be at least one page")
        if self.ops < 1:
            raise ValueError("ops must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def base_vaddr(self) -> int:
        return HEAP_BASE + self.asid * HEAP_STRIDE


def _scatter(idx: int, salt: int, size: int) -> int:
    """Deterministic pseudo-random permutation-ish placement of `idx` within
    [0, size)."""
    return ((idx + 1) * _SCRAMBLE ^ salt) % size


def _rng(spec: WorkloadSpec, thread: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, spec.asid, thread])


def gen_hash_table(spec: WorkloadSpec, thread: int = 0) -> list[TraceRecord]:
    """Uniform bucket probe, followed by one chained node for the ops whose
    bucket is occupied (one or two records per op)."""
    rng = _rng(spec, thread)
    base = spec.base_vaddr
    bucket_region = spec.footprint_bytes // 4
    bucket_count = max(1, bucket_region // BUCKET_BYTES)
    node_base = base + bucket_region
    node_count = max(1, (spec.footprint_bytes - bucket_region) // NODE_BYTES)

    chain = rng.random(size=spec.ops) < 0.7
    buckets = rng.integers(0, bucket_count, size=spec.ops)
    nodes = rng.integers(0, node_count, size=int(chain.sum()))

    out: list[TraceRecord] = []
    pos = 0
    asid = spec.asid
    for i in range(spec.ops):
        out.append(TraceRecord(thread, asid,
                               base + int(buckets[i]) * BUCKET_BYTES, False, 6))
        if chain[i]:
            out.append(TraceRecord(thread, asid,
                                   node_base + int(nodes[pos]) * NODE_BYTES,
                                   False, 3))
            pos += 1
    return out


def gen_skip_list(spec: WorkloadSpec, thread: int = 0) -> list[TraceRecord]:
    """Tower descent: one or two node touches per level, towers placed
    independently so successive levels share no spatial locality."""
    rng = _rng(spec, thread)
    node_base = spec.base_vaddr
    node_count = max(1, spec.footprint_bytes // NODE_BYTES)
    levels = max(1, int(math.log2(node_count)))

    draws = rng.integers(0, 1 << 62, size=(spec.ops, levels))
    forward = rng.random(size=(spec.ops, levels)) < 0.5

    out: list[TraceRecord] = []
    asid = spec.asid
    for i in range(spec.ops):
        for lvl in range(levels - 1, -1, -1):
            subset = max(1, node_count >> lvl)
            d = int(draws[i][lvl])
            node = _scatter(d % subset, lvl * 0x5151, node_count)
            out.append(TraceRecord(thread, asid,
                                   node_base + node * NODE_BYTES, False, 5))
            if forward[i][lvl] and subset > 1:
                node = _scatter((d + 1) % subset, lvl * 0x5151, node_count)
                out.append(TraceRecord(thread, asid,
                                       node_base + node * NODE_BYTES, False, 5))
    return out


def _bst_keys(spec: WorkloadSpec, external: bool) -> int:
    """Key count: internal trees store one key per 64 B node, external trees
    pay one 64 B routing node plus one 128 B leaf per key."""
    per_key = NODE_BYTES + LEAF_BYTES if external else NODE_BYTES
    return max(1, spec.footprint_bytes // per_key)


def gen_bst(spec: WorkloadSpec, variant: str = "internal",
            thread: int = 0) -> list[TraceRecord]:
    """Root-to-leaf search path. Nodes sit contiguously by depth (heap order),
    so the hot top of the tree occupies few pages. The external variant adds
    one leaf record per search in a separate leaf region."""
    if variant not in ("internal", "external"):
        raise ValueError(f"unknown bst variant {variant!r}")
    external = variant == "external"
    rng = _rng(spec, thread)
    keys = _bst_keys(spec, external)
    depth = max(1, math.ceil(math.log2(keys + 1)))
    node_base = spec.base_vaddr
    leaf_base = node_base + keys * NODE_BYTES

    draws = rng.integers(0, 1 << 62, size=(spec.ops, depth))
    leaf_draws = rng.integers(0, keys, size=spec.ops) if external else None

    out: list[TraceRecord] = []
    asid = spec.asid
    for i in range(spec.ops):
        for d in range(depth):
            width = min(1 << d, keys)
            node = (1 << d) - 1 + int(draws[i][d]) % width
            node = min(node, keys - 1)
            out.append(TraceRecord(thread, asid,
                                   node_base + node * NODE_BYTES, False, 4))
        if external:
            out.append(TraceRecord(thread, asid,
                                   leaf_base + int(leaf_draws[i]) * LEAF_BYTES,
                                   False, 2))
    return out


def generate(spec: WorkloadSpec) -> list[list[TraceRecord]]:
    """Per-thread traces for one workload; threads share the layout and the
    address space but draw independent operation streams."""
    per_thread = max(1, spec.ops // spec.threads)
    thread_spec = replace(spec, ops=per_thread)
    gens = {
        KIND_HASH_TABLE: lambda t: gen_hash_table(thread_spec, t),
        KIND_SKIP_LIST: lambda t: gen_skip_list(thread_spec, t),
        KIND_BST_INTERNAL: lambda t: gen_bst(thread_spec, "internal", t),
        KIND_BST_EXTERNAL: lambda t: gen_bst(thread_spec, "external", t),
    }
    gen = gens[spec.kind]
    return [gen(t) for t in range(spec.threads)]


def gen_multiprog(specs: Sequence[WorkloadSpec]) -> list[list[TraceRecord]]:
    """Independent traces for a multiprogrammed mix: distinct address spaces,
    disjoint heap windows, globally unique thread ids. A single-element mix
    degenerates to the underlying generator."""
    if not specs:
        raise ValueError("a multiprogrammed mix needs at least one workload")
    if len({s.asid for s in specs}) != len(specs):
        specs = [replace(s, asid=i) for i, s in enumerate(specs)]
    out: list[list[TraceRecord]] = []
    tid = 0
    for spec in specs:
        for trace in generate(spec):
            out.append([TraceRecord(tid, r.asid, r.vaddr, r.is_write,
                                    r.insns_since_prev) for r in trace])
            tid += 1
    return out
