"""Memory-reference trace records and file formats.

Binary format: an 8-byte magic header followed by fixed 17-byte records,
little-endian: thread u16, asid u16, vaddr u64 (top 16 bits zero), flags u8
(bit 0 = write), instructions-since-previous-reference u32.

Text format (for hand-written tests): one record per line,
``thread asid vaddr r|w insns`` with vaddr in hex; blank lines and ``#``
comments are skipped.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

from .addrspace import VADDR_LIMIT, ASID_LIMIT

MAGIC = b"SPTRACE1"
RECORD = struct.Struct("<HHQBI")
FLAG_WRITE = 0x01


class TraceRecord(NamedTuple):
    thread: int
    asid: int
    vaddr: int
    is_write: bool
    insns_since_prev: int


def _check(rec: TraceRecord) -> TraceRecord:
    if not 0 <= rec.vaddr < VADDR_LIMIT:
        raise ValueError(f"vaddr {rec.vaddr:#x} outside 48-bit space")
    if not 0 <= rec.asid < ASID_LIMIT:
        raise ValueError(f"asid {rec.asid} outside 12-bit space")
    if not 0 <= rec.thread < 1 << 16:
        raise ValueError(f"thread {rec.thread} outside 16-bit space")
    if not 0 <= rec.insns_since_prev < 1 << 32:
        raise ValueError("insns_since_prev outside 32-bit space")
    return rec


def write_trace(path: str | Path, records: Iterable[TraceRecord]) -> int:
    """Write records in the binary format; returns the record count."""
    count = 0
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for rec in records:
            _check(rec)
            fh.write(RECORD.pack(rec.thread, rec.asid, rec.vaddr,
                                 FLAG_WRITE if rec.is_write else 0,
                                 rec.insns_since_prev))
            count += 1
    return count


def read_trace(path: str | Path) -> Iterator[TraceRecord]:
    """Stream records from a binary trace file."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a trace file (bad magic)")
        data = fh.read()
    if len(data) % RECORD.size:
        raise ValueError(f"{path}: truncated record at offset "
                         f"{len(MAGIC) + len(data) - len(data) % RECORD.size}")
    for i, (thread, asid, vaddr, flags, insns) in enumerate(RECORD.iter_unpack(data)):
        if vaddr >= VADDR_LIMIT:
            raise ValueError(f"{path}: record {i}: vaddr outside 48-bit space")
        yield TraceRecord(thread, asid, vaddr, bool(flags & FLAG_WRITE), insns)


def write_text_trace(path: str | Path, records: Iterable[TraceRecord]) -> int:
    count = 0
    with open(path, "w") as fh:
        for rec in records:
            _check(rec)
            fh.write(f"{rec.thread} {rec.asid} {rec.vaddr:#x} "
                     f"{'w' if rec.is_write else 'r'} {rec.insns_since_prev}\n")
            count += 1
    return count


def read_text_trace(path: str | Path) -> Iterator[TraceRecord]:
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 5 or parts[3] not in ("r", "w"):
                raise ValueError(f"{path}:{lineno}: malformed record {line!r}")
            try:
                rec = TraceRecord(int(parts[0]), int(parts[1]),
                                  int(parts[2], 0), parts[3] == "w",
                                  int(parts[4]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            yield _check(rec)


def open_trace(path: str | Path) -> Iterator[TraceRecord]:
    """Read a trace file, dispatching on extension (.txt is textual)."""
    if str(path).endswith(".txt"):
        return read_text_trace(path)
    return read_trace(path)
