"""Versioned binary snapshots of a :class:`~cmabfas.learner.Cmabfas` learner.

Layout (all integers little-endian)::

    magic      8 bytes  b"CMABFAS\\x00"
    version    u16
    length     u64      byte length of the body that follows
    body       config | headers | covers | rng | pending
    crc32      u32      over the body

Headers referenced by ball centres are stored once in a table; balls refer
to them by position in that table.
"""

from __future__ import annotations

import io
import struct
import zlib
from dataclasses import dataclass

from .context import N_ATTRIBUTES, SipHeader
from .learner import Ball, Cmabfas, LearnerConfig, refresh

MAGIC = b"CMABFAS\x00"
VERSION = 1

_CONFIG = struct.Struct("<IQddqQ")
_BALL = struct.Struct("<iIQdq")
_RNG_HEAD = struct.Struct("<II")


class SnapshotError(ValueError):
    pass


def snapshot(learner: Cmabfas) -> bytes:
    cfg = learner.config
    headers = learner.index.headers
    table: dict[int, int] = {}

    def ref(hid: int | None) -> int:
        if hid is None:
            return -1
        if hid not in table:
            table[hid] = len(table)
        return table[hid]

    cover_blobs = []
    for cover in learner.covers:
        buf = io.BytesIO()
        buf.write(struct.pack("<I", len(cover.balls)))
        for b in cover.balls:
            parent = -1 if b.parent is None else b.parent
            buf.write(_BALL.pack(ref(b.center), b.depth, b.n, b.rho, parent))
        cover_blobs.append(buf.getvalue())

    pending = learner._pending
    if pending is None:
        pending_blob = b"\x00"
    else:
        xid, action, ball, _, _ = pending
        pending_blob = struct.pack("<BiII", 1, ref(xid), action, ball.index)

    body = io.BytesIO()
    body.write(_CONFIG.pack(cfg.k, cfg.T, cfg.c, cfg.lam, cfg.seed, learner.t))
    body.write(struct.pack("<I", len(table)))
    for hid in table:  # insertion order == table position
        for value in headers[hid].attributes:
            raw = value.encode("utf-8")
            body.write(struct.pack("<I", len(raw)))
            body.write(raw)
    for blob in cover_blobs:
        body.write(blob)
    body.write(_pack_rng(learner.rng.getstate()))
    body.write(pending_blob)
    payload = body.getvalue()
    return (
        MAGIC
        + struct.pack("<HQ", VERSION, len(payload))
        + payload
        + struct.pack("<I", zlib.crc32(payload))
    )


def _pack_rng(state) -> bytes:
    version, words, gauss = state
    out = _RNG_HEAD.pack(version, len(words)) + struct.pack(f"<{len(words)}I", *words)
    if gauss is None:
        out += struct.pack("<Bd", 0, 0.0)
    else:
        out += struct.pack("<Bd", 1, gauss)
    return out


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise SnapshotError("truncated snapshot record")
        out = self.data[self.pos : end]
        self.pos = end
        return out

    def unpack(self, fmt: str | struct.Struct):
        st = fmt if isinstance(fmt, struct.Struct) else struct.Struct(fmt)
        return st.unpack(self.take(st.size))


@dataclass
class SnapshotInfo:
    version: int
    config: LearnerConfig
    t: int
    n_headers: int
    balls_per_action: list[int]
    has_pending: bool


def _parse(record: bytes):
    if len(record) < len(MAGIC) + 10 or record[: len(MAGIC)] != MAGIC:
        raise SnapshotError("not a CMABFAS snapshot (bad magic)")
    version, length = struct.unpack_from("<HQ", record, len(MAGIC))
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version} (expected {VERSION})")
    start = len(MAGIC) + 10
    if len(record) != start + length + 4:
        raise SnapshotError("truncated snapshot record")
    payload = record[start : start + length]
    (crc,) = struct.unpack_from("<I", record, start + length)
    if zlib.crc32(payload) != crc:
        raise SnapshotError("snapshot checksum mismatch")

    r = _Reader(payload)
    k, T, c, lam, seed, t = r.unpack(_CONFIG)
    try:
        config = LearnerConfig(k=k, T=T, c=c, lam=lam, seed=seed)
    except ValueError as exc:
        raise SnapshotError(f"invalid config block: {exc}") from exc
    (n_headers,) = r.unpack("<I")
    headers = []
    for _ in range(n_headers):
        values = []
        for _ in range(N_ATTRIBUTES):
            (n,) = r.unpack("<I")
            values.append(r.take(n).decode("utf-8"))
        headers.append(SipHeader(tuple(values)))
    covers = []
    for _ in range(k):
        (count,) = r.unpack("<I")
        covers.append([r.unpack(_BALL) for _ in range(count)])
    version_rng, n_words = r.unpack(_RNG_HEAD)
    words = r.unpack(f"<{n_words}I")
    has_gauss, gauss = r.unpack("<Bd")
    rng_state = (version_rng, tuple(words), gauss if has_gauss else None)
    (flag,) = r.unpack("<B")
    pending = None
    if flag:
        pending = r.unpack("<iII")
    if r.pos != len(payload):
        raise SnapshotError("trailing bytes in snapshot record")
    return version, config, t, headers, covers, rng_state, pending


def inspect(record: bytes) -> SnapshotInfo:
    version, config, t, headers, covers, _, pending = _parse(record)
    return SnapshotInfo(version, config, t, len(headers), [len(c) for c in covers], pending is not None)


def restore(record: bytes) -> Cmabfas:
    _, config, t, headers, covers, rng_state, pending = _parse(record)
    learner = Cmabfas(config)
    ids = [learner.index.intern(h) for h in headers]
    if len(set(ids)) != len(ids):
        raise SnapshotError("duplicate headers in snapshot table")
    try:
        for cover, rows in zip(learner.covers, covers):
            cover.balls.clear()
            cover.per_depth.clear()
            cover.max_depth = 0
            for i, (ref, depth, n, rho, parent) in enumerate(rows):
                ball = Ball(i, None if ref < 0 else ids[ref], depth, config.lam, None if parent < 0 else parent)
                ball.n = n
                ball.rho = rho
                if n:
                    refresh(ball, config)
                cover.add(ball)
            if not cover.balls or cover.balls[0].depth != 0:
                raise SnapshotError("cover without a root ball")
        learner.t = t
        learner.rng.setstate(rng_state)
        if pending is not None:
            ref, action, i = pending
            if not 1 <= action <= config.k:
                raise SnapshotError(f"pending action {action} out of range")
            cover = learner.covers[action - 1]
            xid = ids[ref]
            learner._pending = (xid, action, cover.balls[i], cover.active(xid, learner.index), headers[ref])
    except (IndexError, ValueError, TypeError) as exc:
        if isinstance(exc, SnapshotError):
            raise
        raise SnapshotError(f"inconsistent snapshot record: {exc}") from exc
    return learner
