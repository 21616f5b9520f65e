"""Append-only, hash-chained and signed log of transmission decisions.

Each entry's body is serialized canonically (sorted-key compact JSON, UTF-8)
and signed with Ed25519. ``prev_hash`` is the SHA-256 of the predecessor's
full canonical entry, signature included; the first entry links to 32 zero
bytes. On disk a log is a sequence of ``uint32`` big-endian length prefixes,
each followed by one canonical entry.
"""
from __future__ import annotations

import enum
import functools
import hashlib
import json
import os
import struct
import threading
from dataclasses import dataclass, fields, replace
from typing import BinaryIO, Iterable, Iterator

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey, Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

SCHEME = "ed25519"
GENESIS_HASH = "00" * 32
_LEN = struct.Struct(">I")


class SigningKeyUnavailable(RuntimeError):
    pass


class GrantStatus(enum.Enum):
    VALID = "Valid"
    EXPIRED = "Expired"
    NONE = "None"
    WAIVER_ACTIVE = "WaiverActive"


class Basis(enum.Enum):
    VALID_GRANT = "ValidGrant"
    WAIVER_SENSING = "WaiverSensing"
    DENIED = "Denied"


@dataclass(frozen=True)
class AuditRecord:
    timestamp: float
    gps: tuple[float, float]
    channel: int | None
    eirp_dbm: float | None
    grant_status: GrantStatus
    sensing_confidence: float | None
    basis: Basis
    allowed: bool = False
    sensing_class: str | None = None
    sensing_conflict: bool = False
    prior_occupancy: float | None = None
    in_protection_zone: bool = False
    waiver_id: str | None = None
    prev_hash: str = ""
    scheme: str = SCHEME
    public_key: str = ""
    signature: str = ""

    def to_dict(self, with_signature: bool = True) -> dict:
        # Shallow copy; every field is a scalar except ``gps``.
        d = {f.name: getattr(self, f.name) for f in _FIELDS}
        d["gps"] = list(self.gps)
        d["grant_status"] = self.grant_status.value
        d["basis"] = self.basis.value
        if not with_signature:
            del d["signature"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AuditRecord":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown audit fields {sorted(unknown)}")
        d = dict(d)
        d["gps"] = tuple(d["gps"])
        d["grant_status"] = GrantStatus(d["grant_status"])
        d["basis"] = Basis(d["basis"])
        return cls(**d)

    def body_bytes(self) -> bytes:
        return _canonical(self.to_dict(with_signature=False))

    def entry_bytes(self) -> bytes:
        return _canonical(self.to_dict())

    def digest(self) -> str:
        return hashlib.sha256(self.entry_bytes()).hexdigest()


_FIELDS = fields(AuditRecord)


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def signing_key_from_seed(seed: bytes | str | int) -> Ed25519PrivateKey:
    """Deterministic node key for reproducible simulation runs."""
    material = hashlib.sha256(repr(seed).encode() if not isinstance(seed, bytes) else seed).digest()
    return Ed25519PrivateKey.from_private_bytes(material)


def public_key_hex(key: Ed25519PrivateKey | Ed25519PublicKey) -> str:
    pub = key.public_key() if isinstance(key, Ed25519PrivateKey) else key
    return pub.public_bytes(Encoding.Raw, PublicFormat.Raw).hex()


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    entries: int
    failed_index: int | None = None
    failed_offset: int | None = None
    reason: str = ""


class AuditLog:
    """In-memory chain, optionally mirrored to an append-only file."""

    def __init__(self, signing_key: Ed25519PrivateKey | None = None, path=None):
        self._key = signing_key
        self._pub = public_key_hex(signing_key) if signing_key is not None else ""
        self._lock = threading.Lock()
        self.entries: list[AuditRecord] = []
        self.head = GENESIS_HASH
        self.path = path
        self._fh: BinaryIO | None = open(path, "ab") if path is not None else None

    def __len__(self) -> int:
        return len(self.entries)

    def append(self, record: AuditRecord) -> str:
        """Chain, sign and store ``record``; returns the new head digest."""
        if self._key is None:
            raise SigningKeyUnavailable("audit log has no signing key")
        with self._lock:
            rec = replace(record, prev_hash=self.head, scheme=SCHEME, public_key=self._pub,
                          signature="")
            rec = replace(rec, signature=self._key.sign(rec.body_bytes()).hex())
            self.entries.append(rec)
            self.head = rec.digest()
            if self._fh is not None:
                data = rec.entry_bytes()
                self._fh.write(_LEN.pack(len(data)) + data)
                self._fh.flush()
                os.fsync(self._fh.fileno())
            return self.head

    def verify(self, public_key: str | None = None) -> VerifyResult:
        return verify_chain(self.entries, public_key)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


@functools.lru_cache(maxsize=64)
def _public_key(hex_key: str) -> Ed25519PublicKey:
    return Ed25519PublicKey.from_public_bytes(bytes.fromhex(hex_key))


def _check_entry(rec: AuditRecord, prev: str, pinned: str | None) -> str:
    if rec.prev_hash != prev:
        return "prev_hash does not match predecessor"
    if rec.scheme != SCHEME:
        return f"unsupported signature scheme {rec.scheme!r}"
    if pinned is not None and rec.public_key != pinned:
        return "entry signed by an unexpected key"
    try:
        _public_key(rec.public_key).verify(bytes.fromhex(rec.signature), rec.body_bytes())
    except (ValueError, InvalidSignature):
        return "bad signature"
    return ""


def verify_chain(entries: Iterable[AuditRecord], public_key: str | None = None) -> VerifyResult:
    """Check links and signatures. Without ``public_key`` every entry must use the first entry's key."""
    prev = GENESIS_HASH
    pinned = public_key
    n = 0
    for i, rec in enumerate(entries):
        if pinned is None:
            pinned = rec.public_key
        reason = _check_entry(rec, prev, pinned)
        if reason:
            return VerifyResult(False, i, i, None, reason)
        prev = rec.digest()
        n += 1
    return VerifyResult(True, n)


class ChainVerifier:
    """Verifier for repeated passes over the same growing log.

    It remembers the digest of every entry it has accepted. On later passes an
    entry whose digest matches the remembered one at its position, and whose
    link to the presented predecessor holds, skips the signature check: its
    bytes are the ones already verified. Any changed entry gets the full check.
    """

    def __init__(self, public_key: str | None = None):
        self.public_key = public_key
        self._known: list[str] = []

    def verify(self, entries: Iterable[AuditRecord]) -> VerifyResult:
        prev = GENESIS_HASH
        pinned = self.public_key
        seen: list[str] = []
        for i, rec in enumerate(entries):
            if pinned is None:
                pinned = rec.public_key
            digest = rec.digest()
            if i < len(self._known) and digest == self._known[i]:
                reason = "" if rec.prev_hash == prev else "prev_hash does not match predecessor"
            else:
                reason = _check_entry(rec, prev, pinned)
            if reason:
                return VerifyResult(False, i, i, None, reason)
            seen.append(digest)
            prev = digest
        if len(seen) >= len(self._known):
            self._known = seen
            self.public_key = pinned
        return VerifyResult(True, len(seen))


def iter_file(fh: BinaryIO) -> Iterator[tuple[int, bytes]]:
    """Yield ``(offset, raw_entry)``; a truncated tail yields ``(offset, None)``."""
    offset = 0
    while True:
        head = fh.read(_LEN.size)
        if not head:
            return
        if len(head) < _LEN.size:
            yield offset, None
            return
        (n,) = _LEN.unpack(head)
        raw = fh.read(n)
        if len(raw) < n:
            yield offset, None
            return
        yield offset, raw
        offset += _LEN.size + n


def verify_file(path, public_key: str | None = None) -> VerifyResult:
    prev = GENESIS_HASH
    pinned = public_key
    count = 0
    with open(path, "rb") as fh:
        for i, (offset, raw) in enumerate(iter_file(fh)):
            if raw is None:
                return VerifyResult(False, count, i, offset, "truncated entry")
            try:
                rec = AuditRecord.from_dict(json.loads(raw.decode("utf-8")))
                if rec.entry_bytes() != raw:
                    raise ValueError("entry is not in canonical form")
            except (ValueError, KeyError, TypeError) as exc:
                return VerifyResult(False, count, i, offset, f"unparseable entry: {exc}")
            if pinned is None:
                pinned = rec.public_key
            reason = _check_entry(rec, prev, pinned)
            if reason:
                return VerifyResult(False, count, i, offset, reason)
            prev = rec.digest()
            count += 1
    return VerifyResult(True, count)


def read_file(path) -> list[AuditRecord]:
    with open(path, "rb") as fh:
        return [AuditRecord.from_dict(json.loads(raw)) for _, raw in iter_file(fh) if raw]


def write_file(path, entries: Iterable[AuditRecord]) -> None:
    with open(path, "wb") as fh:
        for rec in entries:
            data = rec.entry_bytes()
            fh.write(_LEN.pack(len(data)) + data)
