"""Labeled IQ container for exchanging synthetic datasets.

A container file is a sequence of records. Each record is::

    magic        4 bytes   b"TVIQ"
    version      uint16    1
    class index  uint8     position in CLASS_ORDER, 255 for unlabeled
    reserved     uint8     0
    sample_rate  float64   Hz
    center_freq  float64   Hz
    snr_db       float64   NaN when unknown
    capture_time float64   seconds
    n_samples    uint64
    body         n_samples * (float32 I, float32 Q)

All fields are little-endian.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .spectrum import CLASS_ORDER, SignalClass
from .waveforms import IqBuffer

MAGIC = b"TVIQ"
VERSION = 1
UNLABELED = 255
_HEADER = struct.Struct("<4sHBBddddQ")


class ContainerError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledBuffer:
    buffer: IqBuffer
    label: SignalClass | None = None
    snr_db: float = float("nan")


def encode_record(item: LabeledBuffer) -> bytes:
    buf = item.buffer
    label = UNLABELED if item.label is None else CLASS_ORDER.index(item.label)
    header = _HEADER.pack(MAGIC, VERSION, label, 0, buf.sample_rate_hz, buf.center_freq_hz,
                          item.snr_db, buf.capture_time, len(buf))
    body = np.empty(2 * len(buf), dtype="<f4")
    body[0::2] = buf.samples.real
    body[1::2] = buf.samples.imag
    return header + body.tobytes()


def write_container(fh: BinaryIO, items: Iterable[LabeledBuffer]) -> int:
    count = 0
    for item in items:
        fh.write(encode_record(item))
        count += 1
    return count


def read_container(fh: BinaryIO) -> Iterator[LabeledBuffer]:
    while True:
        raw = fh.read(_HEADER.size)
        if not raw:
            return
        if len(raw) < _HEADER.size:
            raise ContainerError("truncated record header")
        magic, version, label, _, fs, fc, snr, t, n = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise ContainerError(f"bad magic {magic!r}")
        if version != VERSION:
            raise ContainerError(f"unsupported container version {version}")
        body = fh.read(8 * n)
        if len(body) < 8 * n:
            raise ContainerError("truncated record body")
        # interleaved little-endian float32 I/Q is exactly the "<c8" layout
        samples = np.frombuffer(body, dtype="<c8").astype(np.complex64)
        cls = None if label == UNLABELED else CLASS_ORDER[label]
        yield LabeledBuffer(IqBuffer(samples, fs, fc, t), cls, snr)


def save(path, items: Iterable[LabeledBuffer]) -> int:
    with open(path, "wb") as fh:
        return write_container(fh, items)


def load(path) -> list[LabeledBuffer]:
    with open(path, "rb") as fh:
        return list(read_container(fh))
