"""Photodetection event trains and their binned form."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np


@dataclass(frozen=True, eq=False)
class EventTrain:
    times: np.ndarray
    t_end: float
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        if times.size and (times[0] < 0 or times[-1] > self.t_end):
            raise ValueError("event times must lie in [0, t_end]")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("event times must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "meta", {str(k): str(v) for k, v in self.meta.items()})

    def __len__(self):
        return self.times.size


@dataclass(frozen=True, eq=False)
class BinnedCounts:
    counts: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1:
            raise ValueError("counts must be 1-d")
        if not np.issubdtype(counts.dtype, np.integer):
            raise ValueError("counts must be integers")
        if counts.size and counts.min() < 0:
            raise ValueError("counts must be non-negative")
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise ValueError(f"bin width must be > 0, got {self.dt!r}")
        object.__setattr__(self, "counts", counts.astype(np.int64, copy=False))

    def __len__(self):
        return self.counts.size

    @property
    def duration(self):
        return self.counts.size * self.dt

    def rebin(self, factor: int) -> "BinnedCounts":
        """Merge ``factor`` consecutive bins; a trailing partial group is dropped."""
        if factor < 1:
            raise ValueError("rebin factor must be >= 1")
        m = self.counts.size // factor
        return BinnedCounts(self.counts[: m * factor].reshape(m, factor).sum(axis=1), self.dt * factor, self.t0)

    def window(self, t_start) -> "BinnedCounts":
        """Drop whole bins before ``t_start``."""
        k = int(np.ceil((t_start - self.t0) / self.dt - 1e-9))
        k = max(k, 0)
        return BinnedCounts(self.counts[k:], self.dt, self.t0 + k * self.dt)


# Binary event-train format: magic, header length, UTF-8 "key=value" header
# lines, then little-endian float64 timestamps.
_MAGIC = b"FBLEVT1\n"


def write_event_train(train: EventTrain, path) -> Path:
    path = Path(path)
    header = "\n".join(f"{k}={v}" for k, v in sorted({**train.meta, "t_end": repr(train.t_end)}.items()))
    raw = header.encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)
        fh.write(np.asarray(train.times, dtype="<f8").tobytes())
    return path


def read_event_train(path) -> EventTrain:
    data = Path(path).read_bytes()
    if not data.startswith(_MAGIC):
        raise ValueError(f"{path}: not an event-train file")
    off = len(_MAGIC)
    (hlen,) = struct.unpack_from("<Q", data, off)
    off += 8
    meta = dict(line.split("=", 1) for line in data[off: off + hlen].decode().splitlines() if line)
    off += hlen
    times = np.frombuffer(data, dtype="<f8", offset=off).astype(float)
    t_end = float(meta.pop("t_end"))
    return EventTrain(times, t_end, meta)
