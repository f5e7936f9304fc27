"""Event sequences and their temporal / event-type encodings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, gather_rows


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class EventSequence:
    """Ordered (time, type) pairs; types are 1-based, times strictly increasing."""

    times: np.ndarray
    types: np.ndarray  # 1-based labels
    K: int

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=np.float64))
        object.__setattr__(self, "types", np.asarray(self.types, dtype=np.intp))
        if self.times.shape != self.types.shape or self.times.ndim != 1:
            raise DataError("times and types must be 1-d arrays of equal length")
        if len(self.times) < 2:
            raise DataError("a sequence needs at least 2 events")
        if not np.all(np.diff(self.times) > 0):
            bad = int(np.argmin(np.diff(self.times) > 0))
            raise DataError(f"event times must be strictly increasing (violation at index {bad + 1})")
        if not np.all(np.isfinite(self.times)) or self.times[0] < 0:
            raise DataError("event times must be finite and nonnegative")
        if self.types.min() < 1 or self.types.max() > self.K:
            bad = int(np.argmax((self.types < 1) | (self.types > self.K)))
            raise DataError(f"event type out of range [1..{self.K}] at index {bad}")

    def __len__(self):
        return len(self.times)


def temporal_encoding_matrix(times, Z):
    """Sinusoidal encodings for an array of timestamps, stacked into N x Z.

    Component j: even j -> sin(t / 10000^(j/Z)), odd j -> cos(t / 10000^((j-1)/Z)).
    """
    if Z % 2 != 0 or Z < 2:
        raise ValueError(f"encoding dimension must be even and >= 2, got {Z}")
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    j = np.arange(Z)
    even = j % 2 == 0
    freq = np.where(even, 10000.0 ** (j / Z), 10000.0 ** ((j - 1) / Z))
    phase = times[:, None] / freq
    return np.where(even, np.sin(phase), np.cos(phase))


def temporal_encoding(t, Z):
    """Encoding of a single timestamp as a length-Z vector."""
    return temporal_encoding_matrix([t], Z)[0]


_C_CACHE = {}


def _cached_temporal_matrix(times, Z):
    key = (times.tobytes(), Z)
    hit = _C_CACHE.get(key)
    if hit is None:
        if len(_C_CACHE) > 4096:
            _C_CACHE.clear()
        hit = _C_CACHE[key] = temporal_encoding_matrix(times, Z)
    return hit


def encode_sequence(seq: EventSequence, M: Tensor):
    """Return (C_T, MY_T): N x Z temporal encoding (constant) and N x Z event
    embedding rows (row i is column k_i of the Z x K embedding matrix M)."""
    Z, K = M.shape
    if K != seq.K:
        raise DataError(f"embedding has {K} type columns but sequence declares K={seq.K}")
    C_T = Tensor(_cached_temporal_matrix(seq.times, Z))
    MY_T = gather_rows(M.T, seq.types - 1)
    return C_T, MY_T
