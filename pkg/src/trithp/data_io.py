"""Dataset loading, validation, and padded batching.

File format is JSON-Lines: an optional header object {"K": int} followed by
one object per sequence, {"seq": [{"t": number, "k": int >= 1}, ...]}.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .encodings import DataError, EventSequence

log = logging.getLogger(__name__)


@dataclass
class Dataset:
    sequences: list
    K: int
    name: str = ""

    def __len__(self):
        return len(self.sequences)

    @property
    def num_events(self):
        return sum(len(s) for s in self.sequences)


@dataclass
class PaddedBatch:
    """Right-padded batch; pad_mask is True at real positions. Types keep
    their 1-based labels, pads are 0."""

    times: np.ndarray      # B x N_max float
    types: np.ndarray      # B x N_max int
    pad_mask: np.ndarray   # B x N_max bool
    lengths: np.ndarray    # B

    def sequences(self, K):
        return [EventSequence(self.times[b, :n], self.types[b, :n], K)
                for b, n in enumerate(self.lengths)]


def load_dataset(path, K=None, name=None, shift_zero_start=True,
                 normalize_times=False):
    """Load and validate a JSON-Lines dataset.

    Sequences starting at t=0 are shifted forward by one time unit (the
    intensity divides by t_i). With `normalize_times`, all times are rescaled
    so the mean inter-event gap is 1.
    """
    sequences = []
    header_K = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: malformed JSON ({e})") from e
            if "K" in obj and "seq" not in obj:
                header_K = int(obj["K"])
                continue
            if "seq" not in obj:
                raise DataError(f"{path}:{lineno}: object has neither 'seq' nor 'K'")
            times = np.array([ev["t"] for ev in obj["seq"]], dtype=np.float64)
            types = np.array([ev["k"] for ev in obj["seq"]], dtype=np.intp)
            if len(times) and times[0] == 0.0 and shift_zero_start:
                log.warning("%s:%d: sequence starts at t=0; shifting by 1 time unit",
                            path, lineno)
                times = times + 1.0
            try:
                seq_K = int(types.max()) if len(types) else 1
                sequences.append(EventSequence(times, types, seq_K))
            except DataError as e:
                raise DataError(f"{path}:{lineno}: {e}") from e

    inferred_K = K or header_K or max((s.K for s in sequences), default=1)
    for s in sequences:
        if s.K > inferred_K:
            raise DataError(
                f"{path}: sequence uses type {s.K} but the dataset declares K={inferred_K}"
            )
    sequences = [EventSequence(s.times, s.types, inferred_K) for s in sequences]

    if normalize_times:
        gaps = np.concatenate([np.diff(s.times) for s in sequences]) if sequences else np.array([1.0])
        scale = 1.0 / gaps.mean()
        sequences = [EventSequence(s.times * scale, s.types, inferred_K) for s in sequences]

    return Dataset(sequences, inferred_K, name or str(path))


def save_dataset(sequences, K, path):
    """Write sequences (with a K header line) in the JSON-Lines schema."""
    with open(path, "w") as fh:
        fh.write(json.dumps({"K": int(K)}) + "\n")
        for s in sequences:
            events = [{"t": float(t), "k": int(k)} for t, k in zip(s.times, s.types)]
            fh.write(json.dumps({"seq": events}) + "\n")


def make_batches(ds: Dataset, batch_size, shuffle_seed=None):
    """Partition the dataset into padded batches; deterministic given seed."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(len(ds))
    if shuffle_seed is not None:
        np.random.default_rng(shuffle_seed).shuffle(order)
    batches = []
    for start in range(0, len(ds), batch_size):
        chunk = [ds.sequences[i] for i in order[start:start + batch_size]]
        n_max = max(len(s) for s in chunk)
        B = len(chunk)
        times = np.zeros((B, n_max))
        types = np.zeros((B, n_max), dtype=np.intp)
        pad_mask = np.zeros((B, n_max), dtype=bool)
        lengths = np.array([len(s) for s in chunk], dtype=np.intp)
        for b, s in enumerate(chunk):
            times[b, :len(s)] = s.times
            types[b, :len(s)] = s.types
            pad_mask[b, :len(s)] = True
        batches.append(PaddedBatch(times, types, pad_mask, lengths))
    return batches
