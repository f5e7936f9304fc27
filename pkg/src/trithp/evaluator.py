"""Held-out metrics: log-likelihood (nats), event-type prediction accuracy,
and time-prediction RMSE."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, asdict

import numpy as np

from .data_io import Dataset
from .likelihood import NI, log_likelihood_report, prediction_tensors


@dataclass
class EvalReport:
    ll_per_event: float
    ll_per_sequence: float
    ll_total: float
    accuracy: float
    rmse: float
    num_events: int
    num_sequences: int
    method: str
    normalize_times: bool = False

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)

    def to_csv_row(self, path, dataset_name=""):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["dataset", "ll_per_event", "accuracy", "rmse",
                        "events", "sequences"])
            w.writerow([dataset_name, repr(self.ll_per_event),
                        repr(self.accuracy), repr(self.rmse),
                        self.num_events, self.num_sequences])


def evaluate(model, dataset: Dataset, method=NI, O=20, seed=0,
             normalize_times=False):
    """Score a trained model on a dataset.

    Accuracy and RMSE follow the losses' convention: predictions for events
    2..N come from the previous event's hidden state.
    """
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    ll_total = 0.0
    sq_err = 0.0
    correct = 0
    n_pred = 0
    rng = np.random.default_rng(seed)
    for seq in dataset.sequences:
        H = model.forward(seq)
        report = log_likelihood_report(model, seq, H, method=method, O=O, rng=rng)
        ll_total += report.ll
        t_hat, p_hat = prediction_tensors(model, H)
        k_hat = np.argmax(p_hat.data, axis=1) + 1
        correct += int(np.sum(k_hat == seq.types[1:]))
        sq_err += float(np.sum((seq.times[1:] - t_hat.data) ** 2))
        n_pred += len(seq) - 1
    num_events = dataset.num_events
    return EvalReport(
        ll_per_event=ll_total / num_events,
        ll_per_sequence=ll_total / len(dataset),
        ll_total=ll_total,
        accuracy=correct / n_pred,
        rmse=float(np.sqrt(sq_err / n_pred)),
        num_events=num_events,
        num_sequences=len(dataset),
        method=method,
        normalize_times=normalize_times,
    )
