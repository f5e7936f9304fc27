"""Scikit-learn style front end: fit on a collection of event sequences,
predict next-event times and types, score by held-out log-likelihood."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils import check_random_state

from .attention import TriThpModel
from .data_io import Dataset
from .encodings import EventSequence
from .evaluator import evaluate
from .likelihood import NI
from .trainer import TrainConfig, train


def check_sequences(X, K=None):
    """Coerce input into a list of EventSequence.

    Accepts a Dataset, a list of EventSequence, or a list of per-sequence
    arrays of (time, type) pairs.
    """
    if isinstance(X, Dataset):
        return X.sequences, X.K
    seqs = []
    for x in X:
        if isinstance(x, EventSequence):
            seqs.append(x)
        else:
            arr = np.asarray(x, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise ValueError(
                    "each sequence must be an EventSequence or an (N, 2) array "
                    f"of (time, type) pairs; got shape {arr.shape}"
                )
            seqs.append(EventSequence(arr[:, 0], arr[:, 1].astype(np.intp),
                                      int(arr[:, 1].max())))
    if not seqs:
        raise ValueError("need at least one sequence")
    inferred_K = K or max(int(s.types.max()) for s in seqs)
    return [EventSequence(s.times, s.types, inferred_K) for s in seqs], inferred_K


class TriThpEstimator(BaseEstimator):
    """Tri-transformer Hawkes process with the scikit-learn fit/predict API.

    Parameters mirror TrainConfig; `K` may be fixed up front or inferred
    from the training data.
    """

    def __init__(self, K=None, Z=16, n_layers=2, n_heads=2, Zk=8, Zv=8, Zh=32,
                 dropout=0.1, epochs=50, batch_size=16, lr=1e-3, method="mc",
                 mc_samples=20, patience=10, validation_fraction=0.1,
                 random_state=0, branches="tri"):
        self.K = K
        self.Z = Z
        self.n_layers = n_layers
        self.n_heads = n_heads
        self.Zk = Zk
        self.Zv = Zv
        self.Zh = Zh
        self.dropout = dropout
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.method = method
        self.mc_samples = mc_samples
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.random_state = random_state
        self.branches = branches

    def _train_config(self):
        freeze = []
        if self.branches == "pri":
            freeze = ["lambda_ete", "lambda_te"]
        elif self.branches != "tri":
            raise ValueError(f"branches must be 'tri' or 'pri', got {self.branches!r}")
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, lr=self.lr,
            method=self.method, mc_samples=self.mc_samples,
            patience=self.patience, seed=self.random_state,
            dropout=self.dropout, Z=self.Z, n_layers=self.n_layers,
            n_heads=self.n_heads, Zk=self.Zk, Zv=self.Zv, Zh=self.Zh,
            freeze=freeze,
        )

    def fit(self, X, y=None, X_dev=None):
        seqs, K = check_sequences(X, self.K)
        config = self._train_config()
        model = TriThpModel(config.model_config(K), seed=self.random_state)
        if self.branches == "pri":
            model.fusion["ete"].data = np.float64(0.0)
            model.fusion["pri"].data = np.float64(1.0)
            model.fusion["te"].data = np.float64(0.0)
        if X_dev is not None:
            dev_seqs, _ = check_sequences(X_dev, K)
            train_seqs = seqs
        else:
            rs = check_random_state(self.random_state)
            order = rs.permutation(len(seqs))
            n_dev = max(1, int(round(self.validation_fraction * len(seqs))))
            dev_seqs = [seqs[i] for i in order[:n_dev]]
            train_seqs = [seqs[i] for i in order[n_dev:]] or dev_seqs
        self.model_, self.history_ = train(
            model, Dataset(train_seqs, K, "train"), Dataset(dev_seqs, K, "dev"),
            config,
        )
        self.K_ = K
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this TriThpEstimator is not fitted yet; call fit first")

    def predict(self, X):
        """Per sequence, the predicted (time, type) of events 2..N as an
        (N-1) x 2 array; column 1 holds 1-based type labels."""
        self._check_fitted()
        seqs, _ = check_sequences(X, self.K_)
        out = []
        for seq in seqs:
            H = self.model_.forward(seq)
            from .likelihood import prediction_tensors
            t_hat, p_hat = prediction_tensors(self.model_, H)
            k_hat = np.argmax(p_hat.data, axis=1) + 1
            out.append(np.column_stack([t_hat.data, k_hat.astype(np.float64)]))
        return out

    def score(self, X, y=None):
        """Mean log-likelihood per event (nats) under the trapezoidal compensator."""
        self._check_fitted()
        seqs, _ = check_sequences(X, self.K_)
        return evaluate(self.model_, Dataset(seqs, self.K_, "score"),
                        method=NI).ll_per_event

    def evaluate(self, X, method=NI):
        self._check_fitted()
        seqs, _ = check_sequences(X, self.K_)
        return evaluate(self.model_, Dataset(seqs, self.K_, "eval"), method=method)
