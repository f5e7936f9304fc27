import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from trithp.data_io import Dataset
from trithp.encodings import EventSequence
from trithp.estimator import TriThpEstimator, check_sequences


def toy_sequences(n=12, K=2, seed=0):
    rng = np.random.default_rng(seed)
    seqs = []
    for _ in range(n):
        m = rng.integers(4, 9)
        times = np.cumsum(rng.exponential(0.5, size=m)) + 0.5
        seqs.append(EventSequence(times, rng.integers(1, K + 1, size=m), K))
    return seqs


def fast_estimator(**kw):
    defaults = dict(Z=4, n_layers=1, n_heads=1, Zk=3, Zv=3, Zh=5, dropout=0.0,
                    epochs=2, batch_size=4, mc_samples=3, random_state=0)
    defaults.update(kw)
    return TriThpEstimator(**defaults)


class TestCheckSequences:
    def test_accepts_dataset(self):
        ds = Dataset(toy_sequences(3), 2, "x")
        seqs, K = check_sequences(ds)
        assert K == 2 and len(seqs) == 3

    def test_accepts_pair_arrays(self):
        seqs, K = check_sequences([[(1.0, 1), (2.0, 2)], [(0.5, 2), (1.5, 1)]])
        assert K == 2
        assert all(isinstance(s, EventSequence) for s in seqs)

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError, match=r"\(N, 2\)"):
            check_sequences([np.zeros((3, 4))])

    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="at least one"):
            check_sequences([])


class TestEstimator:
    def test_get_params_round_trip_and_clone(self):
        est = fast_estimator(lr=5e-3, branches="pri")
        params = est.get_params()
        assert params["lr"] == 5e-3
        assert params["branches"] == "pri"
        cloned = clone(est)
        assert cloned.get_params() == params

    def test_not_fitted_raises(self):
        with pytest.raises(NotFittedError):
            fast_estimator().predict(toy_sequences(2))

    def test_fit_predict_score(self):
        seqs = toy_sequences(10)
        est = fast_estimator().fit(seqs)
        preds = est.predict(seqs[:3])
        assert len(preds) == 3
        for seq, p in zip(seqs[:3], preds):
            assert p.shape == (len(seq) - 1, 2)
            assert np.all(p[:, 1] >= 1) and np.all(p[:, 1] <= 2)
        score = est.score(seqs[:3])
        assert np.isfinite(score)

    def test_explicit_dev_split(self):
        train = toy_sequences(8, seed=1)
        dev = toy_sequences(3, seed=2)
        est = fast_estimator().fit(train, X_dev=dev)
        assert len(est.history_) >= 1

    def test_pri_ablation_freezes_fusion(self):
        est = fast_estimator(branches="pri").fit(toy_sequences(8, seed=3))
        assert float(est.model_.fusion["ete"].data) == 0.0
        assert float(est.model_.fusion["te"].data) == 0.0

    def test_invalid_branches_rejected(self):
        with pytest.raises(ValueError, match="branches"):
            fast_estimator(branches="dual").fit(toy_sequences(4))

    def test_deterministic_given_random_state(self):
        seqs = toy_sequences(8, seed=4)
        a = fast_estimator(random_state=5).fit(seqs)
        b = fast_estimator(random_state=5).fit(seqs)
        for (n, pa), pb in zip(a.model_.named_parameters().items(),
                               b.model_.named_parameters().values()):
            assert np.array_equal(pa.data, pb.data), n

    def test_evaluate_report(self):
        seqs = toy_sequences(8, seed=6)
        est = fast_estimator().fit(seqs)
        report = est.evaluate(seqs[:4])
        assert 0.0 <= report.accuracy <= 1.0
        assert report.rmse >= 0.0
