"""Conditional intensity, sequence log-likelihood with Monte Carlo and
trapezoidal compensator estimators, next-event prediction heads and their
losses, and the combined training objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encodings import EventSequence
from .tensor import Tensor, gather_rows, softmax_rows, take_per_row

MC, NI = "mc", "ni"
PROB_FLOOR = 1e-12


class NumericError(ArithmeticError):
    pass


@dataclass
class LikelihoodReport:
    log_intensity_sum: float
    compensator: float
    method: str

    @property
    def ll(self):
        return self.log_intensity_sum - self.compensator


def _check_times(seq):
    if seq.times[0] <= 0:
        raise ValueError(
            "sequences must start at t > 0 (the intensity divides by t_i); "
            "the data loader shifts offending sequences at load time"
        )


def intensity_k(model, t, t_i, h_ti, k):
    """lambda_k(t | H_t) for one type (1-based k), given the hidden state of the
    latest event at time t_i <= t. Returns a float."""
    if t_i <= 0:
        raise ValueError("intensity is undefined at t_i <= 0 (division by t_i)")
    j = k - 1
    z = (model.int_b.data[0, j]
         + model.int_alpha.data[0, j] * (t - t_i) / t_i
         + float(model.int_w.data[j] @ np.asarray(h_ti)))
    return float(np.logaddexp(0.0, z))


def total_intensity(model, t, t_i, h_ti):
    """Sum of lambda_k over all K types."""
    return sum(intensity_k(model, t, t_i, h_ti, k) for k in range(1, model.config.K + 1))


def intensities_at_events(model, H):
    """N x K tensor of lambda_k(t_i | H_i); the relative-time term vanishes at
    the event's own timestamp."""
    return (H @ model.int_w.T + model.int_b).softplus()


def event_log_intensity_sum(model, H):
    """Sum_i log lambda(t_i | H_i) as a scalar tensor."""
    lam = intensities_at_events(model, H)
    return lam.sum(axis=1).log().sum()


def compensator_trapezoid(model, seq: EventSequence, H):
    """Trapezoidal estimate of int_{t_1}^{t_N} lambda(t | H_t) dt, evaluating
    the intensity at event times under each event's own hidden state."""
    lam_tot = intensities_at_events(model, H).sum(axis=1)
    dt = Tensor(np.diff(seq.times))
    return (dt * (lam_tot[1:] + lam_tot[:-1])).sum() * 0.5


def compensator_mc(model, seq: EventSequence, H, O, rng):
    """Unbiased Monte Carlo estimate: O uniform samples per inter-event
    interval, intensity conditioned on the left endpoint's hidden state."""
    if O < 1:
        raise ValueError(f"need at least one sample per interval, got O={O}")
    _check_times(seq)
    N = len(seq)
    t_left = seq.times[:-1]
    dt = np.diff(seq.times)
    # u[i, o] ~ Uniform(t_i, t_{i+1})
    u = t_left[:, None] + dt[:, None] * rng.random((N - 1, O))
    rel = ((u - t_left[:, None]) / t_left[:, None]).reshape(-1, 1)  # (N-1)O x 1
    idx = np.repeat(np.arange(N - 1), O)
    base = gather_rows(H, idx) @ model.int_w.T + model.int_b  # (N-1)O x K
    lam = (base + Tensor(rel) * model.int_alpha).softplus()
    lam_tot = lam.sum(axis=1).reshape(N - 1, O).mean(axis=1)
    return (Tensor(dt) * lam_tot).sum()


def log_likelihood(model, seq, H, method=NI, O=20, rng=None):
    """Eq.-(14)-style log-likelihood report for one sequence."""
    event_term = event_log_intensity_sum(model, H)
    if method == NI:
        comp = compensator_trapezoid(model, seq, H)
    elif method == MC:
        if rng is None:
            raise ValueError("Monte Carlo compensator needs an rng")
        comp = compensator_mc(model, seq, H, O, rng)
    else:
        raise ValueError(f"unknown integration method {method!r}; use 'mc' or 'ni'")
    for label, v in (("event term", event_term), ("compensator", comp)):
        if not np.isfinite(v.data):
            raise NumericError(f"non-finite {label} in log-likelihood")
    return event_term, comp


def log_likelihood_report(model, seq, H, method=NI, O=20, rng=None):
    event_term, comp = log_likelihood(model, seq, H, method, O, rng)
    return LikelihoodReport(float(event_term.data), float(comp.data), method)


def predict_next(model, h_ti):
    """Next-event prediction from a hidden state: (t_hat, p_hat, k_hat) with
    k_hat 1-based; argmax ties break to the smallest index."""
    h = Tensor.as_tensor(h_ti).reshape(-1, 1)
    t_hat = float((model.W_time.data @ h.data)[0, 0])
    logits = model.W_type.data @ h.data
    p = softmax_rows(Tensor(logits.T)).data[0]
    return t_hat, p, int(np.argmax(p)) + 1


def prediction_tensors(model, H):
    """Predicted times and type distributions for events 2..N, each produced
    from the previous event's hidden state."""
    H_prev = H[:-1]
    t_hat = (H_prev @ model.W_time.T).reshape(-1)
    p_hat = softmax_rows(H_prev @ model.W_type.T)
    return t_hat, p_hat


def prediction_losses(model, seq: EventSequence, H):
    """(L_time, L_type) summed over events 2..N."""
    t_hat, p_hat = prediction_tensors(model, H)
    dt = Tensor(seq.times[1:]) - t_hat
    L_time = (dt ** 2).sum()
    p_true = take_per_row(p_hat, seq.types[1:] - 1).clip_min(PROB_FLOOR)
    L_type = -p_true.log().sum()
    return L_time, L_type


def sequence_objective(model, seq, method=NI, O=20, rng=None, training=False,
                       forward_rng=None):
    """-L(X) + L_type(X) + L_time(X) for one sequence, as a scalar tensor."""
    H = model.forward(seq, rng=forward_rng, training=training)
    event_term, comp = log_likelihood(model, seq, H, method, O, rng)
    L_time, L_type = prediction_losses(model, seq, H)
    return -(event_term - comp) + L_type + L_time


def objective(model, seqs, method=NI, O=20, rng=None, training=False,
              forward_rng=None, weights=(1.0, 1.0, 1.0)):
    """Summed objective over a batch of sequences (Eq.-(18)-style); `weights`
    scales the (ll, type, time) terms and defaults to the plain unweighted sum."""
    w_ll, w_type, w_time = weights
    total = Tensor(0.0)
    for seq in seqs:
        H = model.forward(seq, rng=forward_rng, training=training)
        event_term, comp = log_likelihood(model, seq, H, method, O, rng)
        L_time, L_type = prediction_losses(model, seq, H)
        total = total + (-(event_term - comp) * w_ll
                         + L_type * w_type + L_time * w_time)
    return total
