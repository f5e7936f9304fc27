"""Three-branch transformer encoder: ETE (event-augmented), PRI (plain),
TE (time-augmented) attention, multi-head aggregation, position-wise FFN,
and weighted fusion of the branch hidden states."""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .encodings import EventSequence, encode_sequence
from .tensor import Tensor, concat_cols, dropout, layer_norm, softmax_rows

ETE, PRI, TE = "ete", "pri", "te"
BRANCHES = (ETE, PRI, TE)


@dataclass
class ModelConfig:
    K: int
    Z: int = 16
    n_layers: int = 2
    n_heads: int = 2
    Zk: int = 8
    Zv: int = 8
    Zh: int = 32
    dropout: float = 0.1

    def __post_init__(self):
        if self.Z % 2 != 0 or self.Z < 2:
            raise ValueError(f"model dimension must be even and >= 2, got Z={self.Z}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if min(self.K, self.n_layers, self.n_heads, self.Zk, self.Zv, self.Zh) < 1:
            raise ValueError("all model dimensions must be >= 1")


def _xavier(rng, fan_in, fan_out, shape=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    shape = shape or (fan_in, fan_out)
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True)


def _zeros(*shape):
    return Tensor(np.zeros(shape), requires_grad=True)


class AttentionHead:
    """Q/K/V projections plus the per-branch auxiliary score parameters."""

    def __init__(self, cfg, branch, rng):
        Z, Zk, Zv = cfg.Z, cfg.Zk, cfg.Zv
        self.W_Q = _xavier(rng, Z, Zk)
        self.W_K = _xavier(rng, Z, Zk)
        self.W_V = _xavier(rng, Z, Zv)
        self.b_q = _zeros(1, Zk)
        self.branch = branch
        if branch == ETE:
            self.b_aux = _zeros(1, Zk)   # added to Q in the event-score term
            self.W_aux = _xavier(rng, Z, Zk)  # projects the event encoding
        elif branch == TE:
            self.b_aux = _zeros(1, Zk)   # added to Q in the time-score term
            self.W_aux = _xavier(rng, Z, Zk)  # projects the temporal encoding
        else:
            self.b_aux = None
            self.W_aux = None

    def params(self, prefix):
        out = {
            f"{prefix}.W_Q": self.W_Q,
            f"{prefix}.W_K": self.W_K,
            f"{prefix}.W_V": self.W_V,
            f"{prefix}.b_q": self.b_q,
        }
        if self.b_aux is not None:
            out[f"{prefix}.b_aux"] = self.b_aux
            out[f"{prefix}.W_aux"] = self.W_aux
        return out


class EncoderLayer:
    def __init__(self, cfg, branch, rng):
        Z, Zv, Zh, S = cfg.Z, cfg.Zv, cfg.Zh, cfg.n_heads
        self.heads = [AttentionHead(cfg, branch, rng) for _ in range(S)]
        self.W_multi = _xavier(rng, S * Zv, Z)
        self.W1 = _xavier(rng, Z, Zh)
        self.b1 = _zeros(1, Zh)
        self.W2 = _xavier(rng, Zh, Z)
        self.b2 = _zeros(1, Z)
        self.ln1_g = Tensor(np.ones(Z), requires_grad=True)
        self.ln1_b = _zeros(Z)
        self.ln2_g = Tensor(np.ones(Z), requires_grad=True)
        self.ln2_b = _zeros(Z)

    def params(self, prefix):
        out = {}
        for s, h in enumerate(self.heads):
            out.update(h.params(f"{prefix}.head{s}"))
        out.update({
            f"{prefix}.W_multi": self.W_multi,
            f"{prefix}.W1": self.W1,
            f"{prefix}.b1": self.b1,
            f"{prefix}.W2": self.W2,
            f"{prefix}.b2": self.b2,
            f"{prefix}.ln1_g": self.ln1_g,
            f"{prefix}.ln1_b": self.ln1_b,
            f"{prefix}.ln2_g": self.ln2_g,
            f"{prefix}.ln2_b": self.ln2_b,
        })
        return out


def causal_mask(N):
    """Position i may attend to positions j <= i."""
    return np.tril(np.ones((N, N), dtype=bool))


def qkv_project(H, head):
    return H @ head.W_Q, H @ head.W_K, H @ head.W_V


def attention_scores(Q, K, head, aux, Zk):
    """Raw (unmasked) score matrix for one head; aux is the N x Z encoding the
    branch injects (event encoding for ETE, temporal encoding for TE)."""
    scores = (Q + head.b_q) @ K.T
    if head.branch != PRI:
        scores = scores + (Q + head.b_aux) @ (aux @ head.W_aux).T
    return scores * (1.0 / np.sqrt(Zk))


def head_attention(H, head, aux, mask, Zk):
    Q, K, V = qkv_project(H, head)
    P = softmax_rows(attention_scores(Q, K, head, aux, Zk), mask)
    return P @ V


def multi_head(H, layer, aux, mask, Zk):
    outs = [head_attention(H, h, aux, mask, Zk) for h in layer.heads]
    return concat_cols(outs) @ layer.W_multi


def encoder_layer(H_in, layer, aux, mask, cfg, rng=None, training=False):
    """Post-norm transformer layer: attention and FFN sublayers, each wrapped
    in dropout + residual + layer norm."""
    A = multi_head(H_in, layer, aux, mask, cfg.Zk)
    X1 = layer_norm(H_in + dropout(A, cfg.dropout, rng, training),
                    layer.ln1_g, layer.ln1_b)
    FF = (X1 @ layer.W1 + layer.b1).relu() @ layer.W2 + layer.b2
    return layer_norm(X1 + dropout(FF, cfg.dropout, rng, training),
                      layer.ln2_g, layer.ln2_b)


class TriThpModel:
    """All learnable state: three encoder stacks, the shared event embedding,
    fusion weights, the intensity head, and the prediction heads."""

    def __init__(self, config: ModelConfig, seed=0):
        cfg = self.config = config
        rng = np.random.default_rng(seed)
        self.M = _xavier(rng, cfg.Z, cfg.K)
        self.layers = {b: [EncoderLayer(cfg, b, rng) for _ in range(cfg.n_layers)]
                       for b in BRANCHES}
        self.fusion = {b: Tensor(np.float64(1.0 / 3.0), requires_grad=True)
                       for b in BRANCHES}
        # intensity head: per type k a base b_k, a current-influence alpha_k,
        # and a weight row w_k
        self.int_b = _zeros(1, cfg.K)
        self.int_alpha = _zeros(1, cfg.K)
        self.int_w = _xavier(rng, cfg.K, cfg.Z, shape=(cfg.K, cfg.Z))
        self.W_time = _xavier(rng, 1, cfg.Z, shape=(1, cfg.Z))
        self.W_type = _xavier(rng, cfg.K, cfg.Z, shape=(cfg.K, cfg.Z))

    def named_parameters(self):
        out = {"M": self.M}
        for b in BRANCHES:
            for i, layer in enumerate(self.layers[b]):
                out.update(layer.params(f"{b}.{i}"))
        for b in BRANCHES:
            out[f"lambda_{b}"] = self.fusion[b]
        out.update({
            "int_b": self.int_b,
            "int_alpha": self.int_alpha,
            "int_w": self.int_w,
            "W_time": self.W_time,
            "W_type": self.W_type,
        })
        return out

    def zero_grad(self):
        for p in self.named_parameters().values():
            p.zero_grad()

    # -- forward --------------------------------------------------------------

    def branch_hidden(self, seq: EventSequence, rng=None, training=False):
        """Run the three encoder stacks; returns dict branch -> N x Z hidden state."""
        cfg = self.config
        C_T, MY_T = encode_sequence(seq, self.M)
        mask = causal_mask(len(seq))
        aux = {ETE: MY_T, PRI: None, TE: C_T}
        hidden = {b: MY_T for b in BRANCHES}
        for i in range(cfg.n_layers):
            for b in BRANCHES:
                hidden[b] = encoder_layer(hidden[b] + C_T, self.layers[b][i],
                                          aux[b], mask, cfg, rng, training)
        return hidden

    def forward(self, seq: EventSequence, rng=None, training=False):
        """Fused hidden state H (N x Z); row i is h(t_i)."""
        hidden = self.branch_hidden(seq, rng, training)
        return (self.fusion[ETE] * hidden[ETE]
                + self.fusion[PRI] * hidden[PRI]
                + self.fusion[TE] * hidden[TE])

    # -- checkpointing --------------------------------------------------------

    def save(self, path):
        blob = {
            "format": "trithp-checkpoint-v1",
            "config": asdict(self.config),
            "params": {name: {"shape": list(p.data.shape),
                              "data": p.data.reshape(-1).tolist()}
                       for name, p in self.named_parameters().items()},
        }
        with open(path, "w") as fh:
            json.dump(blob, fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            blob = json.load(fh)
        if blob.get("format") != "trithp-checkpoint-v1":
            raise ValueError(f"{path}: not a trithp checkpoint")
        model = cls(ModelConfig(**blob["config"]))
        params = model.named_parameters()
        if set(params) != set(blob["params"]):
            raise ValueError(f"{path}: parameter names do not match the config")
        for name, p in params.items():
            entry = blob["params"][name]
            p.data = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        return model
