"""Hierarchical BiLSTM document encoder with gate fusion and auxiliary heads."""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor


def init_lstm(store: ParamStore, prefix: str, input_dim: int, hidden: int) -> None:
    """Gate order is (input, forget, output, candidate); forget bias starts at 1."""
    store.matrix(f"{prefix}.W_x", (input_dim, 4 * hidden), fan=(input_dim, hidden))
    store.matrix(f"{prefix}.W_h", (hidden, 4 * hidden), fan=(hidden, hidden))
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0
    store.add(f"{prefix}.b", b)


def init_bilstm(store: ParamStore, prefix: str, input_dim: int, hidden: int) -> None:
    init_lstm(store, f"{prefix}.fw", input_dim, hidden)
    init_lstm(store, f"{prefix}.bw", input_dim, hidden)


def lstm(store: ParamStore, prefix: str, x: Tensor, reverse: bool = False) -> Tensor:
    """Run one LSTM direction over the rows of ``x`` ([L, in]) and return [L, hidden]."""
    W_x, W_h, b = store[f"{prefix}.W_x"], store[f"{prefix}.W_h"], store[f"{prefix}.b"]
    hidden = W_h.shape[0]
    pre = ad.add(ad.matmul(x, W_x), b)  # [L, 4H]
    steps = range(x.shape[0] - 1, -1, -1) if reverse else range(x.shape[0])
    h = c = None
    outputs: list[Tensor] = [None] * x.shape[0]
    for t in steps:
        z = pre[t] if h is None else ad.add(pre[t], ad.matmul(h, W_h))
        gates = ad.sigmoid(z[: 3 * hidden])
        i, f, o = gates[:hidden], gates[hidden : 2 * hidden], gates[2 * hidden :]
        g = ad.tanh(z[3 * hidden :])
        c = ad.mul(i, g) if c is None else ad.add(ad.mul(f, c), ad.mul(i, g))
        h = ad.mul(o, ad.tanh(c))
        outputs[t] = h
    return ad.stack(outputs, axis=0)


def bilstm(store: ParamStore, prefix: str, x: Tensor) -> Tensor:
    fw = lstm(store, f"{prefix}.fw", x)
    bw = lstm(store, f"{prefix}.bw", x, reverse=True)
    return ad.concat([fw, bw], axis=1)


def init_encoder(store: ParamStore, embedding_dim: int, word_hidden: int, clause_hidden: int, aux_heads: bool = True) -> None:
    init_bilstm(store, "encoder.word", embedding_dim, word_hidden)
    store.matrix("encoder.W_a", (1, 2 * word_hidden))
    init_bilstm(store, "encoder.emo", 2 * word_hidden, clause_hidden)
    init_bilstm(store, "encoder.cau", 2 * word_hidden, clause_hidden)
    store.matrix("encoder.W_g", (1, 2 * clause_hidden))
    store.bias("encoder.b_g", (1,))
    if aux_heads:
        store.matrix("encoder.W_e", (2, 2 * clause_hidden))
        store.bias("encoder.b_e", (2,))
        store.matrix("encoder.W_c", (2, 2 * clause_hidden))
        store.bias("encoder.b_c", (2,))


def encode_words(store: ParamStore, embedded: np.ndarray | Tensor) -> tuple[Tensor, Tensor]:
    """Word BiLSTM plus attention pooling for one clause.

    Returns the clause vector h_i ([2*word_hidden]) and the attention weights
    over its words.
    """
    x = ad.as_tensor(embedded)
    if x.shape[0] == 0:
        raise ValueError("cannot encode an empty clause")
    states = bilstm(store, "encoder.word", x)  # [L, 2dw]
    scores = ad.matmul(states, ad.transpose(store["encoder.W_a"]))  # [L, 1]
    alpha = ad.softmax(ad.reshape(scores, (-1,)), axis=0)
    return ad.matmul(alpha, states), alpha


def encode_clauses(store: ParamStore, h: Tensor) -> tuple[Tensor, Tensor]:
    """Emotion- and cause-specific BiLSTMs over the clause sequence [|D|, 2dw]."""
    return bilstm(store, "encoder.emo", h), bilstm(store, "encoder.cau", h)


def gate_fuse(store: ParamStore, u_e: Tensor, u_c: Tensor) -> tuple[Tensor, Tensor]:
    """g = sigmoid(W_g u_e + b_g); v = g * u_c + (1 - g) * u_e, row-wise."""
    logits = ad.add(ad.matmul(u_e, ad.transpose(store["encoder.W_g"])), store["encoder.b_g"])
    g = ad.sigmoid(logits)  # [|D|, 1]
    v = ad.add(ad.mul(g, u_c), ad.mul(ad.sub(1.0, g), u_e))
    return g, v


def aux_predict(store: ParamStore, u_e: Tensor, u_c: Tensor) -> tuple[Tensor, Tensor]:
    y_e = ad.softmax(ad.add(ad.matmul(u_e, ad.transpose(store["encoder.W_e"])), store["encoder.b_e"]), axis=-1)
    y_c = ad.softmax(ad.add(ad.matmul(u_c, ad.transpose(store["encoder.W_c"])), store["encoder.b_c"]), axis=-1)
    return y_e, y_c
