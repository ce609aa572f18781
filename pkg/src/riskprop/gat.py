"""Graph attention layer over an explicit undirected edge list.

Per head: project features, score each ordered (node, neighbor) pair with a
learned attention vector through a LeakyReLU, softmax the scores over each
node's neighborhood (self-loop included, max-subtracted for stability), and
aggregate the projected neighbor rows. Heads merge by concatenation or mean;
hidden layers apply ELU, output layers are linear.

Message pairs are sorted by (receiver, sender), and scatter reductions follow
that order, so outputs are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass
class GATLayerParams:
    """Per-head projection weights [d_out, d_in] and attention vectors [2*d_out]."""

    weights: list[Tensor]
    attn: list[Tensor]
    leaky_slope: float = 0.2
    head_merge: str = "concat"
    activation: str = "elu"

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.attn) or not self.weights:
            raise ValueError("need one attention vector per head, at least one head")
        if self.head_merge not in ("concat", "mean"):
            raise ValueError(f"unknown head_merge {self.head_merge!r}")
        if self.activation not in ("elu", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")
        for w, a in zip(self.weights, self.attn):
            if a.data.shape != (2 * w.data.shape[0],):
                raise ValueError("attention vector must have 2 * d_out entries")

    @property
    def num_heads(self) -> int:
        return len(self.weights)

    @property
    def d_in(self) -> int:
        return self.weights[0].data.shape[1]

    @property
    def d_out(self) -> int:
        per_head = self.weights[0].data.shape[0]
        return per_head * len(self.weights) if self.head_merge == "concat" else per_head


def init_gat_layer(
    rng: np.random.Generator,
    d_in: int,
    d_out_head: int,
    num_heads: int = 1,
    head_merge: str = "concat",
    activation: str = "elu",
    leaky_slope: float = 0.2,
) -> GATLayerParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init; heads drawn in order, W then a."""
    weights, attn = [], []
    for _ in range(num_heads):
        bw = 1.0 / np.sqrt(d_in)
        weights.append(Tensor(rng.uniform(-bw, bw, size=(d_out_head, d_in))))
        ba = 1.0 / np.sqrt(2 * d_out_head)
        attn.append(Tensor(rng.uniform(-ba, ba, size=2 * d_out_head)))
    return GATLayerParams(
        weights=weights,
        attn=attn,
        leaky_slope=leaky_slope,
        head_merge=head_merge,
        activation=activation,
    )


def build_message_pairs(edges: np.ndarray, num_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """(receiver, sender) arrays: both directions of every edge plus self-loops,
    lexsorted by (receiver, sender)."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    loops = np.arange(num_nodes, dtype=np.int64)
    dst = np.concatenate([edges[:, 0], edges[:, 1], loops])
    src = np.concatenate([edges[:, 1], edges[:, 0], loops])
    order = np.lexsort((src, dst))
    return dst[order], src[order]


def _segment_max(values: np.ndarray, sorted_idx: np.ndarray, num_segments: int) -> np.ndarray:
    # sorted_idx must be ascending and cover every segment (self-loops ensure it)
    starts = np.searchsorted(sorted_idx, np.arange(num_segments))
    return np.maximum.reduceat(values, starts)


def gat_layer_forward(
    params: GATLayerParams,
    x: Tensor,
    edges: np.ndarray | tuple[np.ndarray, np.ndarray],
    return_attention: bool = False,
):
    """One attention layer on features x [n, d_in] and an undirected edge list.

    `edges` may also be a prebuilt (receiver, sender) pair from
    build_message_pairs, so stacked layers share one construction. With
    return_attention, also returns (receiver, sender, [alpha per head]);
    alpha rows grouped by receiver sum to 1.
    """
    n = x.data.shape[0]
    if isinstance(edges, tuple):
        dst, src = edges
    else:
        dst, src = build_message_pairs(edges, n)

    head_outs: list[Tensor] = []
    alphas: list[np.ndarray] = []
    for w, a in zip(params.weights, params.attn):
        d_head = w.data.shape[0]
        z = ad.matmul(x, ad.transpose(w))
        score_recv = ad.matvec(z, ad.slice1d(a, 0, d_head))
        score_send = ad.matvec(z, ad.slice1d(a, d_head, 2 * d_head))
        e = ad.leaky_relu(
            ad.add(ad.gather_rows(score_recv, dst), ad.gather_rows(score_send, src)),
            params.leaky_slope,
        )
        # max subtraction: the per-neighborhood shift is constant w.r.t. the grad
        shift = -_segment_max(e.data, dst, n)
        ez = ad.exp(ad.add_const(e, shift[dst]))
        denom = ad.scatter_sum(ez, dst, n)
        alpha = ad.div(ez, ad.gather_rows(denom, dst))
        out = ad.scatter_sum(ad.colmul(alpha, ad.gather_rows(z, src)), dst, n)
        head_outs.append(out)
        if return_attention:
            alphas.append(alpha.data.copy())

    if len(head_outs) == 1:
        merged = head_outs[0]
    elif params.head_merge == "concat":
        merged = ad.concat_cols(head_outs)
    else:
        acc = head_outs[0]
        for h in head_outs[1:]:
            acc = ad.add(acc, h)
        merged = ad.scale_shift(acc, 1.0 / len(head_outs))

    out = ad.elu(merged) if params.activation == "elu" else merged
    if return_attention:
        return out, (dst, src, alphas)
    return out


def gat_stack_forward(
    layers: list[GATLayerParams], x: Tensor, edges: np.ndarray | tuple[np.ndarray, np.ndarray]
) -> Tensor:
    if not isinstance(edges, tuple):
        edges = build_message_pairs(edges, x.data.shape[0])
    for layer in layers:
        x = gat_layer_forward(layer, x, edges)
    return x
