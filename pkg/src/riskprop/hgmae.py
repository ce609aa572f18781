"""Masked-autoencoder pre-training for heterogeneous graphs.

One training step corrupts half the nodes' feature rows (a learnable mask
token, with a small share substituted by another node's features), encodes
with a GAT stack, re-masks the corrupted latent rows with a second learnable
token, decodes with a GAT layer, and scores reconstruction with a scaled
cosine error averaged over the masked rows. The step repeats this on the
full graph and on every single-relation-type subgraph with independent mask
draws, and combines the terms as

    total = full_term + (eta / K_eff) * sum of subgraph terms

where K_eff counts edge types that actually have edges. With eta = 0 only
the full-graph term is computed, which is the plain homogeneous masked
autoencoder this model extends.

Inference re-runs the encoder on uncorrupted features over the full graph;
no masking, no subgraphs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .gat import GATLayerParams, build_message_pairs, gat_stack_forward, init_gat_layer
from .graph import HeteroGraph, Subgraph, atomic_write_text, extract_subgraph
from .optim import AdamState, adam_step


class MaskingError(ValueError):
    pass


@dataclass
class TrainConfig:
    """Pre-training hyperparameters.

    gamma sharpens the per-row cosine penalty; eta weights the mean of the
    per-edge-type subgraph reconstruction terms (0 disables them). Encoder is
    hidden_heads concatenated attention heads of hidden_head_dim each, then a
    single head down to d_emb; decoder is one head back to the input width.
    """

    mask_ratio: float = 0.5
    random_sub_rate: float = 0.15
    gamma: float = 1.0
    eta: float = 1.0
    d_emb: int = 32
    epochs: int = 300
    lr: float = 5e-3
    hidden_heads: int = 4
    hidden_head_dim: int = 16
    rng_seed: int = 0

    def __post_init__(self) -> None:
        problems = []
        if not 0.0 < self.mask_ratio < 1.0:
            problems.append("mask_ratio must be in (0, 1)")
        if not 0.0 <= self.random_sub_rate <= 1.0:
            problems.append("random_sub_rate must be in [0, 1]")
        if self.gamma < 1.0:
            problems.append("gamma must be >= 1")
        if self.eta < 0.0:
            problems.append("eta must be >= 0")
        if self.d_emb < 1 or self.hidden_heads < 1 or self.hidden_head_dim < 1:
            problems.append("d_emb, hidden_heads, hidden_head_dim must be >= 1")
        if self.epochs < 0:
            problems.append("epochs must be >= 0")
        if self.lr <= 0:
            problems.append("lr must be > 0")
        if problems:
            raise ValueError("invalid TrainConfig: " + "; ".join(problems))


@dataclass
class MaskPlan:
    """A sampled corruption: which rows are masked and how each is replaced.

    token_ids rows get the learnable mask token; random_ids rows get the
    feature row of the aligned donor in random_src_ids (donors are drawn
    uniformly, with replacement, from outside the masked set). rng_seed is
    the child seed the draw used, so a plan is reproducible on its own.
    """

    num_nodes: int
    masked_ids: np.ndarray
    token_ids: np.ndarray
    random_ids: np.ndarray
    random_src_ids: np.ndarray
    rng_seed: int


def sample_mask(n: int, cfg: TrainConfig, rng: np.random.Generator) -> MaskPlan:
    """Uniform mask draw: round(mask_ratio*n) rows, round(random_sub_rate*count)
    of them substituted instead of tokenized."""
    if n < 2:
        raise MaskingError(f"graph too small to mask: {n} node(s)")
    count = int(round(cfg.mask_ratio * n))
    if count == 0:
        raise MaskingError(f"graph too small to mask: ratio {cfg.mask_ratio} of {n} rounds to 0")
    if count >= n:
        raise MaskingError(f"mask of {count} rows would cover all {n} nodes")
    plan_seed = int(rng.integers(0, 2**63))
    prng = np.random.default_rng(plan_seed)
    masked = np.sort(prng.choice(n, size=count, replace=False))
    n_random = int(round(cfg.random_sub_rate * count))
    positions = np.sort(prng.choice(count, size=n_random, replace=False))
    random_ids = masked[positions]
    token_ids = np.setdiff1d(masked, random_ids)
    pool = np.setdiff1d(np.arange(n), masked)
    random_src = pool[prng.integers(0, pool.size, size=n_random)]
    return MaskPlan(
        num_nodes=n,
        masked_ids=masked,
        token_ids=token_ids,
        random_ids=random_ids,
        random_src_ids=random_src,
        rng_seed=plan_seed,
    )


@dataclass
class ModelParams:
    """All trainable tensors: encoder/decoder attention layers plus the two
    learnable corruption tokens."""

    encoder: list[GATLayerParams]
    decoder: list[GATLayerParams]
    mask_token: Tensor
    remask_token: Tensor

    @property
    def d_in(self) -> int:
        return self.mask_token.data.shape[0]

    @property
    def d_emb(self) -> int:
        return self.remask_token.data.shape[0]

    def named_tensors(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for stack_name, stack in (("encoder", self.encoder), ("decoder", self.decoder)):
            for li, layer in enumerate(stack):
                for hi, (w, a) in enumerate(zip(layer.weights, layer.attn)):
                    out[f"{stack_name}.{li}.head{hi}.W"] = w
                    out[f"{stack_name}.{li}.head{hi}.a"] = a
        out["mask_token"] = self.mask_token
        out["remask_token"] = self.remask_token
        return out

    def zero_grads(self) -> None:
        for t in self.named_tensors().values():
            t.zero_grad()


def init_params(d_in: int, cfg: TrainConfig, rng: np.random.Generator) -> ModelParams:
    """Two-layer encoder (multi-head hidden, single-head output), one-layer
    decoder; tokens start at zero. Layers draw in order, W before a."""
    encoder = [
        init_gat_layer(rng, d_in, cfg.hidden_head_dim, cfg.hidden_heads, "concat", "elu"),
        init_gat_layer(rng, cfg.hidden_heads * cfg.hidden_head_dim, cfg.d_emb, 1, "concat", "identity"),
    ]
    decoder = [init_gat_layer(rng, cfg.d_emb, d_in, 1, "concat", "identity")]
    return ModelParams(
        encoder=encoder,
        decoder=decoder,
        mask_token=Tensor(np.zeros(d_in)),
        remask_token=Tensor(np.zeros(cfg.d_emb)),
    )


def apply_mask(x: np.ndarray, plan: MaskPlan, params: ModelParams) -> Tensor:
    """Corrupt feature rows per the plan; unmasked rows are copied bit-for-bit."""
    if x.shape[0] != plan.num_nodes:
        raise ValueError(f"plan built for {plan.num_nodes} nodes, features have {x.shape[0]}")
    out = ad.constant(x)
    if plan.token_ids.size:
        out = ad.set_rows(out, plan.token_ids, ad.repeat_row(params.mask_token, plan.token_ids.size))
    if plan.random_ids.size:
        out = ad.set_rows(out, plan.random_ids, ad.constant(x[plan.random_src_ids]))
    return out


def _message_edges(g: HeteroGraph | Subgraph) -> np.ndarray:
    if isinstance(g, HeteroGraph):
        return g.union_edges()
    return g.edges


def encode(g: HeteroGraph | Subgraph, corrupted: Tensor, params: ModelParams) -> Tensor:
    """Encoder stack on the graph's adjacency (full graph: union of all types)."""
    return gat_stack_forward(params.encoder, corrupted, _message_edges(g))


def remask_and_decode(
    latent: Tensor, plan: MaskPlan, params: ModelParams, g: HeteroGraph | Subgraph
) -> Tensor:
    """Replace masked latent rows with the re-mask token, then run the decoder."""
    if plan.masked_ids.size:
        latent = ad.set_rows(
            latent, plan.masked_ids, ad.repeat_row(params.remask_token, plan.masked_ids.size)
        )
    return gat_stack_forward(params.decoder, latent, _message_edges(g))


# Rows whose original or reconstructed vector has exactly zero norm take the
# maximum penalty instead of poisoning the loss with NaN; this counts them.
# Expected transiently at the start of training while the tokens sit at zero.
_zero_norm_rows_seen = 0


def zero_norm_row_count() -> int:
    return _zero_norm_rows_seen


def sce_loss(x: np.ndarray, z: Tensor, masked_ids: np.ndarray, gamma: float = 1.0) -> Tensor:
    """Scaled cosine error (1 - cos(x_i, z_i))**gamma averaged over masked rows."""
    global _zero_norm_rows_seen
    masked_ids = np.asarray(masked_ids, dtype=np.int64)
    m = masked_ids.size
    if m == 0:
        raise ValueError("sce_loss needs at least one masked row")
    x_rows = x[masked_ids]
    x_norm = np.linalg.norm(x_rows, axis=1)
    z_norm = np.linalg.norm(z.data[masked_ids], axis=1)
    good = (x_norm > 0.0) & (z_norm > 0.0)
    n_bad = int(m - good.sum())
    if n_bad:
        _zero_norm_rows_seen += n_bad
    if not good.any():
        return ad.constant(1.0)

    zg = ad.gather_rows(z, masked_ids[good])
    xg = ad.constant(x_rows[good])
    dots = ad.rowsum(ad.mul(xg, zg))
    norms = ad.mul(ad.constant(x_norm[good]), ad.sqrt(ad.rowsum(ad.mul(zg, zg))))
    cos = ad.div(dots, norms)
    terms = ad.power(ad.scale_shift(cos, -1.0, 1.0), gamma)
    # mean over all masked rows; zero-norm rows contribute the constant 1
    return ad.scale_shift(ad.total_sum(terms), 1.0 / m, n_bad / m)


def merge_losses(full_term: Tensor, sub_terms: list[Tensor], eta: float) -> Tensor:
    """full + (eta / K_eff) * sum of subgraph terms; eta == 0 returns full as is."""
    if eta == 0.0 or not sub_terms:
        return full_term
    acc = sub_terms[0]
    for t in sub_terms[1:]:
        acc = ad.add(acc, t)
    return ad.add(full_term, ad.scale_shift(acc, eta / len(sub_terms)))


@dataclass
class StepPlans:
    """Mask plans for one step: the full graph plus each nonempty edge type."""

    full: MaskPlan
    subs: dict[int, MaskPlan]


def nonempty_subgraphs(g: HeteroGraph) -> list[tuple[int, Subgraph]]:
    out = []
    for k in range(g.num_edge_types):
        if g.edge_lists[k].shape[0]:
            out.append((k, extract_subgraph(g, k)))
    return out


def make_step_plans(g: HeteroGraph, cfg: TrainConfig, rng: np.random.Generator) -> StepPlans:
    """Independent draws: full graph first, then nonempty types ascending.
    With eta == 0 no subgraph plans are drawn."""
    full = sample_mask(g.num_nodes, cfg, rng)
    subs: dict[int, MaskPlan] = {}
    if cfg.eta != 0.0:
        for k, sub in nonempty_subgraphs(g):
            subs[k] = sample_mask(sub.num_nodes, cfg, rng)
    return StepPlans(full=full, subs=subs)


@dataclass
class LossParts:
    total: float
    full: float
    subs: dict[int, float]

    @property
    def sub_mean(self) -> float:
        if not self.subs:
            return float("nan")
        return float(np.mean(list(self.subs.values())))


def _reconstruction_term(
    graph_like: HeteroGraph | Subgraph,
    x: np.ndarray,
    plan: MaskPlan,
    params: ModelParams,
    cfg: TrainConfig,
) -> Tensor:
    # same computation as encode + remask_and_decode, sharing one message-pair build
    pairs = build_message_pairs(_message_edges(graph_like), x.shape[0])
    corrupted = apply_mask(x, plan, params)
    latent = gat_stack_forward(params.encoder, corrupted, pairs)
    if plan.masked_ids.size:
        latent = ad.set_rows(
            latent, plan.masked_ids, ad.repeat_row(params.remask_token, plan.masked_ids.size)
        )
    recon = gat_stack_forward(params.decoder, latent, pairs)
    return sce_loss(x, recon, plan.masked_ids, cfg.gamma)


def hgmae_loss(
    g: HeteroGraph, params: ModelParams, cfg: TrainConfig, plans: StepPlans
) -> tuple[Tensor, LossParts]:
    """Combined reconstruction loss for given (replayable) mask plans."""
    full_term = _reconstruction_term(g, g.node_features, plans.full, params, cfg)
    sub_terms: list[Tensor] = []
    sub_values: dict[int, float] = {}
    if cfg.eta != 0.0:
        subs = dict(nonempty_subgraphs(g))
        if not subs:
            warnings.warn("no nonempty edge types; training on the full graph only")
        for k in sorted(plans.subs):
            term = _reconstruction_term(subs[k], subs[k].features, plans.subs[k], params, cfg)
            sub_terms.append(term)
            sub_values[k] = term.item()
    total = merge_losses(full_term, sub_terms, cfg.eta)
    return total, LossParts(total=total.item(), full=full_term.item(), subs=sub_values)


@dataclass
class StepResult:
    loss: float
    loss_full: float
    loss_sub_mean: float
    grads: dict[str, np.ndarray]


def hgmae_step(
    g: HeteroGraph, params: ModelParams, cfg: TrainConfig, rng: np.random.Generator
) -> StepResult:
    """Sample fresh masks, evaluate the combined loss, and backpropagate."""
    plans = make_step_plans(g, cfg, rng)
    params.zero_grads()
    total, parts = hgmae_loss(g, params, cfg, plans)
    ad.backward(total)
    grads = {
        name: (t.grad if t.grad is not None else np.zeros_like(t.data)).copy()
        for name, t in params.named_tensors().items()
    }
    return StepResult(
        loss=parts.total, loss_full=parts.full, loss_sub_mean=parts.sub_mean, grads=grads
    )


@dataclass
class EpochStats:
    epoch: int
    loss_total: float
    loss_full: float
    loss_sub_mean: float


def pretrain(g: HeteroGraph, cfg: TrainConfig) -> tuple[ModelParams, list[EpochStats]]:
    """Adam over hgmae_step for cfg.epochs; loss is recorded before each update."""
    rng = np.random.default_rng(cfg.rng_seed)
    params = init_params(g.d_in, cfg, rng)
    state = AdamState.for_params(params.named_tensors(), lr=cfg.lr)
    history: list[EpochStats] = []
    for epoch in range(1, cfg.epochs + 1):
        try:
            res = hgmae_step(g, params, cfg, rng)
        except ad.NumericFault as fault:
            raise ad.NumericFault(f"epoch {epoch}: {fault}") from fault
        adam_step(state, params.named_tensors(), res.grads)
        history.append(EpochStats(epoch, res.loss, res.loss_full, res.loss_sub_mean))
    return params, history


def infer_embeddings(g: HeteroGraph, params: ModelParams) -> np.ndarray:
    """Encoder output on uncorrupted features over the full graph."""
    latent = encode(g, ad.constant(g.node_features), params)
    return latent.data.copy()


# ---------------------------------------------------------------------------
# Artifact I/O


def save_embeddings(emb: np.ndarray, path: Path | str) -> None:
    lines = ["\t".join(["node_id"] + [f"e{j}" for j in range(emb.shape[1])])]
    for i, row in enumerate(emb):
        lines.append("\t".join([str(i)] + [format(x, ".17g") for x in row]))
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def load_embeddings(path: Path | str) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"embeddings file not found: {path}")
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("node_id\t"):
        raise ValueError(f"{path}:1: bad header")
    d = len(lines[0].split("\t")) - 1
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        toks = line.split("\t")
        if len(toks) != 1 + d or int(toks[0]) != lineno - 2:
            raise ValueError(f"{path}:{lineno}: malformed row")
        rows.append([float(t) for t in toks[1:]])
    return np.array(rows, dtype=np.float64).reshape(len(rows), d)


def save_pretrain_log(history: list[EpochStats], path: Path | str) -> None:
    lines = ["epoch\tloss_total\tloss_o\tloss_sub_mean"]
    for st in history:
        lines.append(
            "\t".join(
                [
                    str(st.epoch),
                    format(st.loss_total, ".17g"),
                    format(st.loss_full, ".17g"),
                    format(st.loss_sub_mean, ".17g"),
                ]
            )
        )
    atomic_write_text(Path(path), "\n".join(lines) + "\n")
