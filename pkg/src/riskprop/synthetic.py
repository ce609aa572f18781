"""Synthetic enterprise-graph worlds with a planted default cascade.

Structure is blockmodel-style: nodes get balanced random communities, and
each relation type draws edges independently with its own intra/inter
community probability. Node features are a community signature (one-hot in
the leading dims) plus Gaussian noise. A fraction of nodes are designated
bond issuers; a cascade seeded at random issuers then spreads across edges
with type-dependent transmission probabilities, producing the default events
that label stage-2 propagation pairs.

Randomness contract: every output is a pure function of the config. Three
streams derive from cfg.rng_seed so the stages stay independently
reproducible:

    np.random.default_rng([rng_seed, 0])  graph structure and features
    np.random.default_rng([rng_seed, 1])  cascade
    np.random.default_rng([rng_seed, 2])  task features

Each function documents its draw order so a second implementation can replay
it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .graph import DefaultEvent, HeteroGraph, atomic_write_text

DEFAULT_EDGE_TYPE_NAMES = (
    "parent-subsidiary",
    "share-investor",
    "share-manager",
    "share-legal-person",
    "invest-by",
)


class ConfigValidationError(ValueError):
    """Raised with every offending field listed, not just the first."""


def edge_type_names(k: int) -> list[str]:
    names = list(DEFAULT_EDGE_TYPE_NAMES[:k])
    names += [f"relation-{i}" for i in range(len(names), k)]
    return names


@dataclass
class GenConfig:
    """Knobs for one synthetic world; see module docstring for the mechanism.

    susceptibility_weight scales the defaulted-node indicator mixed into the
    first task-feature dimension; noise_std is shared by node features and
    task features. The defaults make the first relation type sparse, purely
    intra-community, and the dominant contagion carrier, while the last is
    dense community-agnostic noise that never transmits, so embeddings that
    keep per-type structure have something real to gain.
    """

    num_nodes: int = 200
    num_communities: int = 3
    num_edge_types: int = 3
    d_in: int = 16
    d_task: int = 4
    issuer_fraction: float = 0.45
    intra_edge_prob: tuple[float, ...] = (0.05, 0.05, 0.04)
    inter_edge_prob: tuple[float, ...] = (0.0, 0.01, 0.06)
    transmission_prob: tuple[float, ...] = (0.45, 0.06, 0.0)
    num_seed_defaults: int = 8
    max_cascade_hops: int = 5
    noise_std: float = 0.25
    susceptibility_weight: float = 0.25
    rng_seed: int = 0

    def __post_init__(self) -> None:
        self.intra_edge_prob = tuple(float(p) for p in self.intra_edge_prob)
        self.inter_edge_prob = tuple(float(p) for p in self.inter_edge_prob)
        self.transmission_prob = tuple(float(p) for p in self.transmission_prob)
        problems = []
        if self.num_nodes < 2:
            problems.append("num_nodes must be >= 2")
        if self.num_communities < 1:
            problems.append("num_communities must be >= 1")
        if self.num_edge_types < 1:
            problems.append("num_edge_types must be >= 1")
        if self.d_in < self.num_communities:
            problems.append("d_in must be >= num_communities")
        if self.d_task < 1:
            problems.append("d_task must be >= 1")
        if not 0.0 < self.issuer_fraction <= 1.0:
            problems.append("issuer_fraction must be in (0, 1]")
        for name in ("intra_edge_prob", "inter_edge_prob", "transmission_prob"):
            vec = getattr(self, name)
            if len(vec) != self.num_edge_types:
                problems.append(f"{name} must have num_edge_types entries")
            if any(not 0.0 <= p <= 1.0 for p in vec):
                problems.append(f"{name} entries must be in [0, 1]")
        if self.num_seed_defaults < 1:
            problems.append("num_seed_defaults must be >= 1")
        if self.max_cascade_hops < 0:
            problems.append("max_cascade_hops must be >= 0")
        if self.noise_std < 0:
            problems.append("noise_std must be >= 0")
        if problems:
            raise ConfigValidationError("invalid GenConfig: " + "; ".join(problems))


def community_assignment(cfg: GenConfig) -> np.ndarray:
    """Balanced random community per node; first draw of the structure stream."""
    rng = np.random.default_rng([cfg.rng_seed, 0])
    return rng.permutation(np.arange(cfg.num_nodes) % cfg.num_communities)


def num_issuers(cfg: GenConfig) -> int:
    return max(1, int(round(cfg.issuer_fraction * cfg.num_nodes)))


def generate_graph(cfg: GenConfig) -> HeteroGraph:
    """Draw one world from the structure stream.

    Draw order: community permutation; one uniform per unordered node pair
    for each edge type (pairs in np.triu_indices order, types ascending);
    issuer choice (num_issuers ids without replacement); feature noise as a
    single standard-normal block [num_nodes, d_in].
    """
    rng = np.random.default_rng([cfg.rng_seed, 0])
    n = cfg.num_nodes
    comm = rng.permutation(np.arange(n) % cfg.num_communities)

    iu, iv = np.triu_indices(n, k=1)
    same = comm[iu] == comm[iv]
    edge_lists: dict[int, np.ndarray] = {}
    for k in range(cfg.num_edge_types):
        p = np.where(same, cfg.intra_edge_prob[k], cfg.inter_edge_prob[k])
        keep = rng.random(iu.shape[0]) < p
        edge_lists[k] = np.stack([iu[keep], iv[keep]], axis=1).astype(np.int64)

    issuer_ids = rng.choice(n, size=num_issuers(cfg), replace=False)
    flags = np.zeros(n, dtype=bool)
    flags[issuer_ids] = True

    signature = np.zeros((cfg.num_communities, cfg.d_in))
    signature[np.arange(cfg.num_communities), np.arange(cfg.num_communities)] = 1.0
    features = signature[comm] + cfg.noise_std * rng.standard_normal((n, cfg.d_in))

    return HeteroGraph(
        node_features=features,
        edge_lists=edge_lists,
        edge_type_names=edge_type_names(cfg.num_edge_types),
        issuer_flags=flags,
    )


def simulate_cascade(g: HeteroGraph, cfg: GenConfig) -> list[DefaultEvent]:
    """Independent-cascade defaults: seeds at tick 0, spreading one hop per tick.

    Draw order (cascade stream): seed issuers (num_seed_defaults ids chosen
    from ascending issuer ids without replacement), then one uniform pair per
    canonical edge, types ascending, rows in stored order: column 0 for the
    src->dst attempt and column 1 for dst->src. A transmission attempt along
    a type-k edge succeeds iff its uniform is < transmission_prob[k], so the
    defaulted set is coupled monotonically across transmission settings.
    """
    rng = np.random.default_rng([cfg.rng_seed, 1])
    issuer_ids = np.flatnonzero(g.issuer_flags)
    if cfg.num_seed_defaults > issuer_ids.size:
        raise ConfigValidationError(
            f"num_seed_defaults={cfg.num_seed_defaults} exceeds issuer count {issuer_ids.size}"
        )
    seeds = rng.choice(issuer_ids, size=cfg.num_seed_defaults, replace=False)

    # attempts[u] -> list of (coin, type, neighbor); coins pre-drawn per directed edge
    attempts: dict[int, list[tuple[float, int, int]]] = {}
    for k in range(g.num_edge_types):
        edges = g.edge_lists[k]
        coins = rng.random((edges.shape[0], 2))
        for j, (u, v) in enumerate(edges):
            attempts.setdefault(int(u), []).append((coins[j, 0], k, int(v)))
            attempts.setdefault(int(v), []).append((coins[j, 1], k, int(u)))

    default_time: dict[int, int] = {int(s): 0 for s in seeds}
    frontier = sorted(default_time)
    for tick in range(1, cfg.max_cascade_hops + 1):
        infected: set[int] = set()
        for u in frontier:
            for coin, k, nbr in attempts.get(u, []):
                if nbr not in default_time and coin < cfg.transmission_prob[k]:
                    infected.add(nbr)
        for v in infected:
            default_time[v] = tick
        frontier = sorted(infected)
        if not frontier:
            break

    return sorted(
        (DefaultEvent(node_id=nid, default_time=t) for nid, t in default_time.items()),
        key=lambda e: (e.default_time, e.node_id),
    )


def attach_task_features(
    g: HeteroGraph, events: list[DefaultEvent], cfg: GenConfig
) -> np.ndarray:
    """Issuer task features: noisy defaulted indicator plus pure-noise dims.

    Returns a [num_issuers, d_task] matrix with rows aligned to ascending
    issuer node id. Column 0 mixes susceptibility_weight * defaulted(node)
    into the noise; remaining columns are noise only. Draw order (task
    stream): one standard-normal block [num_issuers, d_task].
    """
    issuer_ids = np.flatnonzero(g.issuer_flags)
    defaulted = set()
    for ev in events:
        if not 0 <= ev.node_id < g.num_nodes:
            raise ValueError(f"event references unknown node id {ev.node_id}")
        defaulted.add(ev.node_id)
    rng = np.random.default_rng([cfg.rng_seed, 2])
    values = cfg.noise_std * rng.standard_normal((issuer_ids.size, cfg.d_task))
    indicator = np.array([1.0 if nid in defaulted else 0.0 for nid in issuer_ids])
    values[:, 0] += cfg.susceptibility_weight * indicator
    return values


def task_feature_table(g: HeteroGraph, values: np.ndarray) -> dict[int, np.ndarray]:
    """Map issuer node id -> task feature row (attach_task_features alignment)."""
    issuer_ids = np.flatnonzero(g.issuer_flags)
    if values.shape[0] != issuer_ids.size:
        raise ValueError(
            f"task feature rows ({values.shape[0]}) != issuer count ({issuer_ids.size})"
        )
    return {int(nid): values[i] for i, nid in enumerate(issuer_ids)}


# ---------------------------------------------------------------------------
# Artifact I/O


def save_task_features(table: dict[int, np.ndarray], path: Path | str) -> None:
    ids = sorted(table)
    d_task = len(table[ids[0]]) if ids else 0
    lines = ["\t".join(["node_id"] + [f"t{j}" for j in range(d_task)])]
    for nid in ids:
        lines.append("\t".join([str(nid)] + [format(x, ".17g") for x in table[nid]]))
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def load_task_features(path: Path | str) -> dict[int, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"task features file not found: {path}")
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("node_id\t"):
        raise ValueError(f"{path}:1: bad header")
    d_task = len(lines[0].split("\t")) - 1
    table: dict[int, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        toks = line.split("\t")
        if len(toks) != 1 + d_task:
            raise ValueError(f"{path}:{lineno}: expected {1 + d_task} columns")
        table[int(toks[0])] = np.array([float(t) for t in toks[1:]])
    return table


def save_gen_config(cfg: GenConfig, path: Path | str) -> None:
    """Flat key=value echo of the config (lists comma-joined)."""
    lines = []
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            lines.append(f"{f.name}={','.join(repr(x) for x in val)}")
        else:
            lines.append(f"{f.name}={val!r}" if isinstance(val, float) else f"{f.name}={val}")
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def load_gen_config(path: Path | str) -> GenConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    kwargs: dict[str, object] = {}
    known = {f.name: f for f in fields(GenConfig)}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigValidationError(f"{path}:{lineno}: expected key=value")
        key, val = line.split("=", 1)
        key = key.strip()
        if key not in known:
            raise ConfigValidationError(f"{path}:{lineno}: unknown key {key!r}")
        if key in ("intra_edge_prob", "inter_edge_prob", "transmission_prob"):
            kwargs[key] = tuple(float(t) for t in val.split(","))
        elif key in ("issuer_fraction", "noise_std", "susceptibility_weight"):
            kwargs[key] = float(val)
        else:
            kwargs[key] = int(val)
    return GenConfig(**kwargs)
