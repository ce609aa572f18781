"""Labeled issuer-to-issuer propagation pairs from cascade events.

Construction: every defaulted issuer seeds a BFS of at most n_hops over the
union of all edge types; issuer nodes reached become targets. A pair is
black (label 1) only when the target defaulted strictly after the source;
ties and earlier defaults carry no directional evidence and stay white.
White pairs are then uniformly downsampled to the black count, and the
balanced set is split 80/20 stratified by label.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import DefaultEvent, HeteroGraph, atomic_write_text


class PairConstructionError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class PropagationPair:
    source_id: int
    target_id: int
    label: int
    hop_distance: int


@dataclass
class PairDatasetSplit:
    train: list[PropagationPair]
    test: list[PropagationPair]
    split_seed: int | None


def bfs_distances(neighbors: list[np.ndarray], start: int, max_hops: int) -> dict[int, int]:
    """Hop distance to every node within max_hops of start (start included)."""
    dist = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        if dist[u] == max_hops:
            continue
        for v in neighbors[u]:
            v = int(v)
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def _event_times(g: HeteroGraph, events: list[DefaultEvent]) -> dict[int, int]:
    times: dict[int, int] = {}
    for ev in events:
        if not 0 <= ev.node_id < g.num_nodes:
            raise PairConstructionError(f"event references unknown node id {ev.node_id}")
        if ev.node_id in times:
            raise PairConstructionError(f"duplicate event for node {ev.node_id}")
        times[ev.node_id] = ev.default_time
    return times


def enumerate_candidate_pairs(
    g: HeteroGraph, events: list[DefaultEvent], n_hops: int = 3
) -> list[PropagationPair]:
    """All pre-balancing pairs, sorted by (source, target); deterministic."""
    if n_hops < 1:
        raise PairConstructionError("n_hops must be >= 1")
    times = _event_times(g, events)
    issuer = g.issuer_flags
    sources = sorted(nid for nid in times if issuer[nid])
    if not sources:
        raise PairConstructionError("no defaulted issuers; adjust cascade config")
    neighbors = g.neighbor_lists()
    out: list[PropagationPair] = []
    for s in sources:
        dist = bfs_distances(neighbors, s, n_hops)
        for t in sorted(dist):
            if t == s or not issuer[t]:
                continue
            label = int(t in times and times[t] > times[s])
            out.append(PropagationPair(source_id=s, target_id=t, label=label, hop_distance=dist[t]))
    return out


def build_pairs(
    g: HeteroGraph, events: list[DefaultEvent], n_hops: int = 3, seed: int = 0
) -> list[PropagationPair]:
    """Candidate pairs with whites uniformly downsampled to the black count."""
    candidates = enumerate_candidate_pairs(g, events, n_hops)
    blacks = [p for p in candidates if p.label == 1]
    whites = [p for p in candidates if p.label == 0]
    if not blacks:
        raise PairConstructionError("no positive samples; adjust cascade config")
    if len(whites) > len(blacks):
        rng = np.random.default_rng(seed)
        keep = rng.choice(len(whites), size=len(blacks), replace=False)
        whites = [whites[i] for i in np.sort(keep)]
    return sorted(blacks + whites)


def split_pairs(
    pairs: list[PropagationPair], train_frac: float = 0.8, seed: int = 0
) -> PairDatasetSplit:
    """Stratified shuffle split; each class needs at least 5 pairs."""
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train: list[PropagationPair] = []
    test: list[PropagationPair] = []
    for label in (0, 1):
        group = [p for p in pairs if p.label == label]
        if len(group) < 5:
            raise PairConstructionError(
                f"class {label} has only {len(group)} pairs; need at least 5 to split"
            )
        order = rng.permutation(len(group))
        n_train = int(round(train_frac * len(group)))
        n_train = min(max(n_train, 1), len(group) - 1)
        train += [group[i] for i in order[:n_train]]
        test += [group[i] for i in order[n_train:]]
    return PairDatasetSplit(train=sorted(train), test=sorted(test), split_seed=seed)


def save_pairs(split: PairDatasetSplit, path: Path | str) -> None:
    lines = ["source_id\ttarget_id\thop\tlabel\tsplit"]
    for name, group in (("train", split.train), ("test", split.test)):
        for p in group:
            lines.append(f"{p.source_id}\t{p.target_id}\t{p.hop_distance}\t{p.label}\t{name}")
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def load_pairs(path: Path | str) -> PairDatasetSplit:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"pairs file not found: {path}")
    lines = path.read_text().splitlines()
    if not lines or lines[0].split("\t") != ["source_id", "target_id", "hop", "label", "split"]:
        raise ValueError(f"{path}:1: bad header")
    train: list[PropagationPair] = []
    test: list[PropagationPair] = []
    for lineno, line in enumerate(lines[1:], start=2):
        toks = line.split("\t")
        if len(toks) != 5 or toks[4] not in ("train", "test"):
            raise ValueError(f"{path}:{lineno}: malformed row")
        pair = PropagationPair(
            source_id=int(toks[0]),
            target_id=int(toks[1]),
            label=int(toks[3]),
            hop_distance=int(toks[2]),
        )
        (train if toks[4] == "train" else test).append(pair)
    return PairDatasetSplit(train=train, test=test, split_seed=None)
