"""End-to-end experiment orchestration and the three-condition comparison.

A pipeline seed re-derives every stage: world generation, pre-training,
pair construction, and the train/test split all take their rng from it, so
a (config, seed) pair maps to one reproducible result row. The comparison
reports micro-F1 for three conditions per seed:

    task_only   task features alone
    hgmae       task features + embeddings pre-trained with subgraph terms
    eta0        task features + embeddings pre-trained with eta = 0

File layout under the output directory: one subdirectory per seed holding
that run's artifacts, plus results.tsv (per-seed rows, then mean/std rows
per condition) and summary.txt at the top level.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import classify, graph, hgmae, pairs as pairs_mod, synthetic
from .checkpoint import load_checkpoint, save_checkpoint
from .classify import ClassifierConfig
from .graph import HeteroGraph, atomic_write_text
from .hgmae import TrainConfig
from .synthetic import GenConfig

CONDITIONS = ("task_only", "hgmae", "eta0")


class ConfigError(ValueError):
    pass


@dataclass
class PairConfig:
    n_hops: int = 3
    train_frac: float = 0.8


@dataclass
class ExperimentConfig:
    gen: GenConfig = field(default_factory=GenConfig)
    pretrain: TrainConfig = field(default_factory=TrainConfig)
    pairs: PairConfig = field(default_factory=PairConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    output_dir: str = "out"

    def __post_init__(self) -> None:
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")


def seed_dir(out_dir: Path | str, seed: int) -> Path:
    return Path(out_dir) / f"seed_{seed}"


# ---------------------------------------------------------------------------
# config file: flat key=value with section prefixes


_LIST_KEYS = {"intra_edge_prob", "inter_edge_prob", "transmission_prob"}


def _coerce(section: str, name: str, anno: str, raw: str, problems: list[str]):
    try:
        if name in _LIST_KEYS:
            return tuple(float(t) for t in raw.split(","))
        if anno == "float":
            return float(raw)
        if anno == "int":
            return int(raw)
        return raw
    except ValueError:
        problems.append(f"{section}.{name}: cannot parse {raw!r}")
        return None


def parse_experiment_config(path: Path | str) -> ExperimentConfig:
    """Parse, collecting every problem before raising. Omitted keys keep
    their defaults; '#' starts a comment."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    sections = {
        "gen": GenConfig,
        "pretrain": TrainConfig,
        "pairs": PairConfig,
        "classifier": ClassifierConfig,
    }
    kwargs: dict[str, dict[str, object]] = {name: {} for name in sections}
    top: dict[str, object] = {}
    problems: list[str] = []

    for lineno, rawline in enumerate(path.read_text().splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected key=value, got {rawline!r}")
            continue
        key, val = (t.strip() for t in line.split("=", 1))
        if key == "seeds":
            try:
                top["seeds"] = tuple(int(t) for t in val.split(","))
            except ValueError:
                problems.append(f"seeds: cannot parse {val!r}")
        elif key == "output_dir":
            top["output_dir"] = val
        elif "." in key:
            section, name = key.split(".", 1)
            if section not in sections:
                problems.append(f"line {lineno}: unknown section {section!r}")
                continue
            known = {f.name: f for f in fields(sections[section])}
            if name not in known:
                problems.append(f"line {lineno}: unknown key {key!r}")
                continue
            parsed = _coerce(section, name, str(known[name].type), val, problems)
            if parsed is not None:
                kwargs[section][name] = parsed
        else:
            problems.append(f"line {lineno}: unknown key {key!r}")

    built: dict[str, object] = {}
    for section, cls in sections.items():
        try:
            built[section] = cls(**kwargs[section])
        except (ValueError, TypeError) as exc:
            problems.append(str(exc))
    if problems:
        raise ConfigError("invalid experiment config:\n  " + "\n  ".join(problems))
    return ExperimentConfig(
        gen=built["gen"],
        pretrain=built["pretrain"],
        pairs=built["pairs"],
        classifier=built["classifier"],
        **top,
    )


def write_experiment_config(cfg: ExperimentConfig, path: Path | str) -> None:
    lines = [
        "seeds=" + ",".join(str(s) for s in cfg.seeds),
        f"output_dir={cfg.output_dir}",
    ]
    for section in ("gen", "pretrain", "pairs", "classifier"):
        sub = getattr(cfg, section)
        for f in fields(sub):
            val = getattr(sub, f.name)
            if isinstance(val, tuple):
                lines.append(f"{section}.{f.name}=" + ",".join(repr(x) for x in val))
            elif isinstance(val, float):
                lines.append(f"{section}.{f.name}={val!r}")
            else:
                lines.append(f"{section}.{f.name}={val}")
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# in-memory pipeline


def _seeded(cfg, seed: int):
    return dataclasses.replace(cfg, rng_seed=seed)


def build_world(exp: ExperimentConfig, seed: int):
    """Generate graph, cascade events, and task features for one pipeline seed."""
    gen_cfg = _seeded(exp.gen, seed)
    g = synthetic.generate_graph(gen_cfg)
    events = synthetic.simulate_cascade(g, gen_cfg)
    task_values = synthetic.attach_task_features(g, events, gen_cfg)
    task = synthetic.task_feature_table(g, task_values)
    return gen_cfg, g, events, task


def pretrain_variants(exp: ExperimentConfig, seed: int, g: HeteroGraph):
    """Pre-train the subgraph-aware model and the eta=0 ablation on one graph."""
    cfg_main = _seeded(exp.pretrain, seed)
    cfg_eta0 = dataclasses.replace(cfg_main, eta=0.0)
    out = {}
    for name, cfg in (("hgmae", cfg_main), ("eta0", cfg_eta0)):
        params, history = hgmae.pretrain(g, cfg)
        out[name] = (cfg, params, history)
    return out


@dataclass
class ResultRow:
    condition: str
    seed: int
    micro_f1: float
    accuracy: float
    auc: float


@dataclass
class ConditionResults:
    rows: list[ResultRow]

    def metric(self, condition: str, seed: int) -> float:
        for r in self.rows:
            if r.condition == condition and r.seed == seed:
                return r.micro_f1
        raise KeyError((condition, seed))

    def summary(self) -> dict[str, tuple[float, float]]:
        """condition -> (mean, sample std) of micro-F1 across seeds."""
        out = {}
        for cond in CONDITIONS:
            vals = [r.micro_f1 for r in self.rows if r.condition == cond]
            if vals:
                mean = float(np.mean(vals))
                std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
                out[cond] = (mean, std)
        return out


def run_seed_conditions(exp: ExperimentConfig, seed: int) -> dict[str, dict[str, float]]:
    """Full pipeline for one seed; metrics per condition on the test split."""
    _, g, events, task = build_world(exp, seed)
    pair_list = pairs_mod.build_pairs(g, events, exp.pairs.n_hops, seed=seed)
    split = pairs_mod.split_pairs(pair_list, exp.pairs.train_frac, seed=seed)
    variants = pretrain_variants(exp, seed, g)

    embeddings = {
        "task_only": np.zeros((g.num_nodes, 0)),
        "hgmae": hgmae.infer_embeddings(g, variants["hgmae"][1]),
        "eta0": hgmae.infer_embeddings(g, variants["eta0"][1]),
    }
    metrics = {}
    for cond in CONDITIONS:
        fusion_fn = classify.make_fusion_fn(task, embeddings[cond])
        model = classify.train_classifier(split, fusion_fn, exp.classifier)
        metrics[cond] = classify.evaluate(model, split.test, fusion_fn)
    return metrics


def run_conditions(exp: ExperimentConfig) -> ConditionResults:
    """The comparison table: every condition for every pipeline seed."""
    rows = []
    for seed in exp.seeds:
        metrics = run_seed_conditions(exp, seed)
        for cond in CONDITIONS:
            m = metrics[cond]
            rows.append(ResultRow(cond, seed, m["micro_f1"], m["accuracy"], m["auc"]))
    return ConditionResults(rows=rows)


# ---------------------------------------------------------------------------
# file-based stages (the CLI surface)


def _missing(path: Path, what: str) -> FileNotFoundError:
    return FileNotFoundError(f"{what} not found: {path}")


def run_generate(exp: ExperimentConfig, out_dir: Path, seeds: tuple[int, ...]) -> None:
    for seed in seeds:
        gen_cfg, g, events, task = build_world(exp, seed)
        sdir = seed_dir(out_dir, seed)
        sdir.mkdir(parents=True, exist_ok=True)
        graph.save_graph(g, sdir)
        graph.save_events(events, sdir / "events.tsv")
        synthetic.save_task_features(task, sdir / "task_features.tsv")
        synthetic.save_gen_config(gen_cfg, sdir / "gen.config")


def run_pretrain(exp: ExperimentConfig, out_dir: Path, seeds: tuple[int, ...]) -> None:
    for seed in seeds:
        sdir = seed_dir(out_dir, seed)
        if not (sdir / "nodes.tsv").exists():
            raise _missing(sdir / "nodes.tsv", "graph artifact")
        g = graph.load_graph(sdir)
        for name, (cfg, params, history) in pretrain_variants(exp, seed, g).items():
            save_checkpoint(params, cfg, sdir / f"checkpoint_{name}.tsv")
            hgmae.save_pretrain_log(history, sdir / f"pretrain_log_{name}.tsv")


def run_embed(exp: ExperimentConfig, out_dir: Path, seeds: tuple[int, ...]) -> None:
    for seed in seeds:
        sdir = seed_dir(out_dir, seed)
        if not (sdir / "nodes.tsv").exists():
            raise _missing(sdir / "nodes.tsv", "graph artifact")
        g = graph.load_graph(sdir)
        for name in ("hgmae", "eta0"):
            ckpt = sdir / f"checkpoint_{name}.tsv"
            if not ckpt.exists():
                raise FileNotFoundError(f"checkpoint not found: {ckpt}")
            params, _ = load_checkpoint(ckpt)
            hgmae.save_embeddings(hgmae.infer_embeddings(g, params), sdir / f"embeddings_{name}.tsv")


def run_pairs(exp: ExperimentConfig, out_dir: Path, seeds: tuple[int, ...]) -> None:
    for seed in seeds:
        sdir = seed_dir(out_dir, seed)
        if not (sdir / "events.tsv").exists():
            raise _missing(sdir / "events.tsv", "events artifact")
        g = graph.load_graph(sdir)
        events = graph.load_events(sdir / "events.tsv")
        pair_list = pairs_mod.build_pairs(g, events, exp.pairs.n_hops, seed=seed)
        split = pairs_mod.split_pairs(pair_list, exp.pairs.train_frac, seed=seed)
        pairs_mod.save_pairs(split, sdir / "pairs.tsv")


def _load_condition_inputs(sdir: Path, cond: str):
    task = synthetic.load_task_features(sdir / "task_features.tsv")
    if cond == "task_only":
        num_nodes = len((sdir / "nodes.tsv").read_text().splitlines()) - 1
        emb = np.zeros((num_nodes, 0))
    else:
        emb_path = sdir / f"embeddings_{cond}.tsv"
        if not emb_path.exists():
            raise _missing(emb_path, "embeddings artifact")
        emb = hgmae.load_embeddings(emb_path)
    return task, emb


def run_train(exp: ExperimentConfig, out_dir: Path, seeds: tuple[int, ...]) -> None:
    for seed in seeds:
        sdir = seed_dir(out_dir, seed)
        if not (sdir / "pairs.tsv").exists():
            raise _missing(sdir / "pairs.tsv", "pairs artifact")
        split = pairs_mod.load_pairs(sdir / "pairs.tsv")
        for cond in CONDITIONS:
            task, emb = _load_condition_inputs(sdir, cond)
            fusion_fn = classify.make_fusion_fn(task, emb)
            model = classify.train_classifier(split, fusion_fn, exp.classifier)
            classify.save_classifier(model, sdir / f"classifier_{cond}.tsv")


def run_evaluate(exp: ExperimentConfig, out_dir: Path, seeds: tuple[int, ...]) -> ConditionResults:
    rows = []
    for seed in seeds:
        sdir = seed_dir(out_dir, seed)
        if not (sdir / "pairs.tsv").exists():
            raise _missing(sdir / "pairs.tsv", "pairs artifact")
        split = pairs_mod.load_pairs(sdir / "pairs.tsv")
        for cond in CONDITIONS:
            clf_path = sdir / f"classifier_{cond}.tsv"
            if not clf_path.exists():
                raise _missing(clf_path, "classifier artifact")
            model = classify.load_classifier(clf_path)
            task, emb = _load_condition_inputs(sdir, cond)
            fusion_fn = classify.make_fusion_fn(task, emb)
            m = classify.evaluate(model, split.test, fusion_fn)
            rows.append(ResultRow(cond, seed, m["micro_f1"], m["accuracy"], m["auc"]))
    results = ConditionResults(rows=rows)
    write_results(results, out_dir)
    return results


def results_tsv_text(results: ConditionResults) -> str:
    lines = ["condition\tseed\tmicro_f1\taccuracy\tauc"]
    for cond in CONDITIONS:
        rows = [r for r in results.rows if r.condition == cond]
        for r in rows:
            lines.append(
                "\t".join(
                    [
                        cond,
                        str(r.seed),
                        format(r.micro_f1, ".17g"),
                        format(r.accuracy, ".17g"),
                        format(r.auc, ".17g"),
                    ]
                )
            )
    for cond in CONDITIONS:
        rows = [r for r in results.rows if r.condition == cond]
        if not rows:
            continue
        for stat, fn in (("mean", np.mean), ("std", lambda v: np.std(v, ddof=1) if len(v) > 1 else 0.0)):
            cells = [
                format(float(fn([getattr(r, m) for r in rows])), ".17g")
                for m in ("micro_f1", "accuracy", "auc")
            ]
            lines.append("\t".join([cond, stat] + cells))
    return "\n".join(lines) + "\n"


def summary_text(results: ConditionResults) -> str:
    summ = results.summary()
    lines = ["condition      mean micro-F1   std"]
    for cond in CONDITIONS:
        if cond in summ:
            mean, std = summ[cond]
            lines.append(f"{cond:<14} {mean:<15.4f} {std:.4f}")
    if "hgmae" in summ and "task_only" in summ:
        lines.append("")
        lines.append(f"embedding uplift (hgmae - task_only): {summ['hgmae'][0] - summ['task_only'][0]:+.4f}")
    if "hgmae" in summ and "eta0" in summ:
        lines.append(f"subgraph-term effect (hgmae - eta0):  {summ['hgmae'][0] - summ['eta0'][0]:+.4f}")
    return "\n".join(lines) + "\n"


def write_results(results: ConditionResults, out_dir: Path | str) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / "results.tsv", results_tsv_text(results))
    atomic_write_text(out_dir / "summary.txt", summary_text(results))


def run_all(exp: ExperimentConfig, out_dir: Path, seeds: tuple[int, ...]) -> ConditionResults:
    run_generate(exp, out_dir, seeds)
    run_pretrain(exp, out_dir, seeds)
    run_embed(exp, out_dir, seeds)
    run_pairs(exp, out_dir, seeds)
    run_train(exp, out_dir, seeds)
    return run_evaluate(exp, out_dir, seeds)
