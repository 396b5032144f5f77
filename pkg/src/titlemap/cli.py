"""Batch CLI: every subcommand reads one JSON config and writes its outputs
plus a fully-resolved config echo into the output directory.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric error. All
randomness flows from the config's seeds; output files are written atomically
(temp file + rename) so a crashed run never leaves half-written artifacts.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from datetime import date
from typing import Optional

import numpy as np

from . import evaluation as ev
from .datagen import SynthConfig, gen_resumes, gen_taxonomy
from .errors import (
    ConfigError,
    DataError,
    EvaluationError,
    NumericError,
    TitlemapError,
)
from .graph import (
    build_transition_graph,
    canonicalize_title,
    extract_parent_child_pairs,
    load_pairs,
    load_records,
    write_pairs,
    write_records,
)
from .model import (
    FeaturePipeline,
    TrainConfig,
    forward_probabilities,
    load_model,
    save_model,
    train,
)

logger = logging.getLogger(__name__)
from .poincare import HyperbolicEmbeddingTable, PoincareConfig, train_poincare
from .semantic import (
    HashedNgramProvider,
    PrecomputedProvider,
    embed_titles,
    load_precomputed,
    write_embeddings,
)
from .syntactic import Taxonomy

# ---------------------------------------------------------------------------
# Config schema: section -> key -> (types, default). `None` default with
# `str` type means an optional path. Unknown keys anywhere are rejected.

_PATH = ((str, type(None)), None)

SCHEMA = {
    "output_dir": ((str,), "__required__"),
    "provider": ((str,), "hashed"),
    "provider_fallback": ((bool,), True),
    "semantic_seed": ((int,), 0),
    "seeds": {
        "data": ((int,), 0),
        "poincare": ((int,), 0),
        "train": ((int,), 0),
        "linkpred": ((int,), 0),
    },
    "dims": {
        "d_h": ((int,), 128),
        "d_b": ((int,), 128),
        "d_r": ((int,), 64),
    },
    "data": {
        "taxonomy": _PATH,
        "labels": _PATH,
        "resumes": _PATH,
        "pairs": _PATH,
        "hyperbolic": _PATH,
        "titles": _PATH,
        "vectors": _PATH,
        "model": _PATH,
    },
    "datagen": {
        "groups": ((int,), 10),
        "synonyms": ((int,), 3),
        "max_noise_ops": ((int,), 3),
        "persons": ((int,), 100),
        "jobs_per_person": ((int,), 5),
        "self_transition_bias": ((float, int), 0.6),
        "transition_concentration": ((float, int), 0.3),
        "include_standard_labels": ((bool,), True),
    },
    "poincare": {
        "epochs": ((int,), 50),
        "lr": ((float, int), 0.1),
        "negatives": ((int,), 10),
        "burn_in_epochs": ((int,), 10),
        "burn_in_lr_factor": ((float, int), 0.1),
        "export_2d": ((bool,), False),
    },
    "train": {
        "lr": ((float, int), 1e-3),
        "batch_size": ((int,), 256),
        "max_epochs": ((int,), 200),
        "patience": ((int,), 20),
        "split": ((list,), [0.64, 0.16, 0.20]),
        "logic_weight": ((float, int), 1.0),
        "clause_weight": ((float, int), 0.1),
        "variant": ((str,), "full"),
        "fusion_lr_multiplier": ((float, int), 1.0),
        "fusion_weight_decay": ((float, int), 0.0),
    },
    "map": {
        "k": ((int,), 10),
    },
    "linkpred": {
        "epochs": ((int,), 100),
        "lr": ((float, int), 0.05),
    },
}


def resolve_config(raw: dict) -> dict:
    """Validate against the schema, reject unknown keys, fill every default."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    resolved: dict = {}
    for key in raw:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
    for key, spec in SCHEMA.items():
        if isinstance(spec, dict):
            section = raw.get(key, {})
            if not isinstance(section, dict):
                raise ConfigError(f"config key {key!r} must be an object")
            for sub in section:
                if sub not in spec:
                    raise ConfigError(f"unknown config key '{key}.{sub}'")
            resolved[key] = {}
            for sub, (types, default) in spec.items():
                value = section.get(sub, default)
                if value is not None and not isinstance(value, types):
                    raise ConfigError(
                        f"config key '{key}.{sub}' has type {type(value).__name__}"
                    )
                resolved[key][sub] = value
        else:
            types, default = spec
            if default == "__required__" and key not in raw:
                raise ConfigError(f"config key {key!r} is required")
            value = raw.get(key, default)
            if value is not None and not isinstance(value, types):
                raise ConfigError(f"config key {key!r} has type {type(value).__name__}")
            resolved[key] = value
    provider = resolved["provider"]
    if provider != "hashed" and not provider.startswith("precomputed:"):
        raise ConfigError(
            "provider must be 'hashed' or 'precomputed:<path>', got " + repr(provider)
        )
    return resolved


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON ({e.msg})") from None
    return resolve_config(raw)


@contextmanager
def _atomic(path):
    tmp = f"{path}.tmp{os.getpid()}"
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _write_json(path, payload: dict) -> None:
    with _atomic(path) as tmp:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")


def _write_echo(config: dict, command: str) -> None:
    _write_json(os.path.join(config["output_dir"], f"{command}_config.json"), config)


def _require(config: dict, *keys: str) -> list:
    values = []
    for dotted in keys:
        section, sub = dotted.split(".")
        value = config[section][sub]
        if value is None:
            raise ConfigError(f"config key '{dotted}' is required for this command")
        values.append(value)
    return values


def _build_provider(config: dict):
    spec = config["provider"]
    d_b = config["dims"]["d_b"]
    hashed = HashedNgramProvider(dimension=d_b, seed=config["semantic_seed"])
    if spec == "hashed":
        return hashed
    cache = load_precomputed(spec.removeprefix("precomputed:"))
    if cache.dimension != d_b:
        raise ConfigError(
            f"precomputed embeddings have dim {cache.dimension}, config dims.d_b is {d_b}"
        )
    return PrecomputedProvider(cache, fallback=hashed if config["provider_fallback"] else None)


def _load_pipeline(config: dict, taxonomy: Taxonomy) -> FeaturePipeline:
    (hyperbolic_path,) = _require(config, "data.hyperbolic")
    table = HyperbolicEmbeddingTable.load_tsv(hyperbolic_path)
    if table.dim != config["dims"]["d_h"]:
        raise ConfigError(
            f"hyperbolic table has dim {table.dim}, config dims.d_h is {config['dims']['d_h']}"
        )
    return FeaturePipeline(hyperbolic=table, semantic=_build_provider(config), taxonomy=taxonomy)


def _read_labeled(path, taxonomy: Optional[Taxonomy] = None) -> list[tuple[str, str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected raw_title<TAB>standard_title")
            raw, std = parts
            if taxonomy is not None and std not in taxonomy:
                raise DataError(f"{path}:{lineno}: standard title {std!r} not in taxonomy")
            rows.append((raw, std))
    if not rows:
        raise DataError(f"{path}: no labeled rows")
    return rows


def _read_titles(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        titles = [line.rstrip("\n") for line in fh if line.strip()]
    if not titles:
        raise DataError(f"{path}: no titles")
    return titles


def _trajectories(records) -> list[list[str]]:
    by_person: dict = {}
    for idx, rec in enumerate(records):
        end_key = rec.end if rec.end is not None else date.max
        by_person.setdefault(rec.person_id, []).append(
            (rec.start, end_key, idx, canonicalize_title(rec.title))
        )
    out = []
    for rows in by_person.values():
        rows.sort()
        out.append([title for _, _, _, title in rows])
    return out


# ---------------------------------------------------------------------------
# Subcommands

def cmd_gen_data(config: dict) -> None:
    out = config["output_dir"]
    dg = config["datagen"]
    synth = SynthConfig(
        groups=dg["groups"],
        synonyms=dg["synonyms"],
        max_noise_ops=dg["max_noise_ops"],
        persons=dg["persons"],
        jobs_per_person=dg["jobs_per_person"],
        self_transition_bias=float(dg["self_transition_bias"]),
        transition_concentration=float(dg["transition_concentration"]),
        seed=config["seeds"]["data"],
    )
    taxonomy, labeled = gen_taxonomy(synth)
    records = gen_resumes(synth, taxonomy, labeled)
    with _atomic(os.path.join(out, "taxonomy.tsv")) as tmp:
        taxonomy.write_tsv(tmp)
    rows = list(labeled)
    if dg["include_standard_labels"]:
        rows.extend((t, t) for t in taxonomy.titles)
    with _atomic(os.path.join(out, "labels.tsv")) as tmp:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            for raw, std in rows:
                fh.write(f"{raw}\t{std}\n")
    with _atomic(os.path.join(out, "resumes.jsonl")) as tmp:
        write_records(tmp, records)
    _write_echo(config, "gen-data")


def cmd_build_graph(config: dict) -> None:
    out = config["output_dir"]
    (resumes_path,) = _require(config, "data.resumes")
    records = load_records(resumes_path)
    graph = build_transition_graph(records)
    pairs = extract_parent_child_pairs(records)
    with _atomic(os.path.join(out, "pairs.tsv")) as tmp:
        write_pairs(tmp, pairs)
    summary = {**graph.summary(), "pairs": len(pairs), "weight_sum": sum(graph.weights.values())}
    _write_json(os.path.join(out, "graph_summary.json"), summary)
    _write_echo(config, "build-graph")


def cmd_train_poincare(config: dict) -> None:
    out = config["output_dir"]
    (pairs_path,) = _require(config, "data.pairs")
    pairs = load_pairs(pairs_path)
    pc = config["poincare"]
    base = dict(
        epochs=pc["epochs"],
        lr=float(pc["lr"]),
        negatives=pc["negatives"],
        burn_in_epochs=pc["burn_in_epochs"],
        burn_in_lr_factor=float(pc["burn_in_lr_factor"]),
        seed=config["seeds"]["poincare"],
    )
    table = train_poincare(pairs, m=config["dims"]["d_h"], config=PoincareConfig(**base))
    with _atomic(os.path.join(out, "hyperbolic.tsv")) as tmp:
        table.export_tsv(tmp)
    if pc["export_2d"]:
        flat = train_poincare(pairs, m=2, config=PoincareConfig(**base))
        with _atomic(os.path.join(out, "hyperbolic_2d.tsv")) as tmp:
            flat.export_tsv(tmp)
    _write_echo(config, "train-poincare")


def cmd_encode_semantic(config: dict) -> None:
    out = config["output_dir"]
    (titles_path,) = _require(config, "data.titles")
    provider = _build_provider(config)
    cache = embed_titles(provider, _read_titles(titles_path))
    with _atomic(os.path.join(out, "semantic.tsv")) as tmp:
        write_embeddings(tmp, cache)
    _write_echo(config, "encode-semantic")


def cmd_train(config: dict) -> None:
    out = config["output_dir"]
    taxonomy_path, labels_path = _require(config, "data.taxonomy", "data.labels")
    taxonomy = Taxonomy.load_tsv(taxonomy_path)
    examples = _read_labeled(labels_path, taxonomy)
    pipeline = _load_pipeline(config, taxonomy)
    tc = config["train"]
    train_config = TrainConfig(
        d_h=config["dims"]["d_h"],
        d_b=config["dims"]["d_b"],
        d_r=config["dims"]["d_r"],
        lr=float(tc["lr"]),
        batch_size=tc["batch_size"],
        max_epochs=tc["max_epochs"],
        patience=tc["patience"],
        split=tuple(tc["split"]),
        seed=config["seeds"]["train"],
        logic_weight=float(tc["logic_weight"]),
        clause_weight=float(tc["clause_weight"]),
        variant=tc["variant"],
        fusion_lr_multiplier=float(tc["fusion_lr_multiplier"]),
        fusion_weight_decay=float(tc["fusion_weight_decay"]),
    )
    result = train(examples, pipeline, train_config)
    with _atomic(os.path.join(out, "model.json")) as tmp:
        save_model(result.model, tmp)
    with _atomic(os.path.join(out, "training_curve.csv")) as tmp:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("epoch,train_loss,val_hit_at_10\n")
            for epoch, loss, hit in result.history:
                fh.write(f"{epoch},{loss!r},{hit!r}\n")
    for name, idx in result.split_indices.items():
        with _atomic(os.path.join(out, f"split_{name}.tsv")) as tmp:
            with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
                for i in idx:
                    raw, std = examples[int(i)]
                    fh.write(f"{raw}\t{std}\n")
    report = {
        "best_epoch": result.best_epoch,
        "epochs_run": len(result.history),
        "metrics": result.metrics,
        "seeds": config["seeds"],
    }
    _write_json(os.path.join(out, "train_report.json"), report)
    _write_echo(config, "train")


def _load_model_pipeline(config: dict):
    (model_path,) = _require(config, "data.model")
    model = load_model(model_path)
    pipeline = _load_pipeline(config, model.taxonomy)
    if pipeline.d_b != model.d_b:
        raise ConfigError(
            f"provider dim {pipeline.d_b} does not match model d_b {model.d_b}"
        )
    return model, pipeline


def cmd_map(config: dict) -> None:
    out = config["output_dir"]
    (titles_path,) = _require(config, "data.titles")
    model, pipeline = _load_model_pipeline(config)
    titles = _read_titles(titles_path)
    k = config["map"]["k"]
    if k > len(model.taxonomy):
        logger.warning("map: k=%d clamped to taxonomy size %d", k, len(model.taxonomy))
        k = len(model.taxonomy)
    probs = forward_probabilities(model, pipeline, titles)
    n_classes = len(model.taxonomy)
    with _atomic(os.path.join(out, "mappings.tsv")) as tmp:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("#mappings\ttitle\trank\tstandard_title\tprobability\n")
            for row, title in enumerate(titles):
                order = np.lexsort((np.arange(n_classes), -probs[row]))
                for rank, class_idx in enumerate(order[:k], start=1):
                    std = model.taxonomy.titles[class_idx]
                    fh.write(f"{title}\t{rank}\t{std}\t{float(probs[row, class_idx])!r}\n")
    _write_echo(config, "map")


def cmd_eval(config: dict) -> None:
    out = config["output_dir"]
    (labels_path,) = _require(config, "data.labels")
    model, pipeline = _load_model_pipeline(config)
    examples = _read_labeled(labels_path, model.taxonomy)
    titles = [raw for raw, _ in examples]
    labels = [model.taxonomy.index(std) for _, std in examples]
    probs = forward_probabilities(model, pipeline, titles)
    n_classes = len(model.taxonomy)
    rankings = [
        list(np.lexsort((np.arange(n_classes), -probs[i]))) for i in range(len(titles))
    ]
    results = ev.RankingResult(rankings=rankings, relevant=[{l} for l in labels])
    report = {
        "queries": len(titles),
        "precision_at": {str(n): ev.precision_at_n(results, n) for n in (1, 5, 10)},
        "hit_rate_at": {str(n): ev.hit_rate_at_n(results, n) for n in (1, 5, 10)},
        "ndcg_at_10": ev.ndcg_at_n(results, 10),
        "seeds": config["seeds"],
    }
    _write_json(os.path.join(out, "eval_report.json"), report)
    _write_echo(config, "eval")


def _load_vectors(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
    if header.startswith("#poincare"):
        return dict(HyperbolicEmbeddingTable.load_tsv(path).vectors)
    return dict(load_precomputed(path).vectors)


def cmd_linkpred(config: dict) -> None:
    out = config["output_dir"]
    resumes_path, vectors_path = _require(config, "data.resumes", "data.vectors")
    graph = build_transition_graph(load_records(resumes_path))
    vectors = _load_vectors(vectors_path)
    split = ev.make_link_split(graph, seed=config["seeds"]["linkpred"])
    lp = config["linkpred"]
    result = ev.link_prediction_auc(
        split,
        vectors,
        seed=config["seeds"]["linkpred"],
        epochs=lp["epochs"],
        lr=float(lp["lr"]),
    )
    report = {
        "edges": len(graph.edge_counts),
        "split": {
            "train_edges": len(split.train_edges),
            "dev_pos": len(split.dev_pos),
            "test_pos": len(split.test_pos),
        },
        "per_operator": result.per_operator,
        "best_operator": result.best_operator,
        "test_auc": result.test_auc,
        "seeds": config["seeds"],
    }
    _write_json(os.path.join(out, "linkpred_report.json"), report)
    _write_echo(config, "linkpred")


def cmd_mobility(config: dict) -> None:
    out = config["output_dir"]
    (resumes_path,) = _require(config, "data.resumes")
    model, pipeline = _load_model_pipeline(config)
    trajectories = _trajectories(load_records(resumes_path))
    unique_titles = sorted({t for seq in trajectories for t in seq})
    probs = forward_probabilities(model, pipeline, unique_titles)
    top1 = {
        t: model.taxonomy.titles[int(np.argmax(probs[i]))]
        for i, t in enumerate(unique_titles)
    }
    mapped = ev.map_at_10_mobility(trajectories, mapper=lambda t: top1[t])
    unmapped = ev.map_at_10_mobility(trajectories, mapper=None)
    report = {
        "trajectories": len(trajectories),
        "map_at_10_mapped": mapped,
        "map_at_10_unmapped": unmapped,
        "mapped_minus_unmapped": mapped - unmapped,
        "seeds": config["seeds"],
    }
    _write_json(os.path.join(out, "mobility_report.json"), report)
    _write_echo(config, "mobility")


COMMANDS = {
    "gen-data": cmd_gen_data,
    "build-graph": cmd_build_graph,
    "train-poincare": cmd_train_poincare,
    "encode-semantic": cmd_encode_semantic,
    "train": cmd_train,
    "map": cmd_map,
    "eval": cmd_eval,
    "linkpred": cmd_linkpred,
    "mobility": cmd_mobility,
}


def main(argv: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="titlemap",
        description="Map noisy job titles onto a standard taxonomy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run config")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        os.makedirs(config["output_dir"], exist_ok=True)
        COMMANDS[args.command](config)
    except ConfigError as e:
        print(f"error kind=config code=2: {_one_line(e)}", file=sys.stderr)
        return 2
    except (DataError, EvaluationError) as e:
        print(f"error kind=data code=3: {_one_line(e)}", file=sys.stderr)
        return 3
    except FileNotFoundError as e:
        print(f"error kind=data code=3: no such file: {e.filename}", file=sys.stderr)
        return 3
    except (NumericError, TitlemapError) as e:
        print(f"error kind=numeric code=4: {_one_line(e)}", file=sys.stderr)
        return 4
    return 0


def _one_line(exc: Exception) -> str:
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
