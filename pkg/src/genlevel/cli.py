"""Command-line entry point wiring corpus -> models -> eval.

Subcommands: stats, dump-contextual, train-context, train-features,
evaluate, predict, sweep-c. Values may come from an INI config file
(--config); command-line flags override file values. All randomness flows
from --seed through named sub-seeds, so repeated runs produce byte-identical
artifacts.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import context_model as cm
from . import feature_model as fm
from .contextual import build_contextual_example, splice_candidate
from .corpus import (
    PAD_TOKEN,
    DatasetError,
    compute_stats,
    filter_by_max_candidates,
    load_dataset,
)
from .encoder import EmbeddingStore, HashedNgramEmbedder
from .evaluation import evaluate, write_report


def _config_defaults(path: str | None) -> dict[str, str]:
    """Flatten an INI file into {key: value}; section names are dropped so
    any section layout works (README documents [run]/[context]/[features])."""
    if not path:
        return {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")
    flat: dict[str, str] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            flat[key.replace("-", "_")] = value
    return flat


def _apply_config(args: argparse.Namespace, flat: dict[str, str]) -> None:
    for key, value in flat.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)


def _int_list(text: str) -> list[int]:
    return [int(x) for x in str(text).split(",") if x.strip()]


def _resolve_threads(args) -> int:
    if getattr(args, "threads", None):
        return int(args.threads)
    env = os.environ.get("GENLEVEL_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _make_provider(args, dim: int):
    encoder = args.encoder or "hashed"
    if encoder == "hashed":
        return HashedNgramEmbedder(dim), None
    if encoder == "store":
        if not args.store:
            raise ValueError("--store is required with --encoder store")
        return None, EmbeddingStore.load(args.store, expected_dim=dim)
    raise ValueError(f"unknown encoder {encoder!r}")


def _context_config(args, cap: int) -> cm.ContextModelConfig:
    encoder = args.encoder or "hashed"
    lr = args.lr
    if lr is None:
        # Table-style default 1e-6 presumes encoder-scale vectors; the
        # hashed provider needs a larger step.
        lr = 1e-2 if encoder == "hashed" else 1e-6
    cfg = cm.ContextModelConfig(
        max_candidates=cap,
        dim=int(args.dim or 768),
        batch_size=int(args.batch_size or 2),
        max_epochs=int(args.epochs or 20),
        learning_rate=float(lr),
        weight_decay=float(args.weight_decay or 1e-4),
        logit_sign=int(args.logit_sign or -1),
        early_stop_patience=int(args.patience if args.patience is not None else 3),
        val_fraction=float(args.val_fraction if args.val_fraction is not None else 0.1),
        leave_one_out=bool(args.leave_one_out),
        seed=int(args.seed or 0),
    )
    return cfg


def cmd_stats(args) -> int:
    coverage = _int_list(args.coverage or "2,5,6,7")
    out = {}
    for tag, path in (("train", args.train), ("test", args.test)):
        if not path:
            continue
        records = load_dataset(path, tag)
        stats = compute_stats(records, coverage)
        out[tag] = {
            "record_count": stats.record_count,
            "histogram_num_candidates": {
                str(k): v for k, v in sorted(stats.histogram_num_candidates.items())
            },
            "histogram_selected_level": {
                str(k): v for k, v in sorted(stats.histogram_selected_level.items())
            },
            "coverage_at": {str(k): v for k, v in sorted(stats.coverage_at.items())},
        }
        print(f"{tag}: {stats.record_count} records")
        for cap in coverage:
            print(f"  C={cap}: {stats.coverage_at[cap]:.2%} covered")
    if not out:
        print("error: provide --train and/or --test", file=sys.stderr)
        return 2
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_json(outdir / "stats.json", out)
    return 0


def cmd_dump_contextual(args) -> int:
    records = load_dataset(args.dataset, "train")
    cap = int(args.c)
    pad = args.pad_token or PAD_TOKEN
    records = filter_by_max_candidates(records, cap)
    lines = []
    for rec in records:
        ex = build_contextual_example(rec, cap, pad)
        lines.append(
            json.dumps(
                {
                    "record_id": ex.record_id,
                    "original_text": ex.original_text,
                    "padded_candidates": list(ex.padded_candidates),
                    "generalized_sentences": list(ex.generalized_sentences),
                    "pad_mask": list(ex.pad_mask),
                    "target_level": ex.target_level,
                    "all_levels": sorted(ex.all_levels),
                },
                ensure_ascii=False,
                sort_keys=True,
            )
        )
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _train_context_once(train_records, args, cap):
    cfg = _context_config(args, cap)
    provider, store = _make_provider(args, cfg.dim)
    params, log = cm.train(train_records, cfg, provider=provider, store=store)
    return cfg, provider, store, params, log


def cmd_train_context(args) -> int:
    cap = int(args.c or 7)
    records = filter_by_max_candidates(load_dataset(args.train, "train"), cap)
    cfg, provider, store, params, log = _train_context_once(records, args, cap)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cm.save_checkpoint(outdir / "checkpoint.json", params, cfg)
    _write_json(
        outdir / "config.json",
        {"command": "train-context", "config": asdict(cfg), "train": str(args.train)},
    )
    _write_json(
        outdir / "training_log.json",
        {
            "best_epoch": log.best_epoch,
            "stopped_early": log.stopped_early,
            "epochs": [asdict(e) for e in log.epochs],
        },
    )
    if args.test:
        test = filter_by_max_candidates(load_dataset(args.test, "test"), cap)
        preds = [
            cm.predict(params, r, cfg, provider=provider, store=store).predicted_level
            for r in test
        ]
        result = evaluate(preds, test)
        write_report(
            result,
            outdir / "metrics.json",
            outdir / "report.txt",
            outdir / "confusion.csv",
            title=f"Context-aware model (C={cap})",
        )
        print(
            f"majority vote {result.majority_vote_acc:.4f}, "
            f"all selections {result.all_selections_acc:.4f}"
        )
    print(f"artifacts written to {outdir}")
    return 0


def _build_feature_model(kind: str, n_levels: int, seed: int):
    if kind == "tree":
        return fm.DecisionTreeLevelClassifier(n_levels=n_levels)
    if kind == "forest":
        return fm.RandomForestLevelClassifier(n_levels=n_levels, seed=seed)
    if kind == "boosted":
        return fm.GradientBoostingLevelClassifier(n_levels=n_levels)
    if kind == "stacking":
        return fm.StackingLevelClassifier(n_levels=n_levels, seed=seed)
    if kind == "baseline":
        return fm.MostFrequentLevelBaseline()
    raise ValueError(f"unknown feature model {kind!r}")


def cmd_train_features(args) -> int:
    cap = int(args.c or 7)
    kind = args.model or "stacking"
    seed = int(args.seed or 0)
    records = filter_by_max_candidates(load_dataset(args.train, "train"), cap)
    vocab = fm.Vocabulary.build(records, min_count=int(args.min_count or 1))
    X = fm.design_matrix(records, vocab)
    y = [r.majority_level for r in records]
    model = _build_feature_model(kind, cap, seed).fit(X, y)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    fm.save_model(outdir / "model.json", model, vocab)
    _write_json(
        outdir / "config.json",
        {
            "command": "train-features",
            "model": kind,
            "c": cap,
            "seed": seed,
            "min_count": int(args.min_count or 1),
            "train": str(args.train),
        },
    )
    if args.test:
        test = filter_by_max_candidates(load_dataset(args.test, "test"), cap)
        preds = fm.predict_levels(model, test, vocab)
        result = evaluate(preds, test)
        write_report(
            result,
            outdir / "metrics.json",
            outdir / "report.txt",
            outdir / "confusion.csv",
            title=f"Feature-based model ({kind}, C={cap})",
        )
        print(
            f"majority vote {result.majority_vote_acc:.4f}, "
            f"all selections {result.all_selections_acc:.4f}"
        )
    print(f"artifacts written to {outdir}")
    return 0


def _load_any_model(path: str):
    """Sniff a model file: feature-model JSON or context checkpoint."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if "model" in obj and "vocabulary" in obj:
        model = fm.model_from_dict(obj["model"])
        vocab = fm.Vocabulary.from_dict(obj["vocabulary"])
        return ("features", model, vocab)
    if "W0" in obj:
        params, cap, logit_sign = cm.load_checkpoint(path)
        return ("context", params, (cap, logit_sign, obj["V"]))
    raise ValueError(f"{path}: not a recognized model file")


def _predict_with_model(model_file: str, records, args) -> list[int]:
    kind, model, extra = _load_any_model(model_file)
    if kind == "features":
        return fm.predict_levels(model, records, extra)
    cap, logit_sign, dim = extra
    args_dim = int(args.dim or dim)
    cfg = cm.ContextModelConfig(max_candidates=cap, dim=args_dim, logit_sign=logit_sign)
    provider, store = _make_provider(args, args_dim)
    return [
        cm.predict(model, r, cfg, provider=provider, store=store).predicted_level
        for r in records
    ]


def cmd_evaluate(args) -> int:
    kind, _, extra = _load_any_model(args.model_file)
    cap = int(args.c) if args.c else (extra[0] if kind == "context" else 7)
    records = filter_by_max_candidates(load_dataset(args.test, "test"), cap)
    preds = _predict_with_model(args.model_file, records, args)
    result = evaluate(preds, records)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_report(
        result,
        outdir / "metrics.json",
        outdir / "report.txt",
        outdir / "confusion.csv",
        title=f"Evaluation ({kind} model, C={cap})",
    )
    _write_json(
        outdir / "config.json",
        {
            "command": "evaluate",
            "model_file": str(args.model_file),
            "test": str(args.test),
            "c": cap,
            "seed": int(args.seed or 0),
        },
    )
    print(
        f"majority vote {result.majority_vote_acc:.4f}, "
        f"all selections {result.all_selections_acc:.4f}"
    )
    return 0


def cmd_predict(args) -> int:
    kind, _, extra = _load_any_model(args.model_file)
    cap = int(args.c) if args.c else (extra[0] if kind == "context" else 7)
    records = filter_by_max_candidates(load_dataset(args.dataset, "test"), cap)
    preds = _predict_with_model(args.model_file, records, args)
    lines = []
    for rec, level in zip(records, preds):
        lines.append(
            json.dumps(
                {
                    "id": rec.id,
                    "predicted_level": level,
                    "chosen_candidate": rec.candidates[level - 1],
                    "generalized_text": splice_candidate(rec, rec.candidates[level - 1]),
                },
                ensure_ascii=False,
                sort_keys=True,
            )
        )
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_sweep_c(args) -> int:
    caps = _int_list(args.c_values or "2,5,6,7")
    model_kind = args.model or "context"
    train_all = load_dataset(args.train, "train")
    test_all = load_dataset(args.test, "test")
    total = len(train_all) + len(test_all)
    rows = []
    for cap in caps:
        train_recs = filter_by_max_candidates(train_all, cap)
        test_recs = filter_by_max_candidates(test_all, cap)
        kept = len(train_recs) + len(test_recs)
        baseline = fm.baseline_predict(test_recs, "most_frequent_level", train_recs)
        base_res = evaluate(baseline, test_recs)
        if model_kind == "context":
            cfg, provider, store, params, _ = _train_context_once(train_recs, args, cap)
            preds = [
                cm.predict(params, r, cfg, provider=provider, store=store).predicted_level
                for r in test_recs
            ]
        elif model_kind == "baseline":
            preds = baseline
        else:
            vocab = fm.Vocabulary.build(train_recs)
            X = fm.design_matrix(train_recs, vocab)
            y = [r.majority_level for r in train_recs]
            model = _build_feature_model(model_kind, cap, int(args.seed or 0)).fit(X, y)
            preds = fm.predict_levels(model, test_recs, vocab)
        result = evaluate(preds, test_recs)
        rows.append(
            {
                "C": cap,
                "dataset_pct": kept / total if total else 0.0,
                "baseline_majority_vote": base_res.majority_vote_acc,
                "baseline_all_selections": base_res.all_selections_acc,
                "model_majority_vote": result.majority_vote_acc,
                "model_all_selections": result.all_selections_acc,
                "weighted_support": {
                    "precision": result.weighted_support[0],
                    "recall": result.weighted_support[1],
                    "f1": result.weighted_support[2],
                },
                "weighted_literal": {
                    "precision": result.weighted_literal[0],
                    "recall": result.weighted_literal[1],
                    "f1": result.weighted_literal[2],
                },
                "confusion_rates": result.confusion_rates.tolist(),
            }
        )

    header = (
        f"{'C':>3} {'baseline MV':>12} {'model MV':>10} {'baseline AS':>12} "
        f"{'model AS':>10} {'dataset %':>10}"
    )
    table = [f"Sweep over C ({model_kind} model)", "", header, "-" * len(header)]
    for row in rows:
        table.append(
            f"{row['C']:>3} {row['baseline_majority_vote']:>12.4f} "
            f"{row['model_majority_vote']:>10.4f} "
            f"{row['baseline_all_selections']:>12.4f} "
            f"{row['model_all_selections']:>10.4f} {row['dataset_pct']:>10.2%}"
        )
    text = "\n".join(table) + "\n"

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(outdir / "sweep.json", {"model": model_kind, "rows": rows})
    (outdir / "sweep.txt").write_text(text, encoding="utf-8")
    _write_json(
        outdir / "config.json",
        {
            "command": "sweep-c",
            "model": model_kind,
            "c_values": caps,
            "seed": int(args.seed or 0),
            "train": str(args.train),
            "test": str(args.test),
        },
    )
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genlevel",
        description="PII generalization level prediction toolkit",
    )
    parser.add_argument("--config", help="INI config file; flags override its values")
    parser.add_argument("--threads", type=int, help="parallelism cap (GENLEVEL_THREADS fallback)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset summary")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--coverage", help="comma-separated C values")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("dump-contextual", help="emit contextual examples as JSONL")
    p.add_argument("--dataset", required=True)
    p.add_argument("--c", required=True)
    p.add_argument("--pad-token", dest="pad_token")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump_contextual)

    def add_context_flags(p):
        p.add_argument("--encoder", choices=["hashed", "store"])
        p.add_argument("--store")
        p.add_argument("--dim")
        p.add_argument("--lr")
        p.add_argument("--epochs")
        p.add_argument("--batch-size", dest="batch_size")
        p.add_argument("--weight-decay", dest="weight_decay")
        p.add_argument("--logit-sign", dest="logit_sign")
        p.add_argument("--patience", dest="patience")
        p.add_argument("--val-fraction", dest="val_fraction")
        p.add_argument("--leave-one-out", dest="leave_one_out", action="store_true")
        p.add_argument("--seed")

    p = sub.add_parser("train-context", help="train the context-aware scorer")
    p.add_argument("--train", required=True)
    p.add_argument("--test")
    p.add_argument("--c")
    add_context_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_context)

    p = sub.add_parser("train-features", help="train a feature-based model")
    p.add_argument("--train", required=True)
    p.add_argument("--test")
    p.add_argument("--c")
    p.add_argument("--model", choices=["tree", "forest", "boosted", "stacking", "baseline"])
    p.add_argument("--min-count", dest="min_count")
    p.add_argument("--seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_features)

    p = sub.add_parser("evaluate", help="evaluate a saved model on a test split")
    p.add_argument("--test", required=True)
    p.add_argument("--model-file", dest="model_file", required=True)
    p.add_argument("--c")
    p.add_argument("--encoder", choices=["hashed", "store"])
    p.add_argument("--store")
    p.add_argument("--dim")
    p.add_argument("--seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="emit generalized text for each record")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model-file", dest="model_file", required=True)
    p.add_argument("--c")
    p.add_argument("--encoder", choices=["hashed", "store"])
    p.add_argument("--store")
    p.add_argument("--dim")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep-c", help="run a sweep over maximum candidate counts")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--c-values", dest="c_values")
    p.add_argument("--model", choices=["context", "tree", "forest", "boosted", "stacking", "baseline"])
    add_context_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_c)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, _config_defaults(args.config))
        args.threads = _resolve_threads(args)
        return args.func(args)
    except (DatasetError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
