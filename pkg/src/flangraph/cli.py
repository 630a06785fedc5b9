"""Command-line pipeline: parse -> graph -> train -> eval, plus stats.

Stages talk through files (JSONL, FLANEMB1, checkpoints) so each one is
independently testable and external embedding exporters can plug in between
``graph`` and ``train``.  Exit codes: 0 success, 2 validation error,
3 runtime/numeric error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    corpus_stats,
    filter_min_date,
    load_applications,
    load_features,
    split_application_ids,
)
from .embed import HashBackend, TableBackend, embed_graph, load_embedding_table, text_key
from .errors import (
    FlanError,
    MissingAncestor,
    NonFiniteLoss,
    ShapeMismatch,
)
from .gnn import ModelConfig, load_checkpoint, predict, save_checkpoint, train
from .graph import GRAPH_MODES, export_graph, graph_from_json
from .metrics import aggregate_seeds, evaluate
from .model import Application
from .parsing import ParseWarnings, parse
from .report import format_eval_table, render_loss_curves, render_score_figure

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


@dataclass
class RunManifest:
    tool: str
    version: str
    command: str
    config: dict
    inputs: dict
    seeds: list[int]
    outputs: list[str]

    def write(self, path: Path) -> None:
        path.write_text(
            json.dumps(asdict(self), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_apps(args) -> list[Application]:
    apps, errors = load_applications(args.input, strict=args.strict)
    for err in errors:
        print(f"warning: {args.input}:{err.line}: {err.message}", file=sys.stderr)
    apps = filter_min_date(apps, getattr(args, "min_date", None))
    if not apps:
        raise FlanError(f"{args.input}: no applications after filtering")
    return apps


def _map_apps(apps, worker, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, apps))
    return [worker(app) for app in apps]


def _parse_application(app: Application, strict: bool):
    """Parse all claims of one application; returns (parsed list, report rows)."""
    parsed = []
    issues = []
    for claim in app.claims:
        warnings = ParseWarnings()
        try:
            parsed.append((claim, parse(claim, warnings)))
        except FlanError as exc:
            if strict:
                raise
            issues.append(
                {"application_id": app.application_id, "claim": claim.number, "error": str(exc)}
            )
        for event in warnings.events:
            issues.append(
                {"application_id": app.application_id, "claim": claim.number, "warning": event}
            )
    return parsed, issues


def cmd_parse(args) -> int:
    apps = _load_apps(args)

    def worker(app):
        return app, *_parse_application(app, args.strict)

    results = _map_apps(apps, worker, args.threads)
    out_path = Path(args.output)
    all_issues = []
    references = 0
    records = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for app, parsed, issues in results:
            all_issues.extend(issues)
            for _claim, p in parsed:
                row = {"application_id": app.application_id, **p.to_dict()}
                fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")
                records += 1
                if p.reference is not None:
                    references += 1
    report_path = out_path.with_suffix(".warnings.json")
    report_path.write_text(
        json.dumps({"issues": all_issues}, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    print(f"parsed {records} claims ({references} with references); "
          f"{len(all_issues)} warnings -> {report_path}")
    return EXIT_OK


def cmd_graph(args) -> int:
    apps = _load_apps(args)

    def worker(app):
        parsed, issues = _parse_application(app, args.strict)
        warnings = ParseWarnings()
        graphs = []
        done = {}
        for claim, p in sorted(parsed, key=lambda cp: cp[1].claim_number):
            try:
                if args.mode == "flan":
                    from .graph import build_flan_graph

                    graph = build_flan_graph(p, done, warnings)
                elif args.mode == "coarse":
                    from .graph import build_coarse_graph

                    graph = build_coarse_graph([x[1] for x in parsed], p.claim_number)
                else:
                    from .graph import build_solitary

                    graph = build_solitary(p)
            except MissingAncestor as exc:
                if args.strict:
                    raise
                issues.append(
                    {
                        "application_id": app.application_id,
                        "claim": p.claim_number,
                        "error": str(exc),
                    }
                )
                continue
            done[p.claim_number] = graph
            graphs.append((claim, graph))
        for event in warnings.events:
            issues.append({"application_id": app.application_id, "warning": event})
        return app, graphs, issues

    results = _map_apps(apps, worker, args.threads)
    out_path = Path(args.output)
    dot_dir = Path(args.dot_dir) if args.dot_dir else None
    if dot_dir:
        dot_dir.mkdir(parents=True, exist_ok=True)
    texts: set[str] = set()
    all_issues = []
    count = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for app, graphs, issues in results:
            all_issues.extend(issues)
            for claim, graph in graphs:
                row = {
                    "application_id": app.application_id,
                    "claim_number": graph.claim_number,
                    "filing_date": app.filing_date,
                    "label": claim.label,
                    "mode": args.mode,
                    "graph": graph.to_dict(),
                }
                fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")
                count += 1
                texts.update(node.text for node in graph.nodes)
                if dot_dir:
                    dot_path = dot_dir / f"{app.application_id}_claim{graph.claim_number}.dot"
                    dot_path.write_text(export_graph(graph, "dot"), encoding="utf-8")
    if args.texts_out:
        with open(args.texts_out, "w", encoding="utf-8") as fh:
            for text in sorted(texts):
                fh.write(
                    json.dumps({"key": str(text_key(text)), "text": text},
                               sort_keys=True, separators=(",", ":")) + "\n"
                )
    report_path = out_path.with_suffix(".warnings.json")
    report_path.write_text(
        json.dumps({"issues": all_issues}, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    print(f"built {count} {args.mode} graphs; {len(all_issues)} warnings -> {report_path}")
    return EXIT_OK


def _make_backend(spec: str):
    kind, _, rest = spec.partition(":")
    if kind == "hash":
        dim, _, seed = rest.partition(":")
        return HashBackend(dim=int(dim), seed=int(seed or 0))
    if kind == "table":
        return TableBackend(load_embedding_table(rest))
    raise ValueError(f"bad --embed spec {spec!r}; use hash:DIM:SEED or table:PATH")


def _load_graph_records(path: str | Path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    if not records:
        raise FlanError(f"{path}: no graph records")
    return records


def _embed_records(records, backend, features, threads: int = 1):
    """Embed every record; returns (examples, labels may contain None)."""

    def one(rec):
        graph = graph_from_json(json.dumps(rec["graph"]))
        embedded = embed_graph(graph, backend)
        feat = None
        if features is not None and features.dim > 0:
            feat = features.get(rec["application_id"], rec["claim_number"])
        return embedded, feat, rec.get("label")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, records))
    return [one(rec) for rec in records]


def _partition_records(records, train_frac, valid_frac):
    pairs = [(r["filing_date"], r["application_id"]) for r in records]
    assignment = split_application_ids(pairs, train_frac, valid_frac)
    return {
        part: [r for r in records if assignment[r["application_id"]] == part]
        for part in ("train", "valid", "test")
    }


def cmd_train(args) -> int:
    records = _load_graph_records(args.graphs)
    backend = _make_backend(args.embed)
    features = load_features(args.features) if args.features else None
    parts = _partition_records(records, args.train_frac, args.valid_frac)
    if not parts["train"]:
        raise FlanError("training partition is empty")

    train_set = _embed_records(parts["train"], backend, features)
    valid_set = _embed_records(parts["valid"], backend, features)
    for embedded, _feat, label in train_set + valid_set:
        if label is None:
            raise FlanError(
                f"claim {embedded.graph.claim_number}: unlabeled record in training data"
            )

    seeds = [int(s) for s in args.seeds.split(",")]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    input_dim = backend.dim
    feature_dim = features.dim if features else 0

    manifest = RunManifest(
        tool="flangraph",
        version=__version__,
        command="train",
        config={
            "arch": args.arch,
            "layers": args.layers,
            "hidden": args.hidden,
            "lr": args.lr,
            "batch": args.batch,
            "epochs": args.epochs,
            "embed": args.embed,
            "train_frac": args.train_frac,
            "valid_frac": args.valid_frac,
            "pos_weight": args.pos_weight,
            "self_loops": not args.no_self_loops,
            "reverse_edges": args.reverse_edges,
            "targets_only": args.targets_only,
        },
        inputs={
            "graphs": _sha256(args.graphs),
            "features": _sha256(args.features) if args.features else None,
        },
        seeds=seeds,
        outputs=[f"model_seed{s}.ckpt" for s in seeds] + ["train_report.json"],
    )
    manifest.write(out_dir / "manifest.json")

    reports = []
    for seed in seeds:
        config = ModelConfig(
            input_dim=input_dim,
            arch=args.arch,
            num_layers=args.layers,
            hidden_dim=args.hidden,
            feature_dim=feature_dim,
            learning_rate=args.lr,
            batch_size=args.batch,
            epochs=args.epochs,
            seed=seed,
            add_self_loops=not args.no_self_loops,
            add_reverse_edges=args.reverse_edges,
            positive_class_weight=args.pos_weight,
            targets_only=args.targets_only,
        )
        params, report = train(train_set, config, valid_set or None)
        save_checkpoint(out_dir / f"model_seed{seed}.ckpt", params, config)
        reports.append(report)
        val = f", val AUC {report.val_auc:.4f}" if report.val_auc is not None else ""
        print(f"seed {seed}: final loss {report.epoch_losses[-1] if report.epoch_losses else float('nan'):.4f}{val}")

    aucs = [r.val_auc for r in reports if r.val_auc is not None]
    summary = {
        "per_seed": [r.to_dict() for r in reports],
        "val_auc_mean": float(np.mean(aucs)) if aucs else None,
        "val_auc_std": float(np.std(aucs, ddof=1)) if len(aucs) > 1 else 0.0,
        "train_size": len(train_set),
        "valid_size": len(valid_set),
    }
    (out_dir / "train_report.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    # Wall-clock times live apart from the deterministic report.
    (out_dir / "timing.json").write_text(
        json.dumps({f"seed{r.seed}": r.wall_seconds for r in reports}, indent=2) + "\n",
        encoding="utf-8",
    )
    render_loss_curves(reports, out_dir / "loss_curves.png")
    return EXIT_OK


def cmd_eval(args) -> int:
    records = _load_graph_records(args.graphs)
    if args.split != "all":
        parts = _partition_records(records, args.train_frac, args.valid_frac)
        records = parts[args.split]
        if not records:
            raise FlanError(f"split {args.split!r} is empty")
    backend = _make_backend(args.embed)
    features = load_features(args.features) if args.features else None
    examples = _embed_records(records, backend, features, args.threads)
    labels = [label for _, _, label in examples]
    if any(label is None for label in labels):
        raise FlanError("evaluation requires labels on every record")

    per_model = []
    all_scores = None
    for model_path in args.model:
        params, config = load_checkpoint(model_path)
        scores = predict(
            params, config, [e[0] for e in examples], [e[1] for e in examples]
        )
        per_model.append(evaluate(scores, labels, args.threshold))
        all_scores = scores  # last model's scores back the dump and figure

    report_out = Path(args.report_out)
    if len(per_model) == 1:
        payload = per_model[0].to_dict()
        aggregated = None
    else:
        aggregated = aggregate_seeds(per_model)
        payload = {
            "models": [r.to_dict() for r in per_model],
            "aggregate": {k: {"mean": v[0], "std": v[1]} for k, v in aggregated.items()},
        }
    report_out.write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )

    csv_path = report_out.with_suffix(".scores.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("application_id,claim_number,score,label\n")
        for rec, score in zip(records, all_scores):
            fh.write(f"{rec['application_id']},{rec['claim_number']},{score:.10f},{rec['label']}\n")

    table = format_eval_table(per_model, aggregated)
    report_out.with_suffix(".table.txt").write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    render_score_figure(all_scores, labels, report_out.with_suffix(".scores.png"))
    return EXIT_OK


def cmd_stats(args) -> int:
    apps = _load_apps(args)
    stats = corpus_stats(apps)
    print(json.dumps(stats.to_dict(), sort_keys=True, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flangraph",
        description="claim dependency graphs and GNN classifiers for patent approval prediction",
    )
    parser.add_argument("--version", action="version", version=f"flangraph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--input", required=True, help="applications JSONL (gzip ok)")
        p.add_argument("--strict", action="store_true", help="abort on first bad record")
        p.add_argument("--threads", type=int, default=1, help="worker threads across applications")
        p.add_argument("--min-date", default=None, help="drop applications filed before this date")

    p = sub.add_parser("parse", help="decompose claims into segments")
    add_common(p)
    p.add_argument("--output", required=True, help="parsed claims JSONL")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("graph", help="build per-claim graphs")
    add_common(p)
    p.add_argument("--output", required=True, help="graphs JSONL")
    p.add_argument("--mode", choices=GRAPH_MODES, default="flan")
    p.add_argument("--dot-dir", default=None, help="write a DOT file per claim here")
    p.add_argument("--texts-out", default=None, help="write unique node texts JSONL here")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("train", help="train GNN classifiers")
    p.add_argument("--graphs", required=True, help="graphs JSONL from the graph command")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--embed", default="hash:128:0", help="hash:DIM:SEED or table:PATH")
    p.add_argument("--features", default=None, help="per-claim feature vectors JSONL")
    p.add_argument("--arch", choices=("gcn", "graphsage", "gat"), default="graphsage")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--lr", type=float, default=5e-3)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seeds", default="0,1,2", help="comma-separated seed list")
    p.add_argument("--train-frac", type=float, default=0.76)
    p.add_argument("--valid-frac", type=float, default=0.14)
    p.add_argument("--pos-weight", type=float, default=1.0)
    p.add_argument("--no-self-loops", action="store_true")
    p.add_argument("--reverse-edges", action="store_true")
    p.add_argument("--targets-only", action="store_true",
                   help="readout over target nodes only (root excluded)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate checkpoints")
    p.add_argument("--model", action="append", required=True, help="checkpoint (repeatable)")
    p.add_argument("--graphs", required=True)
    p.add_argument("--embed", default="hash:128:0")
    p.add_argument("--features", default=None)
    p.add_argument("--report-out", required=True)
    p.add_argument("--split", choices=("all", "train", "valid", "test"), default="all")
    p.add_argument("--train-frac", type=float, default=0.76)
    p.add_argument("--valid-frac", type=float, default=0.14)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--threads", type=int, default=1, help="worker threads for embedding")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="corpus statistics")
    add_common(p)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NonFiniteLoss, ShapeMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (FlanError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
