"""Command-line entry point: every stage as a subcommand over a workspace.

Exit codes: 0 success, 2 usage, 3 data error, 4 state error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .bootstrap import BootstrapConfig, Workspace, run_bootstrap
from .corpus import Document, load_corpus, prepare_document
from .errors import DataError, ParseError, StateError, UntrainedRole
from .extractor import load_model, save_model, train
from .fileio import atomic_write_text
from .patterns import load_pattern_file
from .pipeline import (
    evaluate_products,
    evaluate_roles,
    extract_all,
    load_reactions_file,
    render_report_table,
    save_reactions_file,
)
from .roles import PRODUCT, ROLES
from .server import serve
from .supervision import (
    filter_patent_records,
    load_patent_records,
    load_qa_file,
    patent_to_qa,
    save_qa_file,
    weak_label,
)

_CONFIG_INT = {"iterations", "n_min", "n_max", "min_freq", "top_k_per_role", "epochs", "seed"}
_CONFIG_FLOAT = {"auto_accept_precision", "negative_ratio", "learning_rate", "tau"}
_CONFIG_STR = {"review_mode"}
_CONFIG_PATHS = {"corpus", "gazetteer", "seeds", "patents", "gold", "workspace"}


def load_config_file(path: str | Path) -> dict:
    """Flat "key = value" lines; '#' starts a comment."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=lineno)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key in _CONFIG_INT:
                values[key] = int(value)
            elif key in _CONFIG_FLOAT:
                values[key] = float(value)
            elif key == "linguistic_roles":
                roles = frozenset(r.strip() for r in value.split(",") if r.strip())
                values[key] = roles
            elif key in _CONFIG_STR or key in _CONFIG_PATHS:
                values[key] = value
            else:
                raise ParseError(f"unknown config key {key!r}", line=lineno)
        except ValueError as exc:
            raise ParseError(f"bad value for {key!r}: {exc}", line=lineno) from exc
    return values


def build_bootstrap_config(args: argparse.Namespace) -> BootstrapConfig:
    values: dict[str, object] = {}
    if getattr(args, "config", None):
        file_values = load_config_file(args.config)
        allowed = {f.name for f in fields(BootstrapConfig)}
        values.update({k: v for k, v in file_values.items() if k in allowed})
    if getattr(args, "iterations", None) is not None:
        values["iterations"] = args.iterations
    if getattr(args, "auto", False):
        values["review_mode"] = "auto"
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    try:
        return BootstrapConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad configuration: {exc}") from exc


def _workspace(args: argparse.Namespace) -> Workspace:
    return Workspace(args.workspace)


def _masked_corpus(ws: Workspace):
    docs = ws.load_documents()
    return docs, ws.masked_corpus(docs)


# -- commands ----------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace) -> int:
    ws = _workspace(args)
    docs = load_corpus(args.corpus)  # validate before installing
    with ws.lock():
        ws.root.mkdir(parents=True, exist_ok=True)
        atomic_write_text(ws.corpus_path, Path(args.corpus).read_text(encoding="utf-8"))
        if args.gazetteer:
            atomic_write_text(ws.gazetteer_path, Path(args.gazetteer).read_text(encoding="utf-8"))
        ws.save_state(ws.load_state())
    print(f"ingested {len(docs)} documents into {ws.root}")
    return 0


def cmd_seed_label(args: argparse.Namespace) -> int:
    ws = _workspace(args)
    patterns = load_pattern_file(args.seeds)
    with ws.lock():
        pattern_set = ws.install_seeds(patterns)
        docs, masked = _masked_corpus(ws)
        labels = weak_label((masked[d.id] for d in docs), pattern_set)
        lines = [json.dumps({
            "doc_id": l.doc_id, "role": l.role, "argument_entity": l.argument_entity,
            "argument_text": l.argument_text, "pattern_id": l.pattern_id,
        }, sort_keys=True) for l in labels]
        atomic_write_text(ws.root / "weak_labels.jsonl", "".join(l + "\n" for l in lines))
    print(f"installed {len(patterns)} seed patterns; {len(labels)} weak labels")
    return 0


def cmd_distant_build(args: argparse.Namespace) -> int:
    ws = _workspace(args)
    records = load_patent_records(args.patents)
    kept, stats = filter_patent_records(records)
    examples = patent_to_qa(kept)
    out = Path(args.out) if args.out else ws.root / "distant_qa.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_qa_file(examples, out)
    print(json.dumps({
        "input_count": stats.input_count,
        "kept": stats.kept,
        "dropped_short": stats.dropped_short,
        "dropped_long": stats.dropped_long,
        "dropped_missing_arg": stats.dropped_missing_arg,
        "qa_examples": len(examples),
        "output": str(out),
    }, sort_keys=True))
    return 0


def cmd_bootstrap_run(args: argparse.Namespace) -> int:
    ws = _workspace(args)
    config = build_bootstrap_config(args)
    with ws.lock():
        states = run_bootstrap(ws, config)
    for st in states:
        print(json.dumps(st.to_json(), sort_keys=True))
    if states and states[-1].status == "pending":
        print(f"iteration {states[-1].iteration} awaiting review "
              f"(run 'review serve' or 'review finalize')", file=sys.stderr)
    return 0


def cmd_review_serve(args: argparse.Namespace) -> int:
    ws = _workspace(args)
    serve(ws, port=args.port, host=args.host)
    return 0


def cmd_review_finalize(args: argparse.Namespace) -> int:
    ws = _workspace(args)
    with ws.lock():
        merged = ws.finalize(args.iteration)
    print(f"iteration {args.iteration} finalized; pattern set v{merged.version} "
          f"({len(merged.patterns)} patterns)")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    ws = _workspace(args)
    examples = load_qa_file(args.dataset)
    with ws.lock():
        # QA examples carry their own context, so the masked corpus is built
        # straight from them; no ingested corpus is required to train.
        gaz = ws.gazetteer()
        masked = {}
        for ex in examples:
            if ex.doc_id not in masked:
                masked[ex.doc_id] = prepare_document(
                    Document(id=ex.doc_id, text=ex.context), gaz
                )
        config = build_bootstrap_config(args)
        model = train(examples, masked, hyper=config.hyper(), tau=config.tau)
        out = Path(args.out) if args.out else ws.root / "models" / "manual.json"
        out.parent.mkdir(parents=True, exist_ok=True)
        save_model(model, out)
        state = ws.load_state()
        state["latest_model"] = (
            str(out.relative_to(ws.root)) if out.is_relative_to(ws.root) else str(out)
        )
        ws.save_state(state)
    print(f"trained on {len(examples)} examples -> {out}")
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    ws = _workspace(args)
    if args.model:
        model_path = Path(args.model)
    else:
        latest = ws.load_state().get("latest_model")
        if latest is None:
            raise UntrainedRole(PRODUCT)
        model_path = ws.root / latest
    model = load_model(model_path)
    if PRODUCT not in model.trained_roles:
        raise UntrainedRole(PRODUCT)
    docs = load_corpus(args.infile)
    gaz = ws.gazetteer() if ws.gazetteer_path.exists() else set()
    predictions = {}
    for doc in docs:
        masked = prepare_document(doc, gaz)
        predictions[doc.id] = extract_all(model, masked)
    save_reactions_file(predictions, args.out)
    total = sum(len(v) for v in predictions.values())
    print(f"extracted {total} reactions from {len(docs)} documents -> {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    preds = load_reactions_file(args.pred)
    gold = load_reactions_file(args.gold)
    if args.subtask == "products":
        report = evaluate_products(
            {d: [r.pairs[PRODUCT][0] for r in rs] for d, rs in preds.items()},
            {d: [r.pairs[PRODUCT][0] for r in rs] for d, rs in gold.items()},
        )
    else:
        conditioning = "gold_products" if args.conditioning == "gold" else "predicted"
        report = evaluate_roles(preds, gold, conditioning=conditioning)
    print(render_report_table(report), end="")
    if args.out:
        atomic_write_text(args.out, json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    ws = _workspace(args)
    st = ws.iteration_state(args.iteration)
    print(json.dumps(st.to_json(), sort_keys=True, indent=2))
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rxnmine",
        description="Weakly supervised structured chemical reaction extraction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_ws(p: argparse.ArgumentParser) -> None:
        p.add_argument("--workspace", "-w", default=".", help="workspace directory")

    p = sub.add_parser("ingest", help="install a corpus into the workspace")
    p.add_argument("--corpus", required=True)
    p.add_argument("--gazetteer")
    add_ws(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("seed-label", help="install seed patterns and weak-label the corpus")
    p.add_argument("--seeds", required=True)
    add_ws(p)
    p.set_defaults(func=cmd_seed_label)

    distant = sub.add_parser("distant", help="distant supervision from patent records")
    dsub = distant.add_subparsers(dest="subcommand", required=True)
    p = dsub.add_parser("build", help="filter records and emit QA examples")
    p.add_argument("--patents", required=True)
    p.add_argument("--out")
    add_ws(p)
    p.set_defaults(func=cmd_distant_build)

    boot = sub.add_parser("bootstrap", help="iterative pattern enrichment")
    bsub = boot.add_subparsers(dest="subcommand", required=True)
    p = bsub.add_parser("run", help="run bootstrap iterations")
    p.add_argument("--auto", action="store_true", help="auto-accept instead of pausing for review")
    p.add_argument("--iterations", type=int)
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int)
    add_ws(p)
    p.set_defaults(func=cmd_bootstrap_run)

    review = sub.add_parser("review", help="human review of mined candidates")
    rsub = review.add_subparsers(dest="subcommand", required=True)
    p = rsub.add_parser("serve", help="serve the review console and API")
    p.add_argument("--port", type=int, default=8341)
    p.add_argument("--host", default="127.0.0.1")
    add_ws(p)
    p.set_defaults(func=cmd_review_serve)
    p = rsub.add_parser("finalize", help="merge decided candidates into the pattern set")
    p.add_argument("--iteration", type=int, required=True)
    add_ws(p)
    p.set_defaults(func=cmd_review_finalize)

    p = sub.add_parser("train", help="train the extractor on a QA dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out")
    p.add_argument("--config")
    add_ws(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="extract structured reactions from documents")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model")
    add_ws(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="score predictions against gold annotations")
    p.add_argument("subtask", choices=["products", "roles"])
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--conditioning", choices=["gold", "predicted"], default="gold")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="print an iteration's summary")
    p.add_argument("--iteration", type=int, required=True)
    add_ws(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 3
    except StateError as exc:
        print(f"error: state: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
