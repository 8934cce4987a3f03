"""Two-step extraction (products first, then roles per product) and the
micro-averaged precision/recall/F1 evaluation harness for both subtasks."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import UNIT_TOKENS, MaskedText
from .errors import ParseError
from .extractor import AnswerSpan, ExtractorModel, predict
from .normalize import normalize_argument
from .roles import PRODUCT, ROLES

__all__ = [
    "StructuredReaction", "GoldAnnotation", "RoleMetrics", "EvalReport",
    "extract_products", "extract_reaction", "extract_all", "normalize_argument",
    "evaluate_products", "evaluate_roles", "load_reactions_file",
    "save_reactions_file", "render_report_table",
]


@dataclass
class StructuredReaction:
    pairs: dict[str, list[str]]
    source_doc_id: str = ""

    def validate(self) -> None:
        if len(self.pairs.get(PRODUCT, [])) != 1:
            raise ValueError("a reaction must carry exactly one product")
        for role, args in self.pairs.items():
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r}")
            if not args:
                raise ValueError(f"role {role!r} present with no arguments")

    def role_pairs(self) -> set[tuple[str, str]]:
        return {
            (role, normalize_argument(arg))
            for role, args in self.pairs.items()
            for arg in args
        }


@dataclass
class GoldAnnotation:
    doc_id: str
    reactions: list[StructuredReaction]


def _display_value(masked: MaskedText, span: AnswerSpan) -> str:
    """Span value, with the adjacent unit token appended for numeric spans so
    temperatures, times, and yields read as "60 °C" / "2 h" / "85 %"."""
    if span.entity_index is None:
        return span.value
    tag = masked.entities[span.entity_index]
    if tag.kind != "Num":
        return span.value
    nxt = tag.token_end
    if nxt < len(masked.tokens) and masked.tokens[nxt].surface in UNIT_TOKENS:
        adjacent = masked.tokens[nxt].char_start == masked.tokens[nxt - 1].char_end
        return span.value + ("" if adjacent else " ") + masked.tokens[nxt].surface
    return span.value


def extract_products(model: ExtractorModel, masked: MaskedText) -> list[str]:
    """Normalized, deduplicated product mentions in reading order."""
    out: list[str] = []
    for span in predict(model, PRODUCT, masked):
        value = normalize_argument(span.value)
        if value and value not in out:
            out.append(value)
    return out


def extract_reaction(model: ExtractorModel, masked: MaskedText, product: str) -> StructuredReaction:
    """Ask every non-product role question conditioned on one product.

    Roles with no trained weights or no answer are simply absent from the
    result.
    """
    pairs: dict[str, list[str]] = {PRODUCT: [product]}
    for role in ROLES:
        if role == PRODUCT or role not in model.trained_roles:
            continue
        values: list[str] = []
        seen: set[str] = set()
        for span in predict(model, role, masked, condition_product=product):
            value = _display_value(masked, span)
            key = normalize_argument(value)
            if key and key not in seen:
                seen.add(key)
                values.append(value)
        if values:
            pairs[role] = values
    return StructuredReaction(pairs=pairs, source_doc_id=masked.doc_id)


def extract_all(model: ExtractorModel, masked: MaskedText) -> list[StructuredReaction]:
    """One reaction per extracted product, in product order."""
    return [extract_reaction(model, masked, p) for p in extract_products(model, masked)]


@dataclass(frozen=True)
class RoleMetrics:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def plus(self, tp: int = 0, fp: int = 0, fn: int = 0) -> "RoleMetrics":
        return RoleMetrics(self.tp + tp, self.fp + fp, self.fn + fn)


@dataclass
class EvalReport:
    overall: RoleMetrics = field(default_factory=RoleMetrics)
    per_role: dict[str, RoleMetrics] = field(default_factory=dict)

    def to_json(self) -> dict:
        def entry(m: RoleMetrics) -> dict:
            return {"tp": m.tp, "fp": m.fp, "fn": m.fn,
                    "precision": m.precision, "recall": m.recall, "f1": m.f1}
        return {
            "overall": entry(self.overall),
            "per_role": {role: entry(m) for role, m in sorted(self.per_role.items())},
        }


def evaluate_products(
    preds: Mapping[str, Sequence[str]],
    gold: Mapping[str, Sequence[str]],
) -> EvalReport:
    """Micro P/R/F over normalized product mentions; a missing document
    counts as an empty list."""
    tally = RoleMetrics()
    for doc_id in sorted(set(preds) | set(gold)):
        p = Counter(normalize_argument(x) for x in preds.get(doc_id, ()))
        g = Counter(normalize_argument(x) for x in gold.get(doc_id, ()))
        tp = sum((p & g).values())
        tally = tally.plus(tp=tp, fp=sum(p.values()) - tp, fn=sum(g.values()) - tp)
    return EvalReport(overall=tally, per_role={PRODUCT: tally})


def _align_reactions(
    pred: Sequence[StructuredReaction],
    gold: Sequence[StructuredReaction],
) -> tuple[list[tuple[StructuredReaction, StructuredReaction]],
           list[StructuredReaction], list[StructuredReaction]]:
    """Greedy pairing by normalized product string, each gold used once."""
    remaining = list(range(len(gold)))
    aligned: list[tuple[StructuredReaction, StructuredReaction]] = []
    lone_pred: list[StructuredReaction] = []
    for pr in pred:
        key = normalize_argument(pr.pairs[PRODUCT][0])
        hit = next(
            (i for i in remaining if normalize_argument(gold[i].pairs[PRODUCT][0]) == key),
            None,
        )
        if hit is None:
            lone_pred.append(pr)
        else:
            remaining.remove(hit)
            aligned.append((pr, gold[hit]))
    lone_gold = [gold[i] for i in remaining]
    return aligned, lone_pred, lone_gold


def evaluate_roles(
    preds: Mapping[str, Sequence[StructuredReaction]],
    gold: Mapping[str, Sequence[StructuredReaction]],
    conditioning: str = "gold_products",
) -> EvalReport:
    """Micro P/R/F over (role, normalized argument) pairs of product-aligned
    reactions; pairs of unaligned reactions are all false positives or all
    false negatives."""
    if conditioning not in ("gold_products", "predicted"):
        raise ValueError(f"unknown conditioning mode {conditioning!r}")
    per_role: dict[str, RoleMetrics] = {}
    overall = RoleMetrics()

    def add(role: str, tp: int = 0, fp: int = 0, fn: int = 0) -> None:
        nonlocal overall
        per_role[role] = per_role.get(role, RoleMetrics()).plus(tp, fp, fn)
        overall = overall.plus(tp, fp, fn)

    for doc_id in sorted(set(preds) | set(gold)):
        aligned, lone_pred, lone_gold = _align_reactions(
            preds.get(doc_id, ()), gold.get(doc_id, ())
        )
        for pr, gr in aligned:
            p_pairs, g_pairs = pr.role_pairs(), gr.role_pairs()
            for role, _ in p_pairs & g_pairs:
                add(role, tp=1)
            for role, _ in p_pairs - g_pairs:
                add(role, fp=1)
            for role, _ in g_pairs - p_pairs:
                add(role, fn=1)
        for reaction in lone_pred:
            for role, _ in reaction.role_pairs():
                add(role, fp=1)
        for reaction in lone_gold:
            for role, _ in reaction.role_pairs():
                add(role, fn=1)
    return EvalReport(overall=overall, per_role=per_role)


def load_reactions_file(path: str | Path) -> dict[str, list[StructuredReaction]]:
    """JSONL of {"doc_id", "reactions": [{role: [args], ...}, ...]}."""
    out: dict[str, list[StructuredReaction]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            try:
                doc_id = obj["doc_id"]
                reactions = []
                for raw in obj["reactions"]:
                    reaction = StructuredReaction(
                        pairs={role: list(args) for role, args in raw.items()},
                        source_doc_id=doc_id,
                    )
                    reaction.validate()
                    reactions.append(reaction)
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"malformed reaction record: {exc}", line=lineno) from exc
            if doc_id in out:
                raise ParseError(f"duplicate doc_id {doc_id!r}", line=lineno)
            out[doc_id] = reactions
    return out


def save_reactions_file(
    reactions: Mapping[str, Iterable[StructuredReaction]],
    path: str | Path,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id in reactions:
            payload = {
                "doc_id": doc_id,
                "reactions": [
                    {role: r.pairs[role] for role in ROLES if role in r.pairs}
                    for r in reactions[doc_id]
                ],
            }
            fh.write(json.dumps(payload, sort_keys=True) + "\n")


def render_report_table(report: EvalReport) -> str:
    """Plain-text P/R/F table, one row per role plus the overall row."""
    rows = [("role", "P", "R", "F", "tp", "fp", "fn")]
    entries = sorted(report.per_role.items())
    for role, m in entries + [("overall", report.overall)]:
        rows.append((role, f"{m.precision:.3f}", f"{m.recall:.3f}", f"{m.f1:.3f}",
                     str(m.tp), str(m.fp), str(m.fn)))
    widths = [max(len(r[i]) for r in rows) for i in range(7)]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
             for row in rows]
    return "\n".join(lines) + "\n"
