"""Synthetic supervision builders.

Two machines produce QA-format training records: weak labeling of a masked
corpus with the current pattern set, and distant supervision from patent-style
structured records aligned against their own text.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Document, MaskedText
from .errors import ParseError
from .extractor import question_for_role
from .patterns import PatternSet, match_all
from .roles import KNOWLEDGE_ROLES, PRODUCT, ROLES, role_index


@dataclass(frozen=True)
class WeakLabel:
    doc_id: str
    role: str
    argument_entity: int
    argument_text: str
    provenance: str  # "pattern" | "model"
    pattern_id: str | None = None
    score: float | None = None


@dataclass(frozen=True)
class QAExample:
    question: str
    context: str
    answers: tuple[str, ...]  # empty tuple encodes "None"
    role: str
    doc_id: str
    condition_product: str | None = None


def weak_label(masked_corpus: Iterable[MaskedText], pattern_set: PatternSet) -> list[WeakLabel]:
    """One label per distinct (doc, role, entity) hit by any pattern.

    When several patterns hit the same argument, provenance records the first
    one in the set's canonical order.
    """
    role_of = {p.id: p.role for p in pattern_set.patterns}
    labels: list[WeakLabel] = []
    for masked in masked_corpus:
        seen: set[tuple[str, int]] = set()
        for match in match_all(pattern_set, masked):
            role = role_of[match.pattern_id]
            key = (role, match.argument_entity)
            if key in seen:
                continue
            seen.add(key)
            labels.append(WeakLabel(
                doc_id=masked.doc_id,
                role=role,
                argument_entity=match.argument_entity,
                argument_text=masked.entity_value(match.argument_entity),
                provenance="pattern",
                pattern_id=match.pattern_id,
            ))
    return labels


def _first_product_text(labels: Sequence[WeakLabel]) -> str | None:
    products = [l for l in labels if l.role == PRODUCT]
    if not products:
        return None
    return min(products, key=lambda l: l.argument_entity).argument_text


def labels_to_qa(
    labels: Iterable[WeakLabel],
    corpus: Iterable[Document],
    negative_ratio: float = 1.0,
    seed: int = 42,
) -> list[QAExample]:
    """Positives per labeled (doc, role), plus seeded negative sampling.

    Negatives for a role are drawn from documents with no label for it, at
    negative_ratio times the positive count; non-product roles need the
    document's labeled product for the question, so documents without one are
    not eligible.
    """
    docs = {d.id: d for d in corpus}
    by_doc: dict[str, list[WeakLabel]] = {}
    for label in labels:
        by_doc.setdefault(label.doc_id, []).append(label)

    examples: list[QAExample] = []
    positives_per_role: dict[str, int] = {r: 0 for r in ROLES}
    labeled_roles: dict[str, set[str]] = {}
    product_of: dict[str, str] = {}

    for doc_id in sorted(by_doc):
        doc_labels = sorted(by_doc[doc_id], key=lambda l: (role_index(l.role), l.argument_entity))
        labeled_roles[doc_id] = {l.role for l in doc_labels}
        product = _first_product_text(doc_labels)
        if product is not None:
            product_of[doc_id] = product
        context = docs[doc_id].text
        for role in ROLES:
            texts: list[str] = []
            for label in doc_labels:
                if label.role == role and label.argument_text not in texts:
                    texts.append(label.argument_text)
            if not texts:
                continue
            condition = None
            if role != PRODUCT:
                condition = product_of.get(doc_id)
                if condition is None:
                    continue  # no product to condition the question on
            answers = tuple(t for t in texts if t.lower() in context.lower())
            if not answers:
                continue
            examples.append(QAExample(
                question=question_for_role(role, condition),
                context=context,
                answers=answers,
                role=role,
                doc_id=doc_id,
                condition_product=condition,
            ))
            positives_per_role[role] += 1

    rng = random.Random(seed)
    all_ids = sorted(docs)
    for role in ROLES:
        wanted = int(round(negative_ratio * positives_per_role[role]))
        if wanted <= 0:
            continue
        pool = [
            doc_id for doc_id in all_ids
            if role not in labeled_roles.get(doc_id, set())
            and (role == PRODUCT or doc_id in product_of)
        ]
        for doc_id in rng.sample(pool, min(wanted, len(pool))):
            condition = None if role == PRODUCT else product_of[doc_id]
            examples.append(QAExample(
                question=question_for_role(role, condition),
                context=docs[doc_id].text,
                answers=(),
                role=role,
                doc_id=doc_id,
                condition_product=condition,
            ))
    return examples


@dataclass(frozen=True)
class PatentRecord:
    id: str
    text: str
    product: tuple[str, ...]
    reactants: tuple[str, ...] = ()
    catalysts: tuple[str, ...] = ()
    solvents: tuple[str, ...] = ()


@dataclass(frozen=True)
class DatasetStats:
    input_count: int
    kept: int
    dropped_short: int
    dropped_long: int
    dropped_missing_arg: int

    def __post_init__(self):
        total = self.kept + self.dropped_short + self.dropped_long + self.dropped_missing_arg
        if total != self.input_count:
            raise ValueError("dataset stats do not add up")


def _dedupe(values: Iterable[str]) -> tuple[str, ...]:
    seen: list[str] = []
    for v in values:
        if v not in seen:
            seen.append(v)
    return tuple(seen)


def load_patent_records(path: str | Path) -> list[PatentRecord]:
    """JSONL of {"id", "text", "product": [..], "reactants": [..], ...}."""
    records: list[PatentRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", line=lineno)
            for key in ("id", "text"):
                if not isinstance(obj.get(key), str) or not obj[key]:
                    raise ParseError(f"missing or empty {key!r}", line=lineno)
            product = obj.get("product")
            if not isinstance(product, list) or not product:
                raise ParseError("record needs a nonempty 'product' list", line=lineno)
            def str_list(key: str) -> tuple[str, ...]:
                values = obj.get(key, [])
                if not isinstance(values, list) or any(not isinstance(v, str) for v in values):
                    raise ParseError(f"{key!r} must be a list of strings", line=lineno)
                return _dedupe(values)
            records.append(PatentRecord(
                id=obj["id"],
                text=obj["text"],
                product=str_list("product"),
                reactants=str_list("reactants"),
                catalysts=str_list("catalysts"),
                solvents=str_list("solvents"),
            ))
    return records


def filter_patent_records(
    records: Iterable[PatentRecord],
) -> tuple[list[PatentRecord], DatasetStats]:
    """Keep records of 8..256 words whose every argument occurs in the text.

    Checked in order: too short, too long, missing argument.
    """
    kept: list[PatentRecord] = []
    short = long = missing = 0
    total = 0
    for rec in records:
        total += 1
        words = len(rec.text.split())
        if words < 8:
            short += 1
            continue
        if words > 256:
            long += 1
            continue
        haystack = rec.text.lower()
        args = list(rec.product) + list(rec.reactants) + list(rec.catalysts) + list(rec.solvents)
        if any(a.lower() not in haystack for a in args):
            missing += 1
            continue
        kept.append(rec)
    stats = DatasetStats(
        input_count=total,
        kept=len(kept),
        dropped_short=short,
        dropped_long=long,
        dropped_missing_arg=missing,
    )
    return kept, stats


def patent_to_qa(kept: Iterable[PatentRecord]) -> list[QAExample]:
    """One product example per record, plus per-product conditioned examples
    for reactant, catalyst, and solvent; empty role lists teach "None"."""
    examples: list[QAExample] = []
    role_values = {
        "reactant": lambda r: r.reactants,
        "catalyst": lambda r: r.catalysts,
        "solvent": lambda r: r.solvents,
    }
    for rec in kept:
        examples.append(QAExample(
            question=question_for_role(PRODUCT),
            context=rec.text,
            answers=rec.product,
            role=PRODUCT,
            doc_id=rec.id,
        ))
        for product in rec.product:
            for role in KNOWLEDGE_ROLES[1:]:
                examples.append(QAExample(
                    question=question_for_role(role, product),
                    context=rec.text,
                    answers=role_values[role](rec),
                    role=role,
                    doc_id=rec.id,
                    condition_product=product,
                ))
    return examples


def save_qa_file(examples: Iterable[QAExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps({
                "question": ex.question,
                "context": ex.context,
                "answers": list(ex.answers),
                "role": ex.role,
                "doc_id": ex.doc_id,
                "condition_product": ex.condition_product,
            }, sort_keys=True) + "\n")


def load_qa_file(path: str | Path) -> list[QAExample]:
    examples: list[QAExample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            try:
                examples.append(QAExample(
                    question=obj["question"],
                    context=obj["context"],
                    answers=tuple(obj["answers"]),
                    role=obj["role"],
                    doc_id=obj["doc_id"],
                    condition_product=obj.get("condition_product"),
                ))
            except (KeyError, TypeError) as exc:
                raise ParseError(f"malformed QA record: {exc}", line=lineno) from exc
    return examples
