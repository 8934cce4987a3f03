"""Question templating and the reference multi-span extractor.

The extractor scores each candidate mention independently with per-role
logistic regression over sparse indicator features of the masked context.
Returning every candidate above the threshold supports multiple answers; an
empty result encodes "None". The interface is deliberately small so a
heavier question-answering backend can be swapped in behind it.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping

from .corpus import MaskedText
from .errors import (
    EmptyTrainingSet,
    MissingCondition,
    ParseError,
    UntrainedRole,
)
from .normalize import normalize_argument
from .roles import CHEM_ARG_ROLES, NUM_ARG_ROLES, PRODUCT, REACTION_TYPE, ROLES, role_index

if TYPE_CHECKING:
    from .supervision import QAExample

PRODUCT_QUESTION = "What are the products of the chemical reactions in the text?"
_ROLE_TEMPLATE = "If the final product is {product}, what is the {noun} for this chemical reaction?"

ROLE_NOUNS = {
    "reactant": "reactant",
    "catalyst": "catalyst",
    "solvent": "solvent",
    "temperature": "temperature",
    "time": "time",
    "reaction_type": "reaction type",
    "yield": "yield",
}


@dataclass(frozen=True)
class RoleQuestion:
    role: str
    text: str
    condition_product: str | None = None


def question_for_role(role: str, condition_product: str | None = None) -> str:
    """Instantiate the fixed question template for a role.

    Non-product roles require the conditioning product; the product question
    is a fixed string.
    """
    if role == PRODUCT:
        return PRODUCT_QUESTION
    if role not in ROLE_NOUNS:
        raise MissingCondition(f"unknown role {role!r}")
    if condition_product is None:
        raise MissingCondition(f"role {role!r} requires a conditioning product")
    return _ROLE_TEMPLATE.format(product=condition_product, noun=ROLE_NOUNS[role])


def role_question(role: str, condition_product: str | None = None) -> RoleQuestion:
    return RoleQuestion(role, question_for_role(role, condition_product), condition_product)


@dataclass(frozen=True)
class Candidate:
    kind: str  # "Chem" | "Num" | "Lexicon"
    item_index: int
    value: str
    entity_index: int | None = None


@dataclass(frozen=True)
class ReactionTypeLexicon:
    nouns: frozenset[str]
    verb_map: Mapping[str, str]


def _read_data_text(name: str) -> str:
    return resources.files("rxnmine.data").joinpath(name).read_text(encoding="utf-8")


def load_default_lexicon() -> ReactionTypeLexicon:
    nouns = set()
    for line in _read_data_text("reaction_types.txt").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            nouns.add(line)
    verb_map: dict[str, str] = {}
    for line in _read_data_text("verb_noun_map.txt").splitlines():
        line = line.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        verb, _, noun = line.partition("\t")
        verb_map[verb.strip()] = noun.strip()
    return ReactionTypeLexicon(frozenset(nouns), verb_map)


_default_lexicon: ReactionTypeLexicon | None = None


def default_lexicon() -> ReactionTypeLexicon:
    global _default_lexicon
    if _default_lexicon is None:
        _default_lexicon = load_default_lexicon()
    return _default_lexicon


def generate_candidates(
    role: str,
    masked: MaskedText,
    lexicon: ReactionTypeLexicon | None = None,
) -> list[Candidate]:
    """All mentions a role's answer could come from, in document order."""
    out: list[Candidate] = []
    if role in CHEM_ARG_ROLES or role in NUM_ARG_ROLES:
        wanted = "chem" if role in CHEM_ARG_ROLES else "num"
        for pos, item in enumerate(masked.items):
            if item.kind == wanted:
                out.append(Candidate(
                    kind=item.kind.capitalize(),
                    item_index=pos,
                    value=masked.entity_value(item.entity_index),
                    entity_index=item.entity_index,
                ))
        return out
    if role == REACTION_TYPE:
        lex = lexicon or default_lexicon()
        for pos, item in enumerate(masked.items):
            if item.kind != "word":
                continue
            word = item.word or ""
            if word in lex.nouns:
                out.append(Candidate("Lexicon", pos, word))
            elif word in lex.verb_map:
                out.append(Candidate("Lexicon", pos, lex.verb_map[word]))
        return out
    raise MissingCondition(f"unknown role {role!r}")


_CONTEXT_WINDOW = 4
_MAX_NGRAM = 3


def _item_repr(item) -> str:
    if item.kind == "word":
        return item.word or ""
    return "[Chem]" if item.kind == "chem" else "[Num]"


def featurize(
    candidate: Candidate,
    masked: MaskedText,
    condition_product: str | None = None,
) -> dict[str, float]:
    """Sparse indicator features: context n-grams up to 4 items away (with
    direction and offset), position bucket, candidate kind, and conditioning
    product agreement/distance."""
    feats: dict[str, float] = {}
    items = masked.items
    pos = candidate.item_index

    left = [_item_repr(items[i]) for i in range(max(0, pos - _CONTEXT_WINDOW), pos)]
    right = [
        _item_repr(items[i])
        for i in range(pos + 1, min(len(items), pos + 1 + _CONTEXT_WINDOW))
    ]
    for n in range(1, _MAX_NGRAM + 1):
        for gap in range(0, _CONTEXT_WINDOW - n + 1):
            if n + gap <= len(left):
                gram = " ".join(left[len(left) - gap - n:len(left) - gap])
                suffix = f"+{gap}" if gap else ""
                feats[f"L{n}{suffix}:{gram}"] = 1.0
            if n + gap <= len(right):
                gram = " ".join(right[gap:gap + n])
                suffix = f"+{gap}" if gap else ""
                feats[f"R{n}{suffix}:{gram}"] = 1.0

    bucket = ("first", "middle", "last")[min(2, pos * 3 // max(1, len(items)))]
    feats[f"pos:{bucket}"] = 1.0
    feats[f"kind:{candidate.kind}"] = 1.0

    if condition_product is not None:
        cond = normalize_argument(condition_product)
        if normalize_argument(candidate.value) == cond:
            feats["cond:eq"] = 1.0
        mention_positions = [
            i for i, item in enumerate(items)
            if item.kind == "chem"
            and normalize_argument(masked.entity_value(item.entity_index)) == cond
        ]
        if mention_positions:
            dist = min(abs(pos - m) for m in mention_positions)
            if dist <= 2:
                label = str(dist)
            elif dist <= 5:
                label = "3-5"
            else:
                label = "6+"
            feats[f"cond_dist:{label}"] = 1.0
    return feats


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


@dataclass(frozen=True)
class Hyper:
    epochs: int = 5
    learning_rate: float = 0.1
    seed: int = 42


@dataclass
class ExtractorModel:
    weights: dict[str, dict[str, float]] = field(default_factory=dict)
    bias: dict[str, float] = field(default_factory=dict)
    tau: float = 0.5
    hyper: Hyper = field(default_factory=Hyper)

    def score(self, role: str, features: Mapping[str, float]) -> float:
        w = self.weights[role]
        z = self.bias[role]
        for name, value in features.items():
            z += w.get(name, 0.0) * value
        return sigmoid(z)

    @property
    def trained_roles(self) -> set[str]:
        return set(self.weights)


@dataclass(frozen=True)
class AnswerSpan:
    value: str
    score: float
    entity_index: int | None = None


def train(
    examples: Iterable["QAExample"],
    masked_corpus: Mapping[str, MaskedText],
    hyper: Hyper = Hyper(),
    tau: float = 0.5,
    lexicon: ReactionTypeLexicon | None = None,
) -> ExtractorModel:
    """Per-role logistic regression trained by seeded SGD.

    A candidate is positive when its normalized value is in the example's
    answer set; negative otherwise, including every candidate of an
    empty-answer example.
    """
    examples = list(examples)
    if not examples:
        raise EmptyTrainingSet("no training examples")

    instances: dict[str, list[tuple[dict[str, float], int]]] = {}
    for ex in examples:
        masked = masked_corpus[ex.doc_id]
        answer_keys = {normalize_argument(a) for a in ex.answers}
        instances.setdefault(ex.role, [])
        for cand in generate_candidates(ex.role, masked, lexicon):
            label = 1 if normalize_argument(cand.value) in answer_keys else 0
            feats = featurize(cand, masked, ex.condition_product)
            instances[ex.role].append((feats, label))

    model = ExtractorModel(tau=tau, hyper=hyper)
    for role in sorted(instances, key=role_index):
        data = instances[role]
        weights: dict[str, float] = {}
        bias = 0.0
        rng = random.Random(hyper.seed + 7919 * role_index(role))
        order = list(range(len(data)))
        for _ in range(hyper.epochs):
            rng.shuffle(order)
            for idx in order:
                feats, label = data[idx]
                z = bias + sum(weights.get(f, 0.0) * v for f, v in feats.items())
                grad = sigmoid(z) - label
                step = hyper.learning_rate * grad
                for f, v in feats.items():
                    weights[f] = weights.get(f, 0.0) - step * v
                bias -= step
        model.weights[role] = weights
        model.bias[role] = bias
    return model


def predict(
    model: ExtractorModel,
    role: str,
    masked: MaskedText,
    condition_product: str | None = None,
    lexicon: ReactionTypeLexicon | None = None,
) -> list[AnswerSpan]:
    """Every candidate scoring at or above the threshold, in document order."""
    if role not in model.weights:
        raise UntrainedRole(role)
    spans: list[AnswerSpan] = []
    for cand in generate_candidates(role, masked, lexicon):
        score = model.score(role, featurize(cand, masked, condition_product))
        if score >= model.tau:
            spans.append(AnswerSpan(cand.value, score, cand.entity_index))
    return spans


_FORMAT_VERSION = 1


def save_model(model: ExtractorModel, path: str | Path) -> None:
    payload = {
        "format_version": _FORMAT_VERSION,
        "tau": model.tau,
        "hyper": {
            "epochs": model.hyper.epochs,
            "learning_rate": model.hyper.learning_rate,
            "seed": model.hyper.seed,
        },
        "roles": {
            role: {"bias": model.bias[role], "weights": model.weights[role]}
            for role in sorted(model.weights)
        },
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_model(path: str | Path) -> ExtractorModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid model file: {exc.msg}") from exc
    if not isinstance(payload, dict) or payload.get("format_version") != _FORMAT_VERSION:
        raise ParseError("unsupported model format version")
    try:
        hyper = Hyper(
            epochs=int(payload["hyper"]["epochs"]),
            learning_rate=float(payload["hyper"]["learning_rate"]),
            seed=int(payload["hyper"]["seed"]),
        )
        model = ExtractorModel(tau=float(payload["tau"]), hyper=hyper)
        for role, entry in payload["roles"].items():
            if role not in ROLES:
                raise ParseError(f"unknown role {role!r} in model file")
            model.weights[role] = {str(k): float(v) for k, v in entry["weights"].items()}
            model.bias[role] = float(entry["bias"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed model file: {exc}") from exc
    return model
