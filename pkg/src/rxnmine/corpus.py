"""Document ingestion, tokenization, chemical/numeric tagging, and masking.

Every downstream stage consumes the MaskedText produced here: a paragraph's
token sequence with chemical and numeric mentions collapsed into placeholder
items, keeping enough alignment to map any placeholder back to the original
characters.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DuplicateId, OverlappingTags, ParseError

SOURCES = ("journal", "patent", "fixture")

# Copula forms fold to "be" so lemmatized pattern literals match running text.
_COPULA = {"is": "be", "are": "be", "was": "be", "were": "be",
           "been": "be", "being": "be"}

# Integer, decimal, or dash range; optional leading sign.
NUMERIC_RE = re.compile(r"[+-]?\d+(?:\.\d+)?(?:-\d+(?:\.\d+)?)?")

_WORD_RE = re.compile(r"[\w-]+", re.UNICODE)

# Tokens that mark the preceding number as a measurement, never a compound label.
UNIT_TOKENS = frozenset({"%", "°C", "K", "h", "min", "s", "mL", "mg", "equiv"})

# Words whose adjacency licenses a short digit/letter token as a compound label.
CUE_WORDS = frozenset({
    "compound", "product", "of", "afford", "afforded", "obtain", "yield",
    "give", "gave", "to", "with", "treatment",
})

_COMPOUND_LABEL_RE = re.compile(r"\d+[A-Za-z]?")

CHEM_SUFFIXES = (
    "ane", "ene", "yne", "ol", "al", "one", "ide", "ate", "ite", "ium",
    "yl", "oxy", "amine", "amide", "ose",
)

# All 118 element symbols, two-letter symbols first for greedy parsing.
ELEMENT_SYMBOLS = frozenset(
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co "
    "Ni Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb "
    "Te I Xe Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re "
    "Os Ir Pt Au Hg Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es "
    "Fm Md No Lr Rf Db Sg Bh Hs Mt Ds Rg Cn Nh Fl Mc Lv Ts Og".split()
)


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    source: str = "fixture"


@dataclass(frozen=True)
class Token:
    surface: str
    normalized: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class EntityTag:
    kind: str  # "Chem" | "Num"
    token_start: int
    token_end: int  # half-open
    value: str  # covered surfaces, single-space joined

    def __post_init__(self):
        if self.token_end <= self.token_start:
            raise ValueError("empty entity span")


@dataclass(frozen=True)
class MaskItem:
    kind: str  # "word" | "chem" | "num"
    word: str | None = None  # normalized form, word items only
    entity_index: int | None = None  # placeholder items only
    token_index: int | None = None  # word items only


@dataclass
class MaskedText:
    items: list[MaskItem]
    entities: list[EntityTag]
    tokens: list[Token] = field(default_factory=list)
    doc_id: str = ""

    def entity_value(self, entity_index: int) -> str:
        return self.entities[entity_index].value


def normalize_word(surface: str) -> str:
    lower = surface.lower()
    return _COPULA.get(lower, lower)


def tokenize(text: str) -> list[Token]:
    """Split text into tokens with exact character offsets.

    Whitespace separates segments; within a segment, "°C" and "%" are their
    own tokens, numbers (incl. decimals and dash ranges) stay whole, and runs
    of letters/digits/hyphens stay whole so chemical names never split.
    Any other character is a single-character token.
    """
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if text.startswith("°C", i):
            end = i + 2
        elif ch == "%":
            end = i + 1
        else:
            num = NUMERIC_RE.match(text, i)
            word = _WORD_RE.match(text, i)
            num_end = num.end() if num else i
            word_end = word.end() if word else i
            end = max(num_end, word_end)
            if end == i:
                end = i + 1  # punctuation and other symbols
        surface = text[i:end]
        tokens.append(Token(surface, normalize_word(surface), i, end))
        i = end
    return tokens


def _parse_formula(token: str) -> bool:
    """True when the token decomposes entirely into element symbols with
    optional trailing digits (FeCl3, CHCl3, H2O)."""
    if len(token) < 2:
        return False
    i, n = 0, len(token)
    while i < n:
        matched = False
        for width in (2, 1):
            sym = token[i:i + width]
            if sym in ELEMENT_SYMBOLS:
                j = i + width
                while j < n and token[j].isdigit():
                    j += 1
                i = j
                matched = True
                break
        if not matched:
            return False
    return True


def _has_chem_suffix(token: str) -> bool:
    lower = token.lower()
    return any(lower.endswith(s) and len(lower) > len(s) for s in CHEM_SUFFIXES)


def _is_compound_label(surface: str) -> bool:
    return len(surface) <= 4 and _COMPOUND_LABEL_RE.fullmatch(surface) is not None


def tag_entities(tokens: Sequence[Token], gazetteer: Iterable[str] = ()) -> list[EntityTag]:
    """Tag chemical and numeric mentions.

    Gazetteer longest-match wins; remaining tokens go through the numeric
    check (a number followed by a unit is always Num), the formula parser,
    suffix morphology, and the compound-label heuristic.
    """
    gaz_phrases: dict[str, int] = {}  # lowercased phrase -> word count
    for name in gazetteer:
        words = name.lower().split()
        if words:
            gaz_phrases[" ".join(words)] = len(words)
    max_words = max(gaz_phrases.values(), default=0)

    tags: list[EntityTag] = []
    covered = [False] * len(tokens)

    def followed_by_unit(i: int) -> bool:
        return i + 1 < len(tokens) and tokens[i + 1].surface in UNIT_TOKENS

    def near_cue(i: int) -> bool:
        for j in (i - 1, i + 1):
            if 0 <= j < len(tokens) and tokens[j].normalized in CUE_WORDS:
                return True
        return False

    i = 0
    while i < len(tokens):
        for width in range(min(max_words, len(tokens) - i), 0, -1):
            phrase = " ".join(t.surface.lower() for t in tokens[i:i + width])
            if gaz_phrases.get(phrase) == width:
                value = " ".join(t.surface for t in tokens[i:i + width])
                tags.append(EntityTag("Chem", i, i + width, value))
                for k in range(i, i + width):
                    covered[k] = True
                i += width
                break
        else:
            i += 1

    for i, tok in enumerate(tokens):
        if covered[i]:
            continue
        surface = tok.surface
        if NUMERIC_RE.fullmatch(surface):
            if not followed_by_unit(i) and _is_compound_label(surface) and near_cue(i):
                tags.append(EntityTag("Chem", i, i + 1, surface))
            else:
                tags.append(EntityTag("Num", i, i + 1, surface))
        elif _parse_formula(surface):
            tags.append(EntityTag("Chem", i, i + 1, surface))
        elif _has_chem_suffix(surface):
            tags.append(EntityTag("Chem", i, i + 1, surface))
        elif _is_compound_label(surface) and not followed_by_unit(i) and near_cue(i):
            tags.append(EntityTag("Chem", i, i + 1, surface))

    tags.sort(key=lambda t: t.token_start)
    return tags


def mask(tokens: Sequence[Token], tags: Sequence[EntityTag], doc_id: str = "") -> MaskedText:
    """Collapse each tagged entity into a single placeholder item."""
    ordered = sorted(tags, key=lambda t: t.token_start)
    prev_end = 0
    for t in ordered:
        if t.token_start < prev_end or t.token_end > len(tokens):
            raise OverlappingTags(
                f"entity span [{t.token_start}, {t.token_end}) overlaps or exceeds range"
            )
        prev_end = t.token_end

    items: list[MaskItem] = []
    next_tag = 0
    i = 0
    while i < len(tokens):
        if next_tag < len(ordered) and ordered[next_tag].token_start == i:
            tag = ordered[next_tag]
            kind = "chem" if tag.kind == "Chem" else "num"
            items.append(MaskItem(kind=kind, entity_index=next_tag))
            i = tag.token_end
            next_tag += 1
        else:
            items.append(MaskItem(kind="word", word=tokens[i].normalized, token_index=i))
            i += 1
    return MaskedText(items=items, entities=list(ordered), tokens=list(tokens), doc_id=doc_id)


def prepare_document(doc: Document, gazetteer: Iterable[str] = ()) -> MaskedText:
    tokens = tokenize(doc.text)
    tags = tag_entities(tokens, gazetteer)
    return mask(tokens, tags, doc_id=doc.id)


def load_corpus(path: str | Path) -> list[Document]:
    """Read a JSONL corpus: one {"id", "text", "source"} object per line."""
    docs: list[Document] = []
    seen: set[str] = set()
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
            source = obj.get("source", "fixture")
            if source not in SOURCES:
                raise ParseError(f"unknown source {source!r}", line=lineno)
            if obj["id"] in seen:
                raise DuplicateId(obj["id"])
            seen.add(obj["id"])
            docs.append(Document(id=obj["id"], text=obj["text"], source=source))
    return docs


def load_gazetteer(path: str | Path) -> set[str]:
    """One chemical name per line; '#' starts a comment."""
    names: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                names.add(line)
    return names
