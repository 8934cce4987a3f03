"""Pattern DSL, matcher, and frequent n-gram miner.

A pattern is a short sequence of literal words and [Chem]/[Num] placeholders
with exactly one slot marked as the argument (written [Chem!] or [Num!] in
the textual form). Patterns are matched against masked token sequences and
mined from labeled ones.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import MaskedText, normalize_word
from .errors import (
    DataError,
    InvalidRange,
    KindMismatch,
    MultipleArgumentSlots,
    NoArgumentSlot,
    ParseError,
    UnknownRole,
)
from .roles import CHEM_ARG_ROLES, NUM_ARG_ROLES, ROLES

SEED_ORIGIN = "seed"

_SLOT_TEXT = {
    ("chem", False): "[Chem]",
    ("chem", True): "[Chem!]",
    ("num", False): "[Num]",
    ("num", True): "[Num!]",
}
_TEXT_SLOT = {text: key for key, text in _SLOT_TEXT.items()}


@dataclass(frozen=True)
class PatternItem:
    kind: str  # "lit" | "chem" | "num"
    word: str | None = None
    is_argument: bool = False

    def render(self) -> str:
        if self.kind == "lit":
            return self.word or ""
        return _SLOT_TEXT[(self.kind, self.is_argument)]


def literal(word: str) -> PatternItem:
    return PatternItem("lit", word=normalize_word(word))


def chem_slot(is_argument: bool = False) -> PatternItem:
    return PatternItem("chem", is_argument=is_argument)


def num_slot(is_argument: bool = False) -> PatternItem:
    return PatternItem("num", is_argument=is_argument)


@dataclass(frozen=True)
class Pattern:
    role: str
    items: tuple[PatternItem, ...]
    origin: str = SEED_ORIGIN  # "seed" or "enriched:<iteration>"

    @property
    def id(self) -> str:
        digest = hashlib.sha1(f"{self.role}\t{self.render()}".encode()).hexdigest()
        return digest[:12]

    def render(self) -> str:
        return " ".join(item.render() for item in self.items)

    @property
    def argument_offset(self) -> int:
        for i, item in enumerate(self.items):
            if item.is_argument:
                return i
        raise ValueError("pattern has no argument slot")


def parse_pattern(role: str, source_line: str, origin: str = SEED_ORIGIN) -> Pattern:
    """Parse the textual form, e.g. ("product", "conversion of [Chem] to [Chem!]")."""
    if role not in ROLES:
        raise UnknownRole(role)
    items: list[PatternItem] = []
    argument_kind: str | None = None
    n_arguments = 0
    for word in source_line.split():
        slot = _TEXT_SLOT.get(word)
        if slot is None:
            items.append(literal(word))
            continue
        kind, is_arg = slot
        items.append(PatternItem(kind, is_argument=is_arg))
        if is_arg:
            n_arguments += 1
            argument_kind = kind
    if n_arguments == 0:
        raise NoArgumentSlot(f"no [Chem!]/[Num!] slot in {source_line!r}")
    if n_arguments > 1:
        raise MultipleArgumentSlots(f"more than one argument slot in {source_line!r}")
    expected = "chem" if role in CHEM_ARG_ROLES else "num" if role in NUM_ARG_ROLES else None
    if expected is None or argument_kind != expected:
        raise KindMismatch(
            f"role {role!r} cannot take a {argument_kind} argument slot"
        )
    return Pattern(role=role, items=tuple(items), origin=origin)


@dataclass
class PatternSet:
    patterns: list[Pattern] = field(default_factory=list)
    version: int = 0

    def __post_init__(self):
        keys = [(p.role, p.items) for p in self.patterns]
        if len(keys) != len(set(keys)):
            raise DataError("pattern set contains duplicate (role, items)")

    def keys(self) -> set[tuple[str, tuple[PatternItem, ...]]]:
        return {(p.role, p.items) for p in self.patterns}

    def merged(self, new_patterns: Iterable[Pattern]) -> "PatternSet":
        """New set with the additions appended and the version bumped.

        Patterns already present are skipped; the version increments only
        when at least one pattern was actually added.
        """
        existing = self.keys()
        added = [p for p in new_patterns if (p.role, p.items) not in existing]
        if not added:
            return PatternSet(list(self.patterns), self.version)
        return PatternSet(list(self.patterns) + added, self.version + 1)


@dataclass(frozen=True)
class Match:
    doc_id: str
    item_start: int
    pattern_id: str
    argument_entity: int


def match_pattern(pattern: Pattern, masked: MaskedText) -> list[Match]:
    """Every window where the pattern reproduces item-for-item; overlaps kept."""
    matches: list[Match] = []
    items = masked.items
    width = len(pattern.items)
    for start in range(len(items) - width + 1):
        argument_entity = -1
        for offset, pit in enumerate(pattern.items):
            item = items[start + offset]
            if pit.kind == "lit":
                if item.kind != "word" or item.word != pit.word:
                    break
            elif item.kind != pit.kind:
                break
            elif pit.is_argument:
                argument_entity = item.entity_index  # type: ignore[assignment]
        else:
            matches.append(Match(masked.doc_id, start, pattern.id, argument_entity))
    return matches


def match_all(pattern_set: PatternSet, masked: MaskedText) -> list[Match]:
    """Union of all patterns' matches, ordered by pattern then window start."""
    out: list[Match] = []
    for pattern in pattern_set.patterns:
        out.extend(match_pattern(pattern, masked))
    return out


@dataclass(frozen=True)
class MinedCandidate:
    role: str
    items: tuple[PatternItem, ...]
    frequency: int
    sample_doc_ids: tuple[str, ...] = ()

    def render(self) -> str:
        return " ".join(item.render() for item in self.items)

    def as_pattern(self, origin: str) -> Pattern:
        return Pattern(role=self.role, items=self.items, origin=origin)

    @property
    def id(self) -> str:
        return self.as_pattern(SEED_ORIGIN).id


LabeledDoc = tuple[MaskedText, Mapping[str, Sequence[int]]]


def mine_candidates(
    labeled_docs: Iterable[LabeledDoc],
    n_min: int = 2,
    n_max: int = 6,
    allow_any_range: bool = False,
) -> list[MinedCandidate]:
    """Enumerate every n-gram window covering a labeled argument.

    For each labeled entity, every contiguous item window of length n in
    [n_min, n_max] containing the entity's placeholder becomes a candidate:
    the labeled position is the argument slot, other placeholders stay as
    plain slots, words become literals. Identical (role, items) aggregate
    with summed frequency.
    """
    if n_min > n_max or n_min < 1:
        raise InvalidRange(f"bad n-gram range [{n_min}, {n_max}]")
    if (n_min < 2 or n_max > 6) and not allow_any_range:
        raise InvalidRange(
            f"n-gram range [{n_min}, {n_max}] outside [2, 6]; pass allow_any_range to override"
        )

    counts: dict[tuple[str, tuple[PatternItem, ...]], int] = {}
    samples: dict[tuple[str, tuple[PatternItem, ...]], list[str]] = {}

    for masked, labels in labeled_docs:
        position_of = {
            item.entity_index: pos
            for pos, item in enumerate(masked.items)
            if item.entity_index is not None
        }
        n_items = len(masked.items)
        for role in ROLES:
            for entity_index in sorted(labels.get(role, ())):
                pos = position_of.get(entity_index)
                if pos is None:
                    continue
                for n in range(n_min, n_max + 1):
                    lo = max(0, pos - n + 1)
                    hi = min(pos, n_items - n)
                    for start in range(lo, hi + 1):
                        window = []
                        for offset in range(n):
                            item = masked.items[start + offset]
                            if item.kind == "word":
                                window.append(PatternItem("lit", word=item.word))
                            else:
                                window.append(
                                    PatternItem(item.kind, is_argument=start + offset == pos)
                                )
                        key = (role, tuple(window))
                        counts[key] = counts.get(key, 0) + 1
                        seen = samples.setdefault(key, [])
                        if masked.doc_id not in seen and len(seen) < 5:
                            seen.append(masked.doc_id)

    return [
        MinedCandidate(role=role, items=items, frequency=freq,
                       sample_doc_ids=tuple(samples[(role, items)]))
        for (role, items), freq in counts.items()
    ]


def _is_strict_subwindow(small: tuple[PatternItem, ...], big: tuple[PatternItem, ...]) -> bool:
    if len(small) >= len(big):
        return False
    return any(
        big[i:i + len(small)] == small for i in range(len(big) - len(small) + 1)
    )


def dedupe_and_filter(
    candidates: Iterable[MinedCandidate],
    existing: PatternSet,
    min_freq: int = 1,
) -> list[MinedCandidate]:
    """Drop known patterns, rare candidates, and equal-frequency superwindows.

    A candidate is redundant when a surviving shorter candidate of the same
    role and identical frequency occurs as a contiguous sub-window: the longer
    form never matches anything the shorter one does not.
    """
    known = existing.keys()
    kept = [
        c for c in candidates
        if (c.role, c.items) not in known and c.frequency >= min_freq
    ]
    survivors = []
    for cand in kept:
        subsumed = any(
            other.role == cand.role
            and other.frequency == cand.frequency
            and _is_strict_subwindow(other.items, cand.items)
            for other in kept
        )
        if not subsumed:
            survivors.append(cand)
    survivors.sort(key=lambda c: (-c.frequency, len(c.items), c.render(), c.role))
    return survivors


def load_pattern_file(path: str | Path, origin: str = SEED_ORIGIN) -> list[Pattern]:
    """Read "role<TAB>pattern" lines; '#' starts a comment."""
    patterns: list[Pattern] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].rstrip()
            if not line.strip():
                continue
            if "\t" not in line:
                raise ParseError("expected 'role<TAB>pattern'", line=lineno)
            role, _, body = line.partition("\t")
            try:
                patterns.append(parse_pattern(role.strip(), body, origin=origin))
            except DataError as exc:
                raise ParseError(str(exc), line=lineno) from exc
    return patterns


def save_pattern_file(patterns: Sequence[Pattern], path: str | Path) -> None:
    lines = [f"{p.role}\t{p.render()}\n" for p in patterns]
    Path(path).write_text("".join(lines), encoding="utf-8")


def pattern_with_origin(pattern: Pattern, origin: str) -> Pattern:
    return replace(pattern, origin=origin)
