"""Synthetic corpora with planted cue templates.

The bootstrap fixtures hide 12 cue templates per role behind three tiers:
tier-1 cues co-occur with seed-pattern sentences (same argument value), tier-2
cues co-occur with tier-1 cues in documents that carry no seed cues, and
tier-3 cues likewise hide behind tier-2. Each tier therefore becomes
discoverable exactly one iteration after the previous one was accepted.

Ambiguous contexts ("of X", "( N", "with X", sentence-final chemicals) are
planted on purpose in unlabeled positions so that over-general candidate
patterns score a low precision proxy and get rejected.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from rxnmine.corpus import Document, prepare_document, tag_entities, tokenize
from rxnmine.pipeline import StructuredReaction

PRODUCT_TEMPLATES = {
    1: [
        ("gave [Chem!]", "The reaction mixture gave {C} after standard workup ."),
        ("to yield [Chem!]", "The crude mixture was heated to yield {C} efficiently ."),
        ("afforded [Chem!]", "Treatment with acid afforded {C} in high purity ."),
        ("synthesis of [Chem!]", "This completed the synthesis of {C} smoothly ."),
    ],
    2: [
        ("provided [Chem!]", "Workup provided {C} without further purification ."),
        ("desired [Chem!]", "The desired {C} was collected by filtration ."),
        ("formation of [Chem!]", "We then observed the formation of {C} in the flask ."),
        ("furnished [Chem!]", "The second fraction furnished {C} upon cooling ."),
    ],
    3: [
        ("generated [Chem!]", "The sequence generated {C} directly ."),
        ("delivered [Chem!]", "Chromatography delivered {C} in pure form ."),
        ("leading to [Chem!]", "The route branched leading to {C} rapidly ."),
        ("[Chem!] be formed", "{C} was formed during the second stage ."),
    ],
}

YIELD_TEMPLATES = {
    1: [
        ("at [Num!] % conversion", "The process operated at {N} % conversion throughout ."),
        ("in [Num!] % isolated yield", "The target was secured in {N} % isolated yield ."),
        ("giving [Num!] % yield", "The step proceeded smoothly giving {N} % yield ."),
        ("( [Num!] % by weight )", "The assay returned a value ( {N} % by weight ) here ."),
    ],
    2: [
        ("conversion reached [Num!] %", "The conversion reached {N} % by assay ."),
        ("efficiency of [Num!] %", "The cell showed an efficiency of {N} % under load ."),
        ("recovery of [Num!] %", "Workup gave a recovery of {N} % from the liquor ."),
        ("with [Num!] % purity", "The salt arrived with {N} % purity today ."),
    ],
    3: [
        ("climbed to [Num!] %", "The yield climbed to {N} % after tuning ."),
        ("output of [Num!] %", "The run posted an output of {N} % overnight ."),
        ("( [Num!] % net )", "The summary listed the result ( {N} % net ) for this batch ."),
        ("[Num!] % be achieved", "{N} % was achieved on the second pass ."),
    ],
}

TEMPERATURE_TEMPLATES = {
    1: [
        ("heated to [Num!] °C", "The vessel was heated to {N} °C slowly ."),
        ("( [Num!] °C )", "The block stayed warm ( {N} °C ) for the duration ."),
        ("warmed to [Num!] °C", "The bath was warmed to {N} °C before use ."),
        ("a reaction temperature of [Num!] °C", "We kept a reaction temperature of {N} °C here ."),
    ],
    2: [
        ("cooled to [Num!] °C", "The flask was cooled to {N} °C gradually ."),
        ("temperature reached [Num!] °C", "The core temperature reached {N} °C quickly ."),
        ("maintained near [Num!] °C", "The system was maintained near {N} °C overnight ."),
        ("above [Num!] °C", "The probe stayed above {N} °C during heating ."),
    ],
    3: [
        ("below [Num!] °C", "The chamber remained below {N} °C throughout ."),
        ("set to [Num!] °C", "The oven was set to {N} °C by the timer ."),
        ("around [Num!] °C", "The melt hovered around {N} °C briefly ."),
        ("[Num!] °C be maintained", "{N} °C was maintained until the last hour ."),
    ],
}

TIME_TEMPLATES = {
    1: [
        ("over [Num!] h", "The addition ran over {N} h exactly ."),
        ("within [Num!] h", "The color faded within {N} h completely ."),
        ("lasted [Num!] h", "The second phase lasted {N} h altogether ."),
        ("for [Num!] days", "The slurry rested for {N} days quietly ."),
    ],
    2: [
        ("during [Num!] h", "Bubbles appeared during {N} h of mixing ."),
        ("took [Num!] h", "The fermentation took {N} h to settle ."),
        ("required [Num!] h", "Complete drying required {N} h under vacuum ."),
        ("( [Num!] h )", "The log recorded one window ( {N} h ) for this step ."),
    ],
    3: [
        ("[Num!] h later", "{N} h later the mixture cleared ."),
        ("completed in [Num!] h", "The cycle was completed in {N} h flat ."),
        ("span of [Num!] h", "The test covered a span of {N} h nicely ."),
        ("[Num!] min elapsed", "Only {N} min elapsed before the change ."),
    ],
}

HIDDEN_TEMPLATES = {
    "product": PRODUCT_TEMPLATES,
    "yield": YIELD_TEMPLATES,
    "temperature": TEMPERATURE_TEMPLATES,
    "time": TIME_TEMPLATES,
}

_PRODUCT_SEED_SENTENCES = [
    "Treatment of {R1} with {R2} produced {C} .",
    "{C} was obtained from {R1} in the first step .",
    "The conversion of {R1} to {C} was complete .",
]
_YIELD_SEED_SENTENCES = [
    "The product was isolated in {N} % yield .",
    "A yield of {N} % was recorded .",
]
_TEMPERATURE_SEED_SENTENCES = ["The mixture was heated at {N} °C overnight ."]
_TIME_SEED_SENTENCES = ["The solution was stirred for {N} h before workup ."]

# Distractors: unlabeled chemicals and numbers in contexts that overlap the
# generic fringes of the hidden cues (of/with/to/parenthesis) to dilute them.
_CHEM_DISTRACTORS = [
    "A solution of {X} in toluene was prepared .",
    "The residue was treated with {X} briefly .",
    "Stock {X} was added to {Y} dropwise .",
    "The workers combined {X} and {Y} in the hood .",
]
_NUM_DISTRACTORS = [
    "The flask was charged with {M} mL of toluene .",
    "The archive listed batch {B} for reference .",
    "A reading ( {M} mL ) appeared in the log .",
    "The counter advanced to {BIG} during calibration .",
    "The gauge settled in {BIG} steps .",
]

_PRODUCT_PREFIXES = ["brom", "fluor", "chlor", "benz", "tolu", "phen", "cyclo", "oxal"]
_PRODUCT_SUFFIXES = ["anol", "enone", "anide", "amine", "anose", "ylate"]
_DISTRACTOR_PREFIXES = ["meth", "eth", "prop", "but", "pent", "hex", "hept", "oct"]
_DISTRACTOR_SUFFIXES = ["ylene", "anal", "onium", "oxane"]

LINGUISTIC_ROLES = ("product", "yield", "temperature", "time")


def _name(rng: random.Random, prefixes, suffixes) -> str:
    return rng.choice(prefixes) + rng.choice(suffixes)


@dataclass
class SynthDoc:
    doc: Document
    gold: StructuredReaction | None  # None for background documents


def _reaction_values(rng: random.Random) -> dict[str, str]:
    return {
        "product": _name(rng, _PRODUCT_PREFIXES, _PRODUCT_SUFFIXES),
        "yield": str(rng.randint(10, 98)),
        "temperature": str(rng.randint(100, 199)),
        "time": str(rng.randint(2, 9)),
    }


def _fill(template: str, values: dict[str, str], rng: random.Random) -> str:
    out = template
    replacements = {
        "{C}": values["product"],
        "{N}": values["__num__"] if "__num__" in values else "",
        "{R1}": _name(rng, _DISTRACTOR_PREFIXES, _DISTRACTOR_SUFFIXES),
        "{R2}": _name(rng, _DISTRACTOR_PREFIXES, _DISTRACTOR_SUFFIXES),
        "{X}": _name(rng, _DISTRACTOR_PREFIXES, _DISTRACTOR_SUFFIXES),
        "{Y}": _name(rng, _DISTRACTOR_PREFIXES, _DISTRACTOR_SUFFIXES),
        "{M}": str(rng.randint(300, 399)),
        "{B}": str(rng.randint(400, 499)),
        "{BIG}": str(rng.randint(10000, 99999)),
    }
    for key, value in replacements.items():
        while key in out:
            out = out.replace(key, value, 1)
    return out


def _role_sentence(role: str, tier: int, index: int, values: dict[str, str],
                   rng: random.Random) -> str:
    _, sentence = HIDDEN_TEMPLATES[role][tier][index % 4]
    fill_values = dict(values)
    if role != "product":
        fill_values["__num__"] = values[role]
    return _fill(sentence, fill_values, rng)


def _seed_sentence(role: str, values: dict[str, str], rng: random.Random) -> str:
    options = {
        "product": _PRODUCT_SEED_SENTENCES,
        "yield": _YIELD_SEED_SENTENCES,
        "temperature": _TEMPERATURE_SEED_SENTENCES,
        "time": _TIME_SEED_SENTENCES,
    }[role]
    fill_values = dict(values)
    if role != "product":
        fill_values["__num__"] = values[role]
    return _fill(rng.choice(options), fill_values, rng)


def _gold_for(values: dict[str, str], doc_id: str) -> StructuredReaction:
    return StructuredReaction(
        pairs={
            "product": [values["product"]],
            "yield": [f"{values['yield']} %"],
            "temperature": [f"{values['temperature']} °C"],
            "time": [f"{values['time']} h"],
        },
        source_doc_id=doc_id,
    )


def _flat_templates(role: str) -> list[tuple[str, str]]:
    tiers = HIDDEN_TEMPLATES[role]
    return [pair for tier in (1, 2, 3) for pair in tiers[tier]]


def make_bootstrap_corpus(
    seed: int = 7,
    tier_docs: int = 40,
    background_docs: int = 80,
    heldout_docs: int = 30,
) -> tuple[list[SynthDoc], list[SynthDoc]]:
    """(training split, held-out split) of synthetic reaction paragraphs.

    Product cues are strictly tiered (tier k is anchored by tier k-1, or by
    seed sentences for tier 1) so each bootstrap iteration unlocks one tier.
    Numeric cues all rotate through seed-anchored documents: their variety is
    learned in the first iteration and their discovery is not tier-gated.
    """
    rng = random.Random(seed)
    train: list[SynthDoc] = []

    def num_sentences(role: str, values: dict[str, str], index: int,
                      with_seed: bool) -> list[str]:
        flat = _flat_templates(role)
        out = []
        if with_seed:
            out.append(_seed_sentence(role, values, rng))
        fill_values = dict(values)
        fill_values["__num__"] = values[role]
        for j in (0, 1):
            _, sentence = flat[(2 * index + j) % len(flat)]
            out.append(_fill(sentence, fill_values, rng))
        return out

    def reaction_doc(doc_id: str, product_tiers: tuple[int | None, int], index: int) -> SynthDoc:
        values = _reaction_values(rng)
        sentences: list[str] = []
        low, high = product_tiers
        if low is None:
            sentences.append(_seed_sentence("product", values, rng))
        else:
            sentences.append(_role_sentence("product", low, index, values, rng))
        sentences.append(_role_sentence("product", high, index, values, rng))
        for role in LINGUISTIC_ROLES[1:]:
            sentences.extend(num_sentences(role, values, index, with_seed=low is None))
        sentences.append(_fill(rng.choice(_CHEM_DISTRACTORS), values, rng))
        sentences.append(_fill(rng.choice(_NUM_DISTRACTORS), values, rng))
        rng.shuffle(sentences)
        doc = Document(id=doc_id, text=" ".join(sentences), source="fixture")
        return SynthDoc(doc=doc, gold=_gold_for(values, doc_id))

    for i in range(tier_docs):
        train.append(reaction_doc(f"t1-{i:03d}", (None, 1), i))
    for i in range(tier_docs):
        train.append(reaction_doc(f"t2-{i:03d}", (1, 2), i))
    for i in range(tier_docs):
        train.append(reaction_doc(f"t3-{i:03d}", (2, 3), i))

    for i in range(background_docs):
        values = _reaction_values(rng)
        sentences = [
            _fill(rng.choice(_CHEM_DISTRACTORS), values, rng)
            for _ in range(rng.randint(2, 3))
        ] + [
            _fill(rng.choice(_NUM_DISTRACTORS), values, rng)
            for _ in range(rng.randint(1, 2))
        ]
        rng.shuffle(sentences)
        doc = Document(id=f"bg-{i:03d}", text=" ".join(sentences), source="fixture")
        train.append(SynthDoc(doc=doc, gold=None))

    heldout: list[SynthDoc] = []
    for i in range(heldout_docs):
        values = _reaction_values(rng)
        sentences = []
        for role in LINGUISTIC_ROLES:
            tier = rng.choice([1, 2, 3])
            sentences.append(_role_sentence(role, tier, rng.randrange(4), values, rng))
        sentences.append(_fill(rng.choice(_CHEM_DISTRACTORS), values, rng))
        sentences.append(_fill(rng.choice(_NUM_DISTRACTORS), values, rng))
        rng.shuffle(sentences)
        doc_id = f"ho-{i:03d}"
        doc = Document(id=doc_id, text=" ".join(sentences), source="fixture")
        heldout.append(SynthDoc(doc=doc, gold=_gold_for(values, doc_id)))

    return train, heldout


def hidden_pattern_strings() -> dict[str, list[str]]:
    """role -> the 12 hidden cue patterns planted in the corpus."""
    return {
        role: [pattern for tier in (1, 2, 3) for pattern, _ in tiers[tier]]
        for role, tiers in HIDDEN_TEMPLATES.items()
    }


def check_templates_maskable() -> list[str]:
    """Template literal words that the tagger would swallow (must be empty)."""
    bad: list[str] = []
    for role, tiers in HIDDEN_TEMPLATES.items():
        for tier, pairs in tiers.items():
            for pattern, sentence in pairs:
                probe = sentence.format(C="bromanol", N="42")
                tokens = tokenize(probe)
                tags = tag_entities(tokens)
                tagged = {t.value for t in tags}
                for word in pattern.split():
                    if word.startswith("["):
                        continue
                    if word in tagged:
                        bad.append(f"{role}/{tier}: {word!r} in {pattern!r}")
    return bad


def random_labeled_corpus(n_docs: int, seed: int = 13):
    """Masked documents with planted role labels for mining tests.

    Labels point at known entity indices: chem entities for product, num
    entities for yield/temperature/time, chosen at random.
    """
    rng = random.Random(seed)
    labeled = []
    for i in range(n_docs):
        values = _reaction_values(rng)
        sentences = []
        for role in LINGUISTIC_ROLES:
            tier = rng.choice([1, 2, 3])
            sentences.append(_role_sentence(role, tier, rng.randrange(4), values, rng))
        sentences.append(_fill(rng.choice(_CHEM_DISTRACTORS), values, rng))
        sentences.append(_fill(rng.choice(_NUM_DISTRACTORS), values, rng))
        rng.shuffle(sentences)
        doc = Document(id=f"m-{i:04d}", text=" ".join(sentences))
        masked = prepare_document(doc)
        labels: dict[str, list[int]] = {}
        for idx, tag in enumerate(masked.entities):
            for role in LINGUISTIC_ROLES:
                wanted = values[role] if role != "product" else values["product"]
                if tag.value == wanted and rng.random() < 0.9:
                    labels.setdefault(role, []).append(idx)
        labeled.append((masked, labels))
    return labeled
