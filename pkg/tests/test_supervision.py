import json

import pytest

from rxnmine.corpus import Document, prepare_document
from rxnmine.errors import ParseError
from rxnmine.patterns import PatternSet, match_pattern, parse_pattern
from rxnmine.supervision import (
    PatentRecord,
    filter_patent_records,
    labels_to_qa,
    load_patent_records,
    load_qa_file,
    patent_to_qa,
    save_qa_file,
    weak_label,
)


def corpus_of(*texts):
    docs = [Document(id=f"d{i}", text=t) for i, t in enumerate(texts)]
    masked = [prepare_document(d, gazetteer={"lithium benzyl oxide"}) for d in docs]
    return docs, masked


PRODUCT_SEEDS = PatternSet([
    parse_pattern("product", "produced [Chem!]"),
    parse_pattern("product", "[Chem!] be obtained"),
    parse_pattern("product", "conversion of [Chem] to [Chem!]"),
])


class TestWeakLabel:
    def test_empty_pattern_set(self):
        _, masked = corpus_of("this produced toluene")
        assert weak_label(masked, PatternSet([])) == []

    def test_basic_product_label(self):
        _, masked = corpus_of("the step produced toluene smoothly")
        labels = weak_label(masked, PRODUCT_SEEDS)
        assert len(labels) == 1
        assert labels[0].role == "product"
        assert labels[0].argument_text == "toluene"

    def test_multiword_entity_labeled_as_unit(self):
        # An enriched-style cue labels the whole gazetteer span at once.
        patterns = PatternSet(
            PRODUCT_SEEDS.patterns + [parse_pattern("product", "afforded the [Chem!]")]
        )
        _, masked = corpus_of(
            "Treatment of 13 with lithium benzyl oxide in THF afforded the dihydroxybenzyl 15"
        )
        gaz_masked = [prepare_document(
            Document(id="d0", text="Treatment of 13 with lithium benzyl oxide in THF "
                                   "afforded the dihydroxybenzyl 15"),
            gazetteer={"lithium benzyl oxide", "dihydroxybenzyl 15"},
        )]
        labels = weak_label(gaz_masked, patterns)
        assert [l.argument_text for l in labels if l.role == "product"] == [
            "dihydroxybenzyl 15"
        ]

    def test_two_patterns_one_entity_single_label(self):
        patterns = PatternSet([
            parse_pattern("product", "produced [Chem!]"),
            parse_pattern("product", "step produced [Chem!]"),
        ])
        _, masked = corpus_of("the step produced toluene")
        labels = weak_label(masked, patterns)
        assert len(labels) == 1
        assert labels[0].pattern_id == patterns.patterns[0].id  # first in set order

    def test_labels_are_pattern_faithful(self):
        patterns = PRODUCT_SEEDS
        _, masked = corpus_of(
            "conversion of methanol to toluene produced ethanol",
            "butanol was obtained",
        )
        by_id = {p.id: p for p in patterns.patterns}
        for label in weak_label(masked, patterns):
            pattern = by_id[label.pattern_id]
            doc = next(m for m in masked if m.doc_id == label.doc_id)
            hits = {m.argument_entity for m in match_pattern(pattern, doc)}
            assert label.argument_entity in hits


class TestLabelsToQa:
    def _labeled_fixture(self, n_pos=10, n_neg_pool=20):
        texts = [f"run {i} produced toluenol cleanly" for i in range(n_pos)]
        texts += [f"background text number {i} with nothing" for i in range(n_neg_pool)]
        docs = [Document(id=f"d{i:03d}", text=t) for i, t in enumerate(texts)]
        masked = [prepare_document(d) for d in docs]
        labels = weak_label(masked, PRODUCT_SEEDS)
        assert len(labels) == n_pos
        return docs, labels

    def test_balanced_negatives(self):
        docs, labels = self._labeled_fixture()
        examples = labels_to_qa(labels, docs, negative_ratio=1.0, seed=1)
        pos = [e for e in examples if e.answers]
        neg = [e for e in examples if not e.answers]
        assert len(pos) == 10
        assert len(neg) == 10
        assert all(e.role == "product" for e in examples)

    def test_zero_ratio_positives_only(self):
        docs, labels = self._labeled_fixture()
        examples = labels_to_qa(labels, docs, negative_ratio=0.0, seed=1)
        assert all(e.answers for e in examples)

    def test_non_product_needs_product_label(self):
        # yield label present, no product label: the example is skipped
        patterns = PatternSet([parse_pattern("yield", "in [Num!] % yield")])
        docs = [Document(id="d0", text="isolated in 85 % yield")]
        masked = [prepare_document(d) for d in docs]
        labels = weak_label(masked, patterns)
        assert len(labels) == 1
        assert labels_to_qa(labels, docs, negative_ratio=0.0, seed=1) == []

    def test_condition_product_attached(self):
        patterns = PatternSet([
            parse_pattern("product", "produced [Chem!]"),
            parse_pattern("yield", "in [Num!] % yield"),
        ])
        docs = [Document(id="d0", text="this produced toluene in 85 % yield")]
        masked = [prepare_document(d) for d in docs]
        examples = labels_to_qa(weak_label(masked, patterns), docs, 0.0, 1)
        by_role = {e.role: e for e in examples}
        assert by_role["product"].condition_product is None
        assert by_role["yield"].condition_product == "toluene"
        assert by_role["yield"].answers == ("85",)
        assert "toluene" in by_role["yield"].question

    def test_answers_are_substrings_of_context(self):
        docs, labels = self._labeled_fixture()
        for ex in labels_to_qa(labels, docs, 1.0, 3):
            for answer in ex.answers:
                assert answer.lower() in ex.context.lower()

    def test_deterministic_with_seed(self):
        docs, labels = self._labeled_fixture()
        a = labels_to_qa(labels, docs, 1.0, 7)
        b = labels_to_qa(labels, docs, 1.0, 7)
        assert a == b
        c = labels_to_qa(labels, docs, 1.0, 8)
        assert {e.doc_id for e in a if not e.answers} != {e.doc_id for e in c if not e.answers}


def record_line(**kw):
    base = {"id": "p1", "text": "words " * 20, "product": ["A"],
            "reactants": [], "catalysts": [], "solvents": []}
    base.update(kw)
    return json.dumps(base)


class TestPatentRecords:
    def test_load_valid(self, tmp_path):
        path = tmp_path / "p.jsonl"
        path.write_text("\n".join(
            record_line(id=f"p{i}") for i in range(3)
        ) + "\n")
        assert [r.id for r in load_patent_records(path)] == ["p0", "p1", "p2"]

    def test_empty_product_rejected(self, tmp_path):
        path = tmp_path / "p.jsonl"
        path.write_text(record_line(product=[]) + "\n")
        with pytest.raises(ParseError) as exc:
            load_patent_records(path)
        assert exc.value.line == 1

    def test_duplicate_strings_deduplicated(self, tmp_path):
        path = tmp_path / "p.jsonl"
        path.write_text(record_line(reactants=["X", "Y", "X"]) + "\n")
        assert load_patent_records(path)[0].reactants == ("X", "Y")


def make_record(id="r", text=None, words=20, product=("prodol",), **kw):
    if text is None:
        filler = ["prodol"] + list(kw.get("reactants", ())) + \
                 list(kw.get("catalysts", ())) + list(kw.get("solvents", ()))
        pad = ["pad"] * max(0, words - len(filler))
        text = " ".join(filler + pad)
    return PatentRecord(id=id, text=text, product=tuple(product), **kw)


class TestFilterPatents:
    def test_short_dropped(self):
        kept, stats = filter_patent_records([make_record(words=7)])
        assert kept == [] and stats.dropped_short == 1

    def test_long_dropped(self):
        kept, stats = filter_patent_records([make_record(words=257)])
        assert kept == [] and stats.dropped_long == 1

    def test_boundaries_kept(self):
        kept, stats = filter_patent_records([make_record(words=8), make_record(words=256)])
        assert stats.kept == 2

    def test_missing_argument_dropped(self):
        rec = make_record(words=100, catalysts=("FeCl3",),
                          text="prodol " + "pad " * 98)
        kept, stats = filter_patent_records([rec])
        assert kept == [] and stats.dropped_missing_arg == 1

    def test_match_is_case_insensitive(self):
        rec = make_record(text="PRODOL " + "pad " * 19)
        kept, stats = filter_patent_records([rec])
        assert stats.kept == 1

    def test_stats_identity_and_brute_force(self):
        records = [
            make_record(id="a", words=7),
            make_record(id="b", words=300),
            make_record(id="c", words=50),
            make_record(id="d", words=100, solvents=("missingol",),
                        text="prodol " + "pad " * 98),
            make_record(id="e", words=8),
        ]
        kept, stats = filter_patent_records(records)
        assert stats.input_count == 5
        assert stats.kept + stats.dropped_short + stats.dropped_long \
            + stats.dropped_missing_arg == stats.input_count

        def oracle_keep(r):
            w = len(r.text.split())
            if not 8 <= w <= 256:
                return False
            args = list(r.product) + list(r.reactants) + list(r.catalysts) + list(r.solvents)
            return all(a.lower() in r.text.lower() for a in args)

        assert [r.id for r in kept] == [r.id for r in records if oracle_keep(r)]


class TestPatentToQa:
    def test_counts_single_product(self):
        rec = make_record(
            text="prodol reactol reactanol catol " + "pad " * 16,
            reactants=("reactol", "reactanol"), catalysts=("catol",),
        )
        examples = patent_to_qa([rec])
        assert len(examples) == 4
        by_role = {e.role: e for e in examples}
        assert by_role["product"].answers == ("prodol",)
        assert by_role["reactant"].answers == ("reactol", "reactanol")
        assert by_role["catalyst"].answers == ("catol",)
        assert by_role["solvent"].answers == ()  # teaches "None"

    def test_counts_two_products(self):
        rec = make_record(
            product=("prodol", "secondol"),
            text="prodol secondol " + "pad " * 18,
        )
        examples = patent_to_qa([rec])
        assert len(examples) == 1 + 2 * 3
        product_examples = [e for e in examples if e.role == "product"]
        assert product_examples[0].answers == ("prodol", "secondol")
        conditions = {e.condition_product for e in examples if e.role != "product"}
        assert conditions == {"prodol", "secondol"}

    def test_empty_input(self):
        assert patent_to_qa([]) == []

    def test_questions_use_templates(self):
        rec = make_record(text="prodol catol " + "pad " * 18, catalysts=("catol",))
        examples = patent_to_qa([rec])
        by_role = {e.role: e for e in examples}
        assert by_role["product"].question == (
            "What are the products of the chemical reactions in the text?"
        )
        assert by_role["catalyst"].question == (
            "If the final product is prodol, what is the catalyst for this chemical reaction?"
        )


class TestQaFiles:
    def test_round_trip(self, tmp_path):
        rec = make_record(text="prodol catol " + "pad " * 18, catalysts=("catol",))
        examples = patent_to_qa([rec])
        path = tmp_path / "qa.jsonl"
        save_qa_file(examples, path)
        assert load_qa_file(path) == examples

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "qa.jsonl"
        path.write_text('{"question": "q"}\n')
        with pytest.raises(ParseError):
            load_qa_file(path)
