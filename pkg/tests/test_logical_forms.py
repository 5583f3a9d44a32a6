import json

import numpy as np
import pytest

from openvocab.errors import ParseError
from openvocab.logical_forms import (
    ADJ,
    ENTITY,
    NOUN,
    OTHER,
    POSS,
    PREP,
    AnnotatedSentence,
    LogicalForm,
    Mention,
    Predicate,
    PredicateInstance,
    Var,
    extract_instances,
    filter_rare_predicates,
    parse_query,
    read_corpus,
    read_queries,
    write_instances,
)


def sentence(tokens, mentions):
    return AnnotatedSentence(tokens, [Mention(*m) for m in mentions])


def as_tuples(instances):
    return [(i.predicate.name, i.predicate.arity, i.args) for i in instances]


class TestExtraction:
    def test_italian_architect_palladio(self):
        s = sentence(
            [("Italian", ENTITY), ("architect", NOUN), ("Andrea", ENTITY), ("Palladio", ENTITY)],
            [(0, 1, "Italy"), (2, 4, "Palladio")],
        )
        assert as_tuples(extract_instances(s)) == [
            ("architect", 1, ("Palladio",)),
            ("architect_N/N", 2, ("Italy", "Palladio")),
        ]

    def test_multiword_compound_concatenates(self):
        s = sentence(
            [("Illinois", ENTITY), ("attorney", NOUN), ("general", NOUN), ("Lisa", ENTITY), ("Madigan", ENTITY)],
            [(0, 1, "Illinois"), (3, 5, "LisaMadigan")],
        )
        names = {i.predicate.name for i in extract_instances(s)}
        assert "attorney_general_N/N" in names

    def test_appositive_preposition(self):
        s = sentence(
            [
                ("Barack", ENTITY),
                ("Obama", ENTITY),
                (",", OTHER),
                ("president", NOUN),
                ("of", PREP),
                ("the", OTHER),
                ("U.S.", ENTITY),
            ],
            [(0, 2, "BarackObama"), (6, 7, "U.S.")],
        )
        assert ("president_of", 2, ("BarackObama", "U.S.")) in as_tuples(extract_instances(s))

    def test_possessive_appositive(self):
        s = sentence(
            [("Rome", ENTITY), (",", OTHER), ("Italy", ENTITY), ("'s", POSS), ("capital", NOUN)],
            [(0, 1, "Rome"), (2, 3, "Italy")],
        )
        assert ("'s_capital", 2, ("Italy", "Rome")) in as_tuples(extract_instances(s))

    def test_possessive_direct(self):
        s = sentence(
            [("Italy", ENTITY), ("'s", POSS), ("capital", NOUN), ("Rome", ENTITY)],
            [(0, 1, "Italy"), (3, 4, "Rome")],
        )
        got = as_tuples(extract_instances(s))
        assert ("'s_capital", 2, ("Italy", "Rome")) in got
        assert ("capital", 1, ("Rome",)) in got  # noun directly governs Rome

    def test_no_pattern_yields_empty(self):
        s = sentence([("hello", OTHER), ("world", OTHER)], [])
        assert extract_instances(s) == []

    def test_three_mentions_pair_adjacent_only(self):
        s = sentence(
            [("A", ENTITY), ("chief", NOUN), ("B", ENTITY), ("rival", NOUN), ("C", ENTITY)],
            [(0, 1, "a"), (2, 3, "b"), (4, 5, "c")],
        )
        rels = [t for t in as_tuples(extract_instances(s)) if t[1] == 2]
        assert ("chief_N/N", 2, ("a", "b")) in rels
        assert ("rival_N/N", 2, ("b", "c")) in rels
        assert not any(t[2] == ("a", "c") for t in rels)

    def test_names_are_lowercased(self):
        s = sentence(
            [("French", ENTITY), ("Newspaper", NOUN), ("LeMonde", ENTITY)],
            [(0, 1, "France"), (2, 3, "LeMonde")],
        )
        names = {i.predicate.name for i in extract_instances(s)}
        assert names == {"newspaper", "newspaper_N/N"}

    def test_determinism(self):
        s = sentence(
            [("Italian", ENTITY), ("architect", NOUN), ("Palladio", ENTITY)],
            [(0, 1, "Italy"), (2, 3, "Palladio")],
        )
        assert extract_instances(s) == extract_instances(s)

    def test_naming_rule_property(self):
        # k >= 1 noun/adjective tokens between mentions -> joined, suffixed name
        rng = np.random.default_rng(17)
        words = ["alpha", "Beta", "gamma", "Delta", "epsilon"]
        for _ in range(50):
            k = int(rng.integers(1, 5))
            middle = [words[int(rng.integers(len(words)))] for _ in range(k)]
            classes = [NOUN if rng.random() < 0.5 else ADJ for _ in range(k)]
            tokens = [("E1", ENTITY)] + list(zip(middle, classes)) + [("E2", ENTITY)]
            s = sentence(tokens, [(0, 1, "e1"), (k + 1, k + 2, "e2")])
            rels = [t for t in as_tuples(extract_instances(s)) if t[1] == 2]
            expected = "_".join(w.lower() for w in middle) + "_N/N"
            assert (expected, 2, ("e1", "e2")) in rels

    def test_invalid_sentence_rejected(self):
        bad = sentence([("x", ENTITY)], [])  # ENTITY token outside any mention
        with pytest.raises(ParseError):
            extract_instances(bad)
        overlapping = sentence(
            [("a", ENTITY), ("b", ENTITY)], [(0, 2, "ab"), (1, 2, "b")]
        )
        with pytest.raises(ParseError):
            extract_instances(overlapping)


def make_instances(spec):
    out = []
    for name, arity, n in spec:
        predicate = Predicate(name, arity)
        for i in range(n):
            args = (f"e{i}",) if arity == 1 else (f"e{i}", f"f{i}")
            out.append(PredicateInstance(predicate, args))
    return out


class TestFilterRare:
    def test_five_occurrences_dropped_at_six(self):
        instances = make_instances([("rare", 1, 5), ("common", 1, 6)])
        kept, dropped = filter_rare_predicates(instances, min_count=6)
        assert dropped == {Predicate("rare", 1)}
        assert all(i.predicate.name == "common" for i in kept)
        assert len(kept) == 6

    def test_min_count_one_is_identity(self):
        instances = make_instances([("a", 1, 2), ("b", 2, 1)])
        kept, dropped = filter_rare_predicates(instances, min_count=1)
        assert kept == instances
        assert dropped == set()

    def test_empty_input(self):
        assert filter_rare_predicates([], 6) == ([], set())

    def test_counts_are_per_name_and_arity(self):
        instances = make_instances([("same", 1, 3), ("same", 2, 6)])
        kept, dropped = filter_rare_predicates(instances, min_count=4)
        assert dropped == {Predicate("same", 1)}
        assert {i.predicate.arity for i in kept} == {2}

    def test_idempotent(self):
        instances = make_instances([("a", 1, 5), ("b", 1, 9), ("c", 2, 2)])
        once, _ = filter_rare_predicates(instances, min_count=4)
        twice, dropped_again = filter_rare_predicates(once, min_count=4)
        assert twice == once
        assert dropped_again == set()


class TestParseQuery:
    def test_architect_query(self):
        line = json.dumps(
            {
                "categories": [["architect", "x"]],
                "relations": [["architect_N/N", "Italy", "x"]],
                "blank": "x",
            }
        )
        qid, form = parse_query(line)
        assert qid is None
        assert form.blank == "x"
        assert form.categories == ((Predicate("architect", 1), Var("x")),)
        assert form.relations == ((Predicate("architect_N/N", 2), "Italy", Var("x")),)
        assert form.grounded_entities() == ["Italy"]

    def test_single_category_query(self):
        qid, form = parse_query('{"categories": [["writer", "y"]], "blank": "y"}')
        assert form.relations == ()
        assert form.categories[0][1] == Var("y")

    def test_blank_absent_from_arguments(self):
        line = json.dumps(
            {"categories": [["architect", "Palladio"]], "blank": "x"}
        )
        with pytest.raises(ParseError, match="blank"):
            parse_query(line)

    @pytest.mark.parametrize(
        "line",
        [
            "not json",
            '{"categories": [["a"]], "blank": "x"}',
            '{"relations": [["r", "x"]], "blank": "x"}',
            '{"relations": [["r", "a", "b", "c"]], "blank": "x"}',
            '{"categories": [["a", "x"]]}',
            '{"categories": [["", "x"]], "blank": "x"}',
        ],
    )
    def test_malformed_queries_rejected(self, line):
        with pytest.raises(ParseError):
            parse_query(line)


class TestCorpusIO:
    def test_mixed_records_roundtrip(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        records = [
            {"instance": {"predicate": "architect", "arity": 1, "args": ["Palladio"]}},
            {
                "sentence": {
                    "tokens": [["Italian", ENTITY], ["architect", NOUN], ["Palladio", ENTITY]],
                    "mentions": [[0, 1, "Italy"], [2, 3, "Palladio"]],
                }
            },
        ]
        path.write_text("".join(json.dumps(r) + "\n" for r in records))
        instances = read_corpus(str(path))
        assert as_tuples(instances) == [
            ("architect", 1, ("Palladio",)),
            ("architect", 1, ("Palladio",)),
            ("architect_N/N", 2, ("Italy", "Palladio")),
        ]
        out = tmp_path / "instances.jsonl"
        write_instances(str(out), instances)
        assert as_tuples(read_corpus(str(out))) == as_tuples(instances)

    def test_bad_record_names_line(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"instance": {"predicate": "a", "arity": 1, "args": ["x"]}}\n{"bogus": 1}\n')
        with pytest.raises(ParseError, match="line 2"):
            read_corpus(str(path))

    def test_query_file_requires_ids(self, tmp_path):
        path = tmp_path / "queries.jsonl"
        path.write_text('{"categories": [["a", "x"]], "blank": "x"}\n')
        with pytest.raises(ParseError, match="id"):
            read_queries(str(path))
        path.write_text('{"id": "q1", "categories": [["a", "x"]], "blank": "x"}\n')
        assert [qid for qid, _ in read_queries(str(path))] == ["q1"]
