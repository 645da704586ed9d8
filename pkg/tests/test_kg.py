import io
import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherekg.kg import (
    HEAD_QUERY,
    MANY_TO_MANY,
    ONE_TO_MANY,
    ONE_TO_ONE,
    TAIL_QUERY,
    KnowledgeGraph,
    TripleParseError,
    Vocabulary,
    build_answer_index,
    classify_relations,
    load_dataset,
    parse_triples,
    write_triples,
)


class TestParseTriples:
    def test_empty_input(self):
        vocab = Vocabulary()
        triples, dups = parse_triples("", vocab)
        assert triples == [] and dups == 0
        assert vocab.n_entities == 0 and vocab.n_relations == 0

    def test_duplicate_line_counted(self, caplog):
        text = "a\tr\tb\nb\tr\tc\na\tr\tb\nc\ts\ta\nd\tr\ta\n"
        vocab = Vocabulary()
        with caplog.at_level(logging.WARNING):
            triples, dups = parse_triples(text, vocab)
        assert len(triples) == 4
        assert dups == 1
        assert "1 duplicate" in caplog.text

    def test_first_seen_ids(self):
        vocab = Vocabulary()
        triples, _ = parse_triples("x\tp\ty\ny\tq\tz\n", vocab)
        assert triples == [(0, 0, 1), (1, 1, 2)]
        assert vocab.entities.names == ["x", "y", "z"]
        assert vocab.relations.names == ["p", "q"]

    def test_crlf(self):
        vocab = Vocabulary()
        triples, _ = parse_triples("x\tp\ty\r\ny\tp\tx\r\n", vocab)
        assert triples == [(0, 0, 1), (1, 0, 0)]
        assert "y" in vocab.entities

    @pytest.mark.parametrize("line", ["a\tb", "a\tb\tc\td", "a b c"])
    def test_malformed_line_number(self, line):
        with pytest.raises(TripleParseError) as exc:
            parse_triples(f"a\tr\tb\n{line}\n", Vocabulary())
        assert exc.value.line_number == 2

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 2), st.integers(0, 6)), max_size=30))
    def test_round_trip(self, raw):
        vocab = Vocabulary()
        text = "".join(f"e{h}\tr{r}\te{t}\n" for h, r, t in raw)
        triples, _ = parse_triples(text, vocab)
        out = io.StringIO()
        write_triples(triples, vocab, out)
        again, dups = parse_triples(out.getvalue(), vocab)
        assert again == triples and dups == 0

    def test_vocab_dump(self):
        vocab = Vocabulary()
        parse_triples("x\tp\ty\n", vocab)
        out = io.StringIO()
        vocab.dump(out)
        assert out.getvalue() == "x\t0\ny\t1\n"


class TestAnswerIndex:
    def test_two_triples(self):
        idx = build_answer_index([(0, 0, 1), (0, 0, 2)], [], [])
        assert idx[(TAIL_QUERY, 0, 0)] == {1, 2}
        assert idx[(HEAD_QUERY, 1, 0)] == {0}
        assert idx[(HEAD_QUERY, 2, 0)] == {0}

    def test_self_loop(self):
        idx = build_answer_index([(0, 0, 0)])
        assert idx[(TAIL_QUERY, 0, 0)] == {0}
        assert idx[(HEAD_QUERY, 0, 0)] == {0}

    def test_empty(self):
        assert build_answer_index([], [], []) == {}

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 2), st.integers(0, 5)), min_size=1, max_size=20),
           st.lists(st.tuples(st.integers(0, 5), st.integers(0, 2), st.integers(0, 5)), max_size=10))
    def test_matches_brute_force(self, train, test):
        kg = KnowledgeGraph.from_ids(train, test=test, n_entities=6, n_relations=3)
        every = set(train) | set(test)
        for h in range(6):
            for r in range(3):
                assert kg.answers(TAIL_QUERY, h, r) == {t for hh, rr, t in every if hh == h and rr == r}
                assert kg.answers(HEAD_QUERY, h, r) == {hh for hh, rr, t in every if t == h and rr == r}
        for h, r, t in test:
            assert t in kg.answers(TAIL_QUERY, h, r)
            assert h in kg.answers(HEAD_QUERY, t, r)


class TestClassifyRelations:
    def test_one_to_many_threshold(self):
        train = [(0, 0, 1), (0, 0, 2), (3, 0, 4)]
        (cat,) = classify_relations(train, 1, 1.4)
        assert cat.tails_per_head == pytest.approx(1.5)
        assert cat.heads_per_tail == pytest.approx(1.0)
        assert cat.category == ONE_TO_MANY
        assert classify_relations(train, 1, 1.6)[0].category == ONE_TO_ONE

    def test_single_fact(self):
        (cat,) = classify_relations([(0, 0, 1)], 1)
        assert (cat.tails_per_head, cat.heads_per_tail, cat.category) == (1.0, 1.0, ONE_TO_ONE)

    def test_complete_bipartite(self):
        train = [(h, 0, t) for h in range(3) for t in range(3, 6)]
        (cat,) = classify_relations(train, 1)
        assert (cat.tails_per_head, cat.heads_per_tail) == (3.0, 3.0)
        assert cat.category == MANY_TO_MANY

    def test_absent_relation_flagged(self):
        cats = classify_relations([(0, 0, 1)], 2)
        assert cats[1].absent and cats[1].category == ONE_TO_ONE and cats[1].tails_per_head == 0

    def test_counts_sum_to_relations(self):
        train = [(0, 0, 1), (0, 0, 2), (1, 1, 0), (2, 1, 0), (0, 2, 0)]
        cats = classify_relations(train, 4)
        assert len(cats) == 4

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            classify_relations([], 0, 0.0)


class TestLoadDataset:
    def test_toy(self, toy_dir):
        kg = load_dataset(str(toy_dir))
        assert kg.n_entities == 4 and kg.n_relations == 2
        assert len(kg.train) == 5 and len(kg.valid) == 1 and len(kg.test) == 1
        a, likes, d = kg.vocab.entities.id("a"), kg.vocab.relations.id("likes"), kg.vocab.entities.id("d")
        assert d in kg.answers(TAIL_QUERY, a, likes)

    def test_missing_eval_splits(self, tmp_path):
        (tmp_path / "train.txt").write_text("a\tr\tb\n")
        kg = load_dataset(str(tmp_path))
        assert kg.valid == [] and kg.test == []

    def test_entities_only_in_test_admitted(self, tmp_path):
        (tmp_path / "train.txt").write_text("a\tr\tb\n")
        (tmp_path / "test.txt").write_text("a\ts\tz\n")
        kg = load_dataset(str(tmp_path))
        assert "z" in kg.vocab.entities and kg.n_relations == 2

    def test_missing_train(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(str(tmp_path))

    def test_digest_stable(self, toy_dir):
        assert load_dataset(str(toy_dir)).vocab.digest() == load_dataset(str(toy_dir)).vocab.digest()
        assert len(load_dataset(str(toy_dir)).vocab.digest()) == 16
