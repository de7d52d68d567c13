from __future__ import annotations

import copy

import pytest

from snprex.corpus import (
    CorpusFormat,
    Label,
    MalformedRecord,
    MissingPath,
    MissingSplitHint,
    SplitHint,
    SplitMode,
    SplitSpec,
    corpus_stats,
    parse_corpus,
    serialize_corpus,
    split_dataset,
    validate_corpus,
)

from conftest import make_minimal_corpus, write_native_corpus


def roundtrip(corpus, tmp_path):
    path = tmp_path / "rt.jsonl"
    path.write_bytes(serialize_corpus(corpus))
    return parse_corpus(path, CorpusFormat.CANONICAL_JSONL)


class TestParse:
    def test_missing_path(self, tmp_path):
        with pytest.raises(MissingPath):
            parse_corpus(tmp_path / "nope.jsonl", CorpusFormat.CANONICAL_JSONL)

    def test_empty_directory_rejected(self, tmp_path):
        with pytest.raises((MissingPath, MalformedRecord)):
            parse_corpus(tmp_path, CorpusFormat.SNPPHENA_NATIVE)

    def test_minimal_jsonl_fixture(self, tmp_path):
        corpus = roundtrip(make_minimal_corpus(), tmp_path)
        s = corpus_stats(corpus)
        assert (s.n_documents, s.n_sentences, s.n_candidates,
                s.n_positive, s.n_negative, s.n_neutral) == (1, 1, 1, 1, 0, 0)

    def test_native_directory(self, tmp_path):
        root = write_native_corpus(tmp_path / "native", n_train=2, n_test=1)
        corpus = parse_corpus(root, CorpusFormat.SNPPHENA_NATIVE)
        assert len(corpus.documents) == 3
        hints = {d.id: d.split_hint for d in corpus.documents}
        assert hints["n000"] is SplitHint.TRAIN
        assert hints["n002"] is SplitHint.TEST
        # extra pair attributes survive in extras
        pair = corpus.documents[0].sentences[0].candidates[0]
        assert pair.extras == {"confidence": "weak"}
        assert validate_corpus(corpus).ok

    def test_native_bad_offset_rejected(self, tmp_path):
        root = tmp_path / "native"
        root.mkdir()
        (root / "bad.xml").write_text(
            '<document id="bad"><sentence id="bad.s0" text="short">'
            '<entity id="bad.s0.e0" type="snp" charOffset="0-40" text="short"/>'
            "</sentence></document>"
        )
        with pytest.raises(MalformedRecord):
            parse_corpus(root, CorpusFormat.SNPPHENA_NATIVE)

    def test_parse_deterministic(self, tmp_path, fixture_corpus):
        a = roundtrip(fixture_corpus, tmp_path)
        b = roundtrip(fixture_corpus, tmp_path)
        assert a == b


class TestValidate:
    def test_valid_fixture(self, fixture_corpus):
        report = validate_corpus(fixture_corpus)
        assert report.ok
        assert report.errors == []

    def test_offset_out_of_range(self, minimal_corpus):
        broken = copy.deepcopy(minimal_corpus)
        broken.documents[0].sentences[0].mentions[0].char_end = 999
        report = validate_corpus(broken)
        assert not report.ok
        assert len(report.errors) == 1
        assert "OffsetMismatch" in report.errors[0][1]

    def test_surface_disagreement(self, minimal_corpus):
        broken = copy.deepcopy(minimal_corpus)
        broken.documents[0].sentences[0].mentions[0].surface = "rs999"
        report = validate_corpus(broken)
        assert not report.ok
        assert "OffsetMismatch" in report.errors[0][1]

    def test_label_outside_domain(self, minimal_corpus):
        broken = copy.deepcopy(minimal_corpus)
        broken.documents[0].sentences[0].candidates[0].label = "maybe"
        report = validate_corpus(broken)
        assert not report.ok
        assert any("label" in msg for _, msg in report.errors)


class TestStats:
    def test_fixture_counts(self, fixture_corpus):
        s = corpus_stats(fixture_corpus)
        assert (s.n_documents, s.n_sentences, s.n_candidates,
                s.n_positive, s.n_negative, s.n_neutral) == (12, 60, 52, 24, 16, 12)
        assert s.n_candidates == s.n_positive + s.n_negative + s.n_neutral

    def test_empty_corpus(self):
        from snprex.corpus import Corpus

        s = corpus_stats(Corpus([]))
        assert (s.n_documents, s.n_sentences, s.n_candidates) == (0, 0, 0)

    def test_hand_counted_fixture(self, minimal_corpus):
        # two docs x two candidates: 3 POSITIVE, 1 NEUTRAL, counted by hand
        import copy as _copy

        from snprex.corpus import Corpus, Label

        doc_a = _copy.deepcopy(minimal_corpus.documents[0])
        doc_b = _copy.deepcopy(minimal_corpus.documents[0])
        doc_b.id = "d1"
        for doc in (doc_a, doc_b):
            extra = _copy.deepcopy(doc.sentences[0])
            extra.id = f"{doc.id}.s1"
            for m in extra.mentions:
                m.id = m.id.replace(".s0.", ".s1.")
            for c in extra.candidates:
                c.id = c.id.replace(".s0.", ".s1.")
                c.snp_ref = c.snp_ref.replace(".s0.", ".s1.")
                c.pheno_ref = c.pheno_ref.replace(".s0.", ".s1.")
                c.sentence_ref = extra.id
            doc.sentences.append(extra)
        doc_b.sentences[1].candidates[0].label = Label.NEUTRAL
        corpus = Corpus([doc_a, doc_b])
        s = corpus_stats(corpus)
        assert (s.n_documents, s.n_candidates, s.n_positive, s.n_negative, s.n_neutral) == (2, 4, 3, 0, 1)


class TestSplit:
    def test_official_split(self, fixture_corpus):
        train, test = split_dataset(fixture_corpus, SplitSpec(SplitMode.OFFICIAL))
        assert {d.split_hint for d in train.documents} == {SplitHint.TRAIN}
        assert {d.split_hint for d in test.documents} == {SplitHint.TEST}
        assert len(train.documents) + len(test.documents) == 12

    def test_official_requires_hints(self, minimal_corpus):
        minimal_corpus.documents[0].split_hint = SplitHint.NONE
        with pytest.raises(MissingSplitHint):
            split_dataset(minimal_corpus, SplitSpec(SplitMode.OFFICIAL))

    def test_stratified_zero_fraction(self, fixture_corpus):
        train, test = split_dataset(
            fixture_corpus, SplitSpec(SplitMode.STRATIFIED, test_fraction=0.0, seed=1)
        )
        assert len(train.documents) == 12
        assert test.documents == []

    def test_stratified_deterministic(self, fixture_corpus):
        spec = SplitSpec(SplitMode.STRATIFIED, test_fraction=0.25, seed=7)
        a = split_dataset(fixture_corpus, spec)
        b = split_dataset(fixture_corpus, spec)
        assert [d.id for d in a[0].documents] == [d.id for d in b[0].documents]
        assert [d.id for d in a[1].documents] == [d.id for d in b[1].documents]

    def test_stats_additivity(self, fixture_corpus):
        for spec in (SplitSpec(SplitMode.OFFICIAL),
                     SplitSpec(SplitMode.STRATIFIED, test_fraction=0.3, seed=3)):
            train, test = split_dataset(fixture_corpus, spec)
            assert corpus_stats(train) + corpus_stats(test) == corpus_stats(fixture_corpus)
            train_ids = {d.id for d in train.documents}
            test_ids = {d.id for d in test.documents}
            assert not train_ids & test_ids


class TestSerialize:
    def test_byte_stable(self, minimal_corpus):
        assert serialize_corpus(minimal_corpus) == serialize_corpus(make_minimal_corpus())

    def test_roundtrip_identity(self, fixture_corpus, tmp_path):
        again = roundtrip(fixture_corpus, tmp_path)
        assert again.documents == fixture_corpus.documents
        assert corpus_stats(again) == corpus_stats(fixture_corpus)

    def test_non_ascii_lossless(self, minimal_corpus, tmp_path):
        sent = minimal_corpus.documents[0].sentences[0]
        sent.text = "rs123 raises β-thalassémie risk"
        sent.mentions[1].surface = "β-thalassémie"
        sent.mentions[1].char_end = 13 + len("β-thalassémie")
        assert validate_corpus(minimal_corpus).ok
        again = roundtrip(minimal_corpus, tmp_path)
        assert again.documents == minimal_corpus.documents

    def test_native_roundtrips_through_canonical(self, tmp_path):
        root = write_native_corpus(tmp_path / "native")
        corpus = parse_corpus(root, CorpusFormat.SNPPHENA_NATIVE)
        again = roundtrip(corpus, tmp_path)
        assert again.documents == corpus.documents
