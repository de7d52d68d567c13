"""Walk through the corpus layer: parse, validate, inspect, split, round-trip.

Run from the repository root after installing the package:

    python demos/01_corpus_walkthrough.py
"""

from snprex import load_fixture_corpus
from snprex.corpus import (
    CorpusFormat,
    SplitMode,
    SplitSpec,
    corpus_stats,
    parse_corpus,
    serialize_corpus,
    split_dataset,
    validate_corpus,
)
from snprex.preprocess import PreprocessConfig, build_instance, corpus_vocab, Level

# ---------------------------------------------------------------------------
# 1. Load the bundled fixture corpus (canonical JSONL format).

corpus = load_fixture_corpus()
stats = corpus_stats(corpus)
print("corpus statistics:")
print(f"  documents : {stats.n_documents}")
print(f"  sentences : {stats.n_sentences}")
print(f"  candidates: {stats.n_candidates} "
      f"(positive={stats.n_positive}, negative={stats.n_negative}, "
      f"neutral={stats.n_neutral})")

# ---------------------------------------------------------------------------
# 2. Validation checks every structural invariant: character offsets match
#    the recorded surface forms, labels are in-domain, references resolve.

report = validate_corpus(corpus)
print(f"\nvalidation: ok={report.ok}, errors={len(report.errors)}, "
      f"warnings={len(report.warnings)}")

# ---------------------------------------------------------------------------
# 3. Look at one annotated sentence and its candidate pairs.

doc = corpus.documents[0]
sent = doc.sentences[0]
print(f"\ndocument {doc.id!r}: {doc.title}")
print(f"sentence {sent.id!r}: {sent.text!r}")
for m in sent.mentions:
    print(f"  mention {m.id}: kind={m.kind.value} surface={m.surface!r} "
          f"span=[{m.char_start},{m.char_end})")
for pair in sent.candidates:
    print(f"  candidate {pair.id}: label={pair.label.value}")

# ---------------------------------------------------------------------------
# 4. A candidate becomes a classifier input by wrapping the two mentions in
#    reserved marker tokens, then tokenizing and padding.

cfg = PreprocessConfig()
vocab = corpus_vocab(corpus, cfg)
inst = build_instance(sent.candidates[0], corpus, Level.SENTENCE, 70, cfg, vocab)
print(f"\ntokenized instance for {inst.candidate_ref}:")
print(f"  tokens      : {inst.tokens}")
print(f"  true length : {inst.true_length} (padded to {len(inst.token_ids)})")
print(f"  class id    : {inst.class_id}  (1 = positive association)")

# ---------------------------------------------------------------------------
# 5. The official train/test split is document-granular, driven by the
#    split hints recorded on each document.

train_c, test_c = split_dataset(corpus, SplitSpec(SplitMode.OFFICIAL))
print(f"\nofficial split: {len(train_c.documents)} train documents, "
      f"{len(test_c.documents)} test documents")

# ---------------------------------------------------------------------------
# 6. Serialization is canonical: parse -> serialize -> parse is the identity
#    and the byte stream is stable across runs.

blob = serialize_corpus(corpus)
import pathlib
import tempfile

with tempfile.TemporaryDirectory() as tmp:
    path = pathlib.Path(tmp) / "roundtrip.jsonl"
    path.write_bytes(blob)
    again = parse_corpus(path, CorpusFormat.CANONICAL_JSONL)
print(f"\nround trip identical: {again.documents == corpus.documents}")
print(f"serialization byte-stable: {serialize_corpus(again) == blob}")
