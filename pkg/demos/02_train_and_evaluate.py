"""Train the CNN + BiGRU head on the fixture corpus and score the test split.

This is a desk-scale run: hashing encoder, small head, a few hundred
parameter updates. It exercises every stage of the pipeline end to end and
finishes in seconds on one CPU core.

    python demos/02_train_and_evaluate.py
"""

from snprex import load_fixture_corpus
from snprex.corpus import SplitMode, SplitSpec, split_dataset
from snprex.encoders import EncoderKind, EncoderSpec
from snprex.evaluation import (
    aggregate_to_abstract,
    bootstrap_ci,
    evaluate,
    gold_labels,
)
from snprex.head import HeadConfig
from snprex.preprocess import Level, PreprocessConfig, build_instances, corpus_vocab
from snprex.train import TrainConfig, predict, train

# ---------------------------------------------------------------------------
# 1. Corpus -> tokenized instances.

corpus = load_fixture_corpus()
train_c, test_c = split_dataset(corpus, SplitSpec(SplitMode.OFFICIAL))
pre_cfg = PreprocessConfig()
vocab = corpus_vocab(corpus, pre_cfg)
max_len = 32
train_insts = build_instances(train_c, Level.SENTENCE, max_len, pre_cfg, vocab)
test_insts = build_instances(test_c, Level.SENTENCE, max_len, pre_cfg, vocab)
print(f"{len(train_insts)} training / {len(test_insts)} test instances, "
      f"vocabulary size {len(vocab)}")

# ---------------------------------------------------------------------------
# 2. Train. The hashing encoder needs no external assets; swap in
#    EncoderKind.CONTEXTUAL_PRETRAINED with a local model path for the
#    full-scale configuration.

encoder = EncoderSpec(EncoderKind.HASHING, d=64, seed=0)
head_cfg = HeadConfig(F=16, H=16, D1=16, dropout_p=0.5)
train_cfg = TrainConfig(batch_size=8, epochs=40, learning_rate=1e-2,
                        max_len_sentence=max_len, seed=0)
ckpt = train(train_insts, encoder, head_cfg, train_cfg)
for rec in ckpt.history[::10] + ckpt.history[-1:]:
    print(f"  epoch {rec.epoch:3d}  mean loss {rec.mean_loss:.4f}  "
          f"train accuracy {rec.train_accuracy:.3f}")

# ---------------------------------------------------------------------------
# 3. Predict on the held-out documents and score at the sentence level.
#    All three averaging modes are always reported.

preds = predict(ckpt, test_insts, encoder)
golds = gold_labels(test_c)
report = evaluate(preds, golds)
print("\nsentence-level metrics:")
for mode, (p, r, f) in sorted(report.all_modes.items()):
    print(f"  {mode:15s} precision={p:.3f} recall={r:.3f} f1={f:.3f}")

lo, hi = bootstrap_ci(preds, golds, n_resamples=1000, seed=0)
print(f"  F1 95% bootstrap CI: [{lo:.3f}, {hi:.3f}]")

# ---------------------------------------------------------------------------
# 4. Abstract-level view: sentence predictions for the same
#    (document, SNP, phenotype) pair collapse under the any-positive rule.

abs_preds, abs_golds = aggregate_to_abstract(preds, test_c)
abs_report = evaluate(abs_preds, abs_golds, level=Level.ABSTRACT)
print(f"\nabstract-level: {len(abs_preds)} grouped pairs, "
      f"macro F1={abs_report.f1:.3f}")
