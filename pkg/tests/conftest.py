from __future__ import annotations

import numpy as np
import pytest

from snprex import load_fixture_corpus
from snprex.corpus import (
    CandidatePair,
    Corpus,
    Document,
    EntityMention,
    Label,
    MentionKind,
    Sentence,
    SplitHint,
)
from snprex.encoders import EmbeddingMatrix
from snprex.head import HeadConfig, init_head_params


@pytest.fixture(scope="session")
def fixture_corpus() -> Corpus:
    return load_fixture_corpus()


def make_minimal_corpus() -> Corpus:
    """One document, one sentence, one POSITIVE pair."""
    text = "rs123 raises asthma risk"
    sent = Sentence(
        id="d0.s0",
        text=text,
        mentions=[
            EntityMention("d0.s0.e0", MentionKind.SNP, "rs123", 0, 5, "rs123"),
            EntityMention("d0.s0.e1", MentionKind.PHENOTYPE, "asthma", 13, 19, "asthma"),
        ],
        candidates=[
            CandidatePair("d0.s0.p0", "d0.s0.e0", "d0.s0.e1", Label.POSITIVE, "d0.s0"),
        ],
    )
    return Corpus([Document("d0", title="minimal", sentences=[sent], split_hint=SplitHint.TRAIN)])


@pytest.fixture
def minimal_corpus() -> Corpus:
    return make_minimal_corpus()


@pytest.fixture
def tiny_cfg() -> HeadConfig:
    return HeadConfig(k=3, F=2, H=2, D1=3, dropout_p=0.0)


def random_embedding(L: int, d: int, true_length: int, rng: np.random.Generator) -> EmbeddingMatrix:
    values = np.zeros((L, d))
    values[:true_length] = rng.standard_normal((true_length, d))
    return EmbeddingMatrix(values, true_length)


@pytest.fixture
def tiny_setup(tiny_cfg):
    rng = np.random.default_rng(0)
    params = init_head_params(tiny_cfg, d=4, seed=0)
    E = random_embedding(L=6, d=4, true_length=5, rng=rng)
    return params, E, tiny_cfg


NATIVE_DOC_TEMPLATE = """<document id="{doc_id}" title="{title}">
  <sentence id="{doc_id}.s0" text="rs111 is linked to migraine onset">
    <entity id="{doc_id}.s0.e0" type="snp" charOffset="0-4" text="rs111"/>
    <entity id="{doc_id}.s0.e1" type="phenotype" charOffset="19-26" text="migraine"/>
    <pair id="{doc_id}.s0.p0" e1="{doc_id}.s0.e0" e2="{doc_id}.s0.e1" relation="{label}" confidence="weak"/>
  </sentence>
</document>
"""


def write_native_corpus(root, n_train: int = 2, n_test: int = 1):
    """Create a small native-format corpus directory with train/test subdirs."""
    labels = ["positive", "negative", "neutral"]
    (root / "train").mkdir(parents=True)
    (root / "test").mkdir(parents=True)
    idx = 0
    for sub, count in (("train", n_train), ("test", n_test)):
        for _ in range(count):
            doc_id = f"n{idx:03d}"
            (root / sub / f"{doc_id}.xml").write_text(
                NATIVE_DOC_TEMPLATE.format(doc_id=doc_id, title=f"native {idx}",
                                           label=labels[idx % 3]),
                encoding="utf-8",
            )
            idx += 1
    return root
