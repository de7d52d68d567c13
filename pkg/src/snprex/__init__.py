"""SNP-phenotype association candidate classification toolkit."""

from importlib import resources
from pathlib import Path

from .corpus import (
    CandidatePair,
    Corpus,
    CorpusFormat,
    CorpusStats,
    Document,
    EntityMention,
    Label,
    MentionKind,
    Sentence,
    SplitHint,
    SplitMode,
    SplitSpec,
    corpus_stats,
    parse_corpus,
    serialize_corpus,
    split_dataset,
    validate_corpus,
)
from .encoders import EmbeddingMatrix, EncoderKind, EncoderSpec, embed, encoder_signature
from .evaluation import (
    Averaging,
    ConfusionCounts,
    MetricsReport,
    aggregate_to_abstract,
    bootstrap_ci,
    confusion,
    evaluate,
    f1,
    gold_labels,
    precision,
    recall,
)
from .head import (
    GruParams,
    HeadConfig,
    HeadParameters,
    bigru_forward,
    conv1d_forward,
    gradient_check,
    gru_cell,
    head_backward,
    head_forward,
    init_head_params,
    maxpool,
)
from .preprocess import (
    Level,
    MarkerScheme,
    PreprocessConfig,
    TokenizedInstance,
    build_instance,
    build_instances,
    build_vocab,
    corpus_vocab,
    encode_labels,
    mark_entities,
    normalize_text,
    tokenize,
)
from .train import (
    AdamState,
    Checkpoint,
    PredictionRecord,
    TrainConfig,
    adam_step,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"


def fixture_corpus_path() -> Path:
    """Path of the bundled canonical-format fixture corpus."""
    return Path(str(resources.files("snprex.data").joinpath("fixture_corpus.jsonl")))


def load_fixture_corpus() -> Corpus:
    return parse_corpus(fixture_corpus_path(), CorpusFormat.CANONICAL_JSONL)
