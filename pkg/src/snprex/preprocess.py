"""Turn labeled candidate pairs into model-ready tokenized instances.

Pipeline per candidate: entity marking -> tokenization -> optional
normalization (lowercase, stopwords, stemming or lemmatization) ->
id mapping with truncation/padding at sentence or abstract granularity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .corpus import CandidatePair, Corpus, EntityMention, Label, Sentence
from .stemming import porter_stem, simple_lemmatize

SNP_OPEN, SNP_CLOSE = "[S1]", "[/S1]"
PHENO_OPEN, PHENO_CLOSE = "[P1]", "[/P1]"
MARKER_TOKENS = (SNP_OPEN, SNP_CLOSE, PHENO_OPEN, PHENO_CLOSE)

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"

_TOKEN_RE = re.compile(r"\[/?[SP]1\]|[\w'-]+|[^\w\s]")


class PreprocessError(Exception):
    pass


class OverlappingMentions(PreprocessError):
    pass


class UnknownPair(PreprocessError):
    pass


class MarkerScheme(str, Enum):
    WRAP_MARKERS = "WRAP_MARKERS"
    NONE = "NONE"


class Level(str, Enum):
    SENTENCE = "SENTENCE"
    ABSTRACT = "ABSTRACT"


class LengthUnit(str, Enum):
    TOKENS = "TOKENS"
    CHARACTERS = "CHARACTERS"


def default_stopwords() -> frozenset[str]:
    text = resources.files("snprex.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def load_stopwords(path: str | Path) -> frozenset[str]:
    """One token per line, '#' comments allowed."""
    words = []
    for line in Path(path).read_text("utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line)
    return frozenset(words)


@dataclass
class PreprocessConfig:
    lowercase: bool = True
    remove_stopwords: bool = True
    stem: bool = True
    lemmatize: bool = False
    stopword_list: frozenset[str] = field(default_factory=default_stopwords)
    marker_scheme: MarkerScheme = MarkerScheme.WRAP_MARKERS
    length_unit: LengthUnit = LengthUnit.TOKENS

    def __post_init__(self):
        if self.stem and self.lemmatize:
            raise ValueError("enable at most one of stem/lemmatize")


@dataclass
class TokenizedInstance:
    candidate_ref: str
    level: Level
    tokens: list[str]
    token_ids: list[int]
    true_length: int
    class_id: int
    document_ref: str


def tokenize(text: str) -> list[str]:
    """Whitespace/punctuation tokenization; marker tokens survive intact."""
    return _TOKEN_RE.findall(text)


def normalize_text(text: str, cfg: PreprocessConfig) -> list[str]:
    """Tokenize then apply the enabled normalization steps in a fixed order:
    lowercase, stopword removal, stemming or lemmatization. Marker tokens
    are never normalized."""
    tokens = tokenize(text)
    out = []
    for tok in tokens:
        if tok in MARKER_TOKENS:
            out.append(tok)
            continue
        if cfg.lowercase:
            tok = tok.lower()
        if cfg.remove_stopwords and tok.lower() in cfg.stopword_list:
            continue
        if cfg.stem:
            tok = porter_stem(tok)
        elif cfg.lemmatize:
            tok = simple_lemmatize(tok)
        out.append(tok)
    return out


def mark_entities(
    sentence_text: str,
    snp: EntityMention,
    pheno: EntityMention,
    scheme: MarkerScheme = MarkerScheme.WRAP_MARKERS,
) -> str:
    """Wrap the target mentions in reserved marker tokens, e.g.
    ``rs123 raises asthma risk`` -> ``[S1] rs123 [/S1] raises [P1] asthma [/P1] risk``.
    """
    if scheme is MarkerScheme.NONE:
        return sentence_text
    spans = sorted(
        [(snp.char_start, snp.char_end, SNP_OPEN, SNP_CLOSE),
         (pheno.char_start, pheno.char_end, PHENO_OPEN, PHENO_CLOSE)]
    )
    if spans[0][1] > spans[1][0]:
        raise OverlappingMentions(
            f"mention spans [{snp.char_start},{snp.char_end}) and "
            f"[{pheno.char_start},{pheno.char_end}) overlap"
        )
    out = []
    cursor = 0
    for start, end, open_tok, close_tok in spans:
        out.append(sentence_text[cursor:start])
        out.append(f"{open_tok} {sentence_text[start:end]} {close_tok}")
        cursor = end
    out.append(sentence_text[cursor:])
    return "".join(out)


def build_vocab(token_lists, extra_tokens: tuple[str, ...] = ()) -> dict[str, int]:
    """PAD=0, UNK=1, the four marker tokens, then sorted unique corpus tokens."""
    vocab = {PAD_TOKEN: 0, UNK_TOKEN: 1}
    for tok in MARKER_TOKENS:
        vocab[tok] = len(vocab)
    seen = set()
    for tokens in token_lists:
        seen.update(tokens)
    for tok in extra_tokens:
        seen.add(tok)
    for tok in sorted(seen):
        if tok not in vocab:
            vocab[tok] = len(vocab)
    return vocab


def encode_labels(label: Label) -> int:
    """Binary merge: POSITIVE is class 1; NEGATIVE and NEUTRAL share class 0."""
    return 1 if label is Label.POSITIVE else 0


def _locate_pair(pair: CandidatePair, corpus: Corpus):
    for doc in corpus.documents:
        for sent in doc.sentences:
            for cand in sent.candidates:
                if cand.id == pair.id:
                    return doc, sent
    raise UnknownPair(pair.id)


def _marked_text(sent: Sentence, pair: CandidatePair, scheme: MarkerScheme) -> str:
    snp = sent.mention_by_id(pair.snp_ref)
    pheno = sent.mention_by_id(pair.pheno_ref)
    if snp is None or pheno is None:
        raise UnknownPair(f"{pair.id}: mentions missing from sentence {sent.id}")
    return mark_entities(sent.text, snp, pheno, scheme)


def _truncate_keeping_markers(tokens: list[str], max_len: int) -> list[str]:
    """Right-truncate; if a marker would be lost, re-center the window on the
    marked span instead."""
    if len(tokens) <= max_len:
        return tokens
    marker_idx = [i for i, t in enumerate(tokens) if t in MARKER_TOKENS]
    if not marker_idx or marker_idx[-1] < max_len:
        return tokens[:max_len]
    first, last = marker_idx[0], marker_idx[-1]
    center = (first + last + 1) // 2
    start = center - max_len // 2
    start = max(0, min(start, len(tokens) - max_len))
    # clamp so the span stays inside the window when it fits at all
    if last - first + 1 <= max_len:
        start = min(start, first)
        start = max(start, last - max_len + 1)
    return tokens[start : start + max_len]


def build_instance(
    pair: CandidatePair,
    corpus: Corpus,
    level: Level,
    max_len: int,
    cfg: PreprocessConfig,
    vocab: dict[str, int],
) -> TokenizedInstance:
    """Produce one padded, id-mapped instance for a candidate pair.

    SENTENCE level uses the owning sentence; ABSTRACT level concatenates all
    sentences of the owning document with the same pair marked in place.
    """
    if max_len < 8:
        raise ValueError("max_len must be at least 8")
    for tok in (PAD_TOKEN, UNK_TOKEN, *MARKER_TOKENS):
        if tok not in vocab:
            raise ValueError(f"vocab lacks reserved token {tok!r}")
    doc, sent = _locate_pair(pair, corpus)
    marked = _marked_text(sent, pair, cfg.marker_scheme)
    if level is Level.ABSTRACT:
        parts = [marked if s.id == sent.id else s.text for s in doc.sentences]
        text = " ".join(parts)
    else:
        text = marked
    if cfg.length_unit is LengthUnit.CHARACTERS and len(text) > max_len:
        text = _truncate_chars_keeping_markers(text, max_len)
    tokens = normalize_text(text, cfg)
    tokens = _truncate_keeping_markers(tokens, max_len)
    true_length = len(tokens)
    pad_id = vocab[PAD_TOKEN]
    unk_id = vocab[UNK_TOKEN]
    token_ids = [vocab.get(t, unk_id) for t in tokens]
    token_ids.extend([pad_id] * (max_len - true_length))
    return TokenizedInstance(
        candidate_ref=pair.id,
        level=level,
        tokens=tokens,
        token_ids=token_ids,
        true_length=true_length,
        class_id=encode_labels(pair.label),
        document_ref=doc.id,
    )


def _truncate_chars_keeping_markers(text: str, max_chars: int) -> str:
    first = len(text)
    last = -1
    for tok in MARKER_TOKENS:
        pos = text.find(tok)
        if pos >= 0:
            first = min(first, pos)
            last = max(last, pos + len(tok))
    if last < 0 or last <= max_chars:
        return text[:max_chars]
    center = (first + last) // 2
    start = max(0, min(center - max_chars // 2, len(text) - max_chars))
    if last - first <= max_chars:
        start = min(start, first)
        start = max(start, last - max_chars)
    return text[start : start + max_chars]


def build_instances(
    corpus: Corpus,
    level: Level,
    max_len: int,
    cfg: PreprocessConfig,
    vocab: dict[str, int],
) -> list[TokenizedInstance]:
    """All candidates of a corpus, in corpus order."""
    return [
        build_instance(pair, corpus, level, max_len, cfg, vocab)
        for _, _, pair in corpus.iter_candidates()
    ]


def corpus_vocab(corpus: Corpus, cfg: PreprocessConfig) -> dict[str, int]:
    """Vocabulary over the normalized, marked candidate texts of a corpus."""
    token_lists = []
    for doc, sent, pair in corpus.iter_candidates():
        marked = _marked_text(sent, pair, cfg.marker_scheme)
        token_lists.append(normalize_text(marked, cfg))
    return build_vocab(token_lists)
