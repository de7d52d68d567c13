"""Corpus model and I/O for SNP-phenotype association candidates.

Two on-disk formats are supported:

* ``CANONICAL_JSONL`` -- the package's interchange format, one document per
  line (schema tag ``snprex-corpus/1``, see `serialize_corpus`).
* ``SNPPHENA_NATIVE`` -- a directory of per-abstract XML files in the
  DDI-corpus style (``<document><sentence><entity/><pair/>``), with optional
  ``train``/``test`` subdirectories providing the official split hint.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "snprex-corpus/1"


class CorpusError(Exception):
    """Base class for corpus I/O and consistency errors."""


class MissingPath(CorpusError):
    pass


class MalformedRecord(CorpusError):
    def __init__(self, source: str, location: str, reason: str):
        self.source = source
        self.location = location
        self.reason = reason
        super().__init__(f"{source} [{location}]: {reason}")


class OffsetMismatch(CorpusError):
    def __init__(self, mention_id: str, detail: str = ""):
        self.mention_id = mention_id
        super().__init__(f"offset mismatch for mention {mention_id!r} {detail}".rstrip())


class MissingSplitHint(CorpusError):
    pass


class MentionKind(str, Enum):
    SNP = "SNP"
    PHENOTYPE = "PHENOTYPE"


class Label(str, Enum):
    POSITIVE = "POSITIVE"
    NEGATIVE = "NEGATIVE"
    NEUTRAL = "NEUTRAL"


class SplitHint(str, Enum):
    TRAIN = "TRAIN"
    TEST = "TEST"
    NONE = "NONE"


class CorpusFormat(str, Enum):
    SNPPHENA_NATIVE = "SNPPHENA_NATIVE"
    CANONICAL_JSONL = "CANONICAL_JSONL"


class SplitMode(str, Enum):
    OFFICIAL = "OFFICIAL"
    STRATIFIED = "STRATIFIED"


@dataclass
class EntityMention:
    id: str
    kind: MentionKind
    surface: str
    char_start: int
    char_end: int
    normalized: str | None = None


@dataclass
class CandidatePair:
    id: str
    snp_ref: str
    pheno_ref: str
    label: Label
    sentence_ref: str
    extras: dict[str, str] = field(default_factory=dict)


@dataclass
class Sentence:
    id: str
    text: str
    mentions: list[EntityMention] = field(default_factory=list)
    candidates: list[CandidatePair] = field(default_factory=list)

    def mention_by_id(self, mention_id: str) -> EntityMention | None:
        for m in self.mentions:
            if m.id == mention_id:
                return m
        return None


@dataclass
class Document:
    id: str
    title: str | None = None
    sentences: list[Sentence] = field(default_factory=list)
    split_hint: SplitHint = SplitHint.NONE


@dataclass
class Provenance:
    source: str
    format: CorpusFormat
    schema_version: str = SCHEMA_VERSION


@dataclass
class Corpus:
    documents: list[Document]
    provenance: Provenance = field(
        compare=False,
        default_factory=lambda: Provenance("<memory>", CorpusFormat.CANONICAL_JSONL),
    )

    def document_by_id(self, doc_id: str) -> Document | None:
        for d in self.documents:
            if d.id == doc_id:
                return d
        return None

    def iter_candidates(self):
        """Yield (document, sentence, pair) triples in corpus order."""
        for doc in self.documents:
            for sent in doc.sentences:
                for pair in sent.candidates:
                    yield doc, sent, pair


@dataclass
class CorpusStats:
    n_documents: int
    n_sentences: int
    n_candidates: int
    n_positive: int
    n_negative: int
    n_neutral: int

    def __add__(self, other: "CorpusStats") -> "CorpusStats":
        return CorpusStats(
            self.n_documents + other.n_documents,
            self.n_sentences + other.n_sentences,
            self.n_candidates + other.n_candidates,
            self.n_positive + other.n_positive,
            self.n_negative + other.n_negative,
            self.n_neutral + other.n_neutral,
        )


@dataclass
class ValidationReport:
    errors: list[tuple[str, str]] = field(default_factory=list)
    warnings: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass
class SplitSpec:
    mode: SplitMode
    test_fraction: float = 0.2
    seed: int = 0


# ---------------------------------------------------------------------------
# Parsing


def parse_corpus(path: str | Path, format: CorpusFormat) -> Corpus:
    """Parse a corpus from disk. Deterministic: documents sorted by id for
    the native directory layout, file order for JSONL."""
    path = Path(path)
    if not path.exists():
        raise MissingPath(str(path))
    if format is CorpusFormat.CANONICAL_JSONL:
        corpus = _parse_jsonl(path)
    elif format is CorpusFormat.SNPPHENA_NATIVE:
        corpus = _parse_native(path)
    else:
        raise ValueError(f"unknown corpus format: {format!r}")
    report = validate_corpus(corpus)
    if not report.ok:
        doc_id, msg = report.errors[0]
        raise MalformedRecord(str(path), doc_id, msg)
    return corpus


def _parse_jsonl(path: Path) -> Corpus:
    if path.is_dir():
        raise MalformedRecord(str(path), "-", "expected a JSONL file, got a directory")
    documents = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(str(path), f"line {lineno}", f"invalid JSON: {exc}") from exc
            documents.append(_document_from_obj(obj, str(path), lineno))
    if not documents:
        raise MalformedRecord(str(path), "-", "no documents found")
    return Corpus(documents, Provenance(str(path), CorpusFormat.CANONICAL_JSONL))


def _document_from_obj(obj: dict, source: str, lineno: int) -> Document:
    where = f"line {lineno}"
    schema = obj.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise MalformedRecord(source, where, f"unsupported schema {schema!r}")
    try:
        sentences = []
        for s in obj["sentences"]:
            mentions = [
                EntityMention(
                    id=m["id"],
                    kind=MentionKind(m["kind"]),
                    surface=m["surface"],
                    char_start=int(m["char_start"]),
                    char_end=int(m["char_end"]),
                    normalized=m.get("normalized"),
                )
                for m in s.get("mentions", [])
            ]
            candidates = [
                CandidatePair(
                    id=c["id"],
                    snp_ref=c["snp_ref"],
                    pheno_ref=c["pheno_ref"],
                    label=Label(c["label"]),
                    sentence_ref=s["id"],
                    extras=dict(c.get("extras", {})),
                )
                for c in s.get("candidates", [])
            ]
            sentences.append(Sentence(id=s["id"], text=s["text"], mentions=mentions, candidates=candidates))
        return Document(
            id=obj["id"],
            title=obj.get("title"),
            sentences=sentences,
            split_hint=SplitHint(obj.get("split_hint", "NONE")),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise MalformedRecord(source, where, f"bad document record: {exc!r}") from exc


_NATIVE_KIND = {"snp": MentionKind.SNP, "phenotype": MentionKind.PHENOTYPE}
_NATIVE_LABEL_KEYS = ("relation", "association", "label", "type")


def _parse_native(path: Path) -> Corpus:
    if not path.is_dir():
        raise MalformedRecord(str(path), "-", "expected a directory of XML files")
    files: list[tuple[Path, SplitHint]] = []
    for sub, hint in (("train", SplitHint.TRAIN), ("test", SplitHint.TEST)):
        subdir = path / sub
        if subdir.is_dir():
            files.extend((p, hint) for p in sorted(subdir.glob("*.xml")))
    if not files:
        files = [(p, SplitHint.NONE) for p in sorted(path.glob("*.xml"))]
    if not files:
        raise MissingPath(f"no XML files under {path}")
    documents = [_parse_native_file(p, hint) for p, hint in files]
    documents.sort(key=lambda d: d.id)
    return Corpus(documents, Provenance(str(path), CorpusFormat.SNPPHENA_NATIVE))


def _parse_native_file(path: Path, hint: SplitHint) -> Document:
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise MalformedRecord(str(path), "-", f"XML parse error: {exc}") from exc
    if root.tag not in ("document", "abstract"):
        raise MalformedRecord(str(path), root.tag, "root element must be <document> or <abstract>")
    doc_id = root.get("id") or path.stem
    sentences = []
    for sent_el in root.findall("sentence"):
        sent_id = sent_el.get("id")
        text = sent_el.get("text")
        if sent_id is None or text is None:
            raise MalformedRecord(str(path), str(sent_id), "<sentence> needs id and text attributes")
        mentions = []
        for ent in sent_el.findall("entity"):
            kind = _NATIVE_KIND.get((ent.get("type") or "").lower())
            if kind is None:
                raise MalformedRecord(str(path), ent.get("id", "?"), f"unknown entity type {ent.get('type')!r}")
            offset = ent.get("charOffset", "")
            if ";" in offset:
                raise MalformedRecord(str(path), ent.get("id", "?"), "discontinuous spans are not supported")
            try:
                start_s, end_s = offset.split("-")
                start, end = int(start_s), int(end_s) + 1  # native end offset is inclusive
            except ValueError as exc:
                raise MalformedRecord(str(path), ent.get("id", "?"), f"bad charOffset {offset!r}") from exc
            mentions.append(
                EntityMention(
                    id=ent.get("id", ""),
                    kind=kind,
                    surface=ent.get("text", ""),
                    char_start=start,
                    char_end=end,
                    normalized=ent.get("normalized") or ent.get("rsid"),
                )
            )
        candidates = []
        for pair in sent_el.findall("pair"):
            label_value = None
            label_key = None
            for key in _NATIVE_LABEL_KEYS:
                if pair.get(key) is not None:
                    label_value, label_key = pair.get(key), key
                    break
            if label_value is None:
                raise MalformedRecord(str(path), pair.get("id", "?"), "pair carries no association label")
            try:
                label = Label(label_value.upper())
            except ValueError as exc:
                raise MalformedRecord(str(path), pair.get("id", "?"), f"bad label {label_value!r}") from exc
            extras = {
                k: v
                for k, v in pair.attrib.items()
                if k not in ("id", "e1", "e2", label_key)
            }
            candidates.append(
                CandidatePair(
                    id=pair.get("id", ""),
                    snp_ref=pair.get("e1", ""),
                    pheno_ref=pair.get("e2", ""),
                    label=label,
                    sentence_ref=sent_id,
                    extras=extras,
                )
            )
        # native pairs may list entities in either order; normalize by kind
        by_id = {m.id: m for m in mentions}
        for cand in candidates:
            e1, e2 = by_id.get(cand.snp_ref), by_id.get(cand.pheno_ref)
            if e1 is not None and e2 is not None and e1.kind is MentionKind.PHENOTYPE and e2.kind is MentionKind.SNP:
                cand.snp_ref, cand.pheno_ref = cand.pheno_ref, cand.snp_ref
        sentences.append(Sentence(id=sent_id, text=text, mentions=mentions, candidates=candidates))
    return Document(id=doc_id, title=root.get("title"), sentences=sentences, split_hint=hint)


# ---------------------------------------------------------------------------
# Validation / stats


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Check every structural invariant; violations are reported, not raised."""
    report = ValidationReport()
    seen_docs: set[str] = set()
    for doc in corpus.documents:
        if doc.id in seen_docs:
            report.errors.append((doc.id, "duplicate document id"))
        seen_docs.add(doc.id)
        seen_sents: set[str] = set()
        for sent in doc.sentences:
            if sent.id in seen_sents:
                report.errors.append((doc.id, f"duplicate sentence id {sent.id!r}"))
            seen_sents.add(sent.id)
            seen_mentions: set[str] = set()
            for m in sent.mentions:
                if m.id in seen_mentions:
                    report.errors.append((doc.id, f"duplicate mention id {m.id!r} in {sent.id!r}"))
                seen_mentions.add(m.id)
                if not isinstance(m.kind, MentionKind):
                    report.errors.append((doc.id, f"mention {m.id!r}: bad kind {m.kind!r}"))
                if not (0 <= m.char_start < m.char_end <= len(sent.text)):
                    report.errors.append(
                        (doc.id, f"OffsetMismatch: mention {m.id!r} span [{m.char_start},{m.char_end}) "
                                 f"outside sentence of length {len(sent.text)}")
                    )
                elif sent.text[m.char_start:m.char_end] != m.surface:
                    report.errors.append(
                        (doc.id, f"OffsetMismatch: mention {m.id!r} surface {m.surface!r} != "
                                 f"text slice {sent.text[m.char_start:m.char_end]!r}")
                    )
            for cand in sent.candidates:
                if not isinstance(cand.label, Label):
                    report.errors.append((doc.id, f"pair {cand.id!r}: label {cand.label!r} outside domain"))
                snp = sent.mention_by_id(cand.snp_ref)
                pheno = sent.mention_by_id(cand.pheno_ref)
                if snp is None:
                    report.errors.append((doc.id, f"pair {cand.id!r}: snp_ref {cand.snp_ref!r} not in sentence"))
                elif snp.kind is not MentionKind.SNP:
                    report.errors.append((doc.id, f"pair {cand.id!r}: snp_ref points at a {snp.kind} mention"))
                if pheno is None:
                    report.errors.append((doc.id, f"pair {cand.id!r}: pheno_ref {cand.pheno_ref!r} not in sentence"))
                elif pheno.kind is not MentionKind.PHENOTYPE:
                    report.errors.append((doc.id, f"pair {cand.id!r}: pheno_ref points at a {pheno.kind} mention"))
                if cand.sentence_ref != sent.id:
                    report.errors.append((doc.id, f"pair {cand.id!r}: sentence_ref {cand.sentence_ref!r} != {sent.id!r}"))
    return report


def corpus_stats(corpus: Corpus) -> CorpusStats:
    n_sent = sum(len(d.sentences) for d in corpus.documents)
    counts = {Label.POSITIVE: 0, Label.NEGATIVE: 0, Label.NEUTRAL: 0}
    for _, _, pair in corpus.iter_candidates():
        counts[pair.label] += 1
    total = sum(counts.values())
    return CorpusStats(
        n_documents=len(corpus.documents),
        n_sentences=n_sent,
        n_candidates=total,
        n_positive=counts[Label.POSITIVE],
        n_negative=counts[Label.NEGATIVE],
        n_neutral=counts[Label.NEUTRAL],
    )


# ---------------------------------------------------------------------------
# Splitting


def split_dataset(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    """Partition at document granularity. OFFICIAL honors per-document hints;
    STRATIFIED shuffles within per-document dominant-label strata."""
    if spec.mode is SplitMode.OFFICIAL:
        if any(d.split_hint is SplitHint.NONE for d in corpus.documents):
            missing = [d.id for d in corpus.documents if d.split_hint is SplitHint.NONE]
            raise MissingSplitHint(f"documents without split hint: {missing[:5]}")
        train_docs = [d for d in corpus.documents if d.split_hint is SplitHint.TRAIN]
        test_docs = [d for d in corpus.documents if d.split_hint is SplitHint.TEST]
    else:
        strata: dict[str, list[Document]] = {}
        for doc in corpus.documents:
            counts = {Label.POSITIVE: 0, Label.NEGATIVE: 0, Label.NEUTRAL: 0}
            for sent in doc.sentences:
                for cand in sent.candidates:
                    counts[cand.label] += 1
            if sum(counts.values()) == 0:
                key = "EMPTY"
            else:
                key = max(counts, key=lambda lab: counts[lab]).value
            strata.setdefault(key, []).append(doc)
        rng = np.random.default_rng(spec.seed)
        train_docs, test_docs = [], []
        for key in sorted(strata):
            docs = strata[key]
            order = rng.permutation(len(docs))
            n_test = int(round(spec.test_fraction * len(docs)))
            test_idx = set(order[:n_test].tolist())
            for i, doc in enumerate(docs):
                (test_docs if i in test_idx else train_docs).append(doc)
        order_index = {d.id: i for i, d in enumerate(corpus.documents)}
        train_docs.sort(key=lambda d: order_index[d.id])
        test_docs.sort(key=lambda d: order_index[d.id])
    prov = corpus.provenance
    return (
        Corpus(train_docs, Provenance(prov.source + "#train", prov.format)),
        Corpus(test_docs, Provenance(prov.source + "#test", prov.format)),
    )


# ---------------------------------------------------------------------------
# Serialization


def serialize_corpus(corpus: Corpus) -> bytes:
    """Canonical JSONL: one UTF-8 JSON object per document, fixed key order,
    byte-stable across runs."""
    lines = []
    for doc in corpus.documents:
        obj = {
            "schema": SCHEMA_VERSION,
            "id": doc.id,
            "title": doc.title,
            "split_hint": doc.split_hint.value,
            "sentences": [
                {
                    "id": s.id,
                    "text": s.text,
                    "mentions": [
                        {
                            "id": m.id,
                            "kind": m.kind.value,
                            "surface": m.surface,
                            "char_start": m.char_start,
                            "char_end": m.char_end,
                            "normalized": m.normalized,
                        }
                        for m in s.mentions
                    ],
                    "candidates": [
                        {
                            "id": c.id,
                            "snp_ref": c.snp_ref,
                            "pheno_ref": c.pheno_ref,
                            "label": c.label.value,
                            "extras": {k: c.extras[k] for k in sorted(c.extras)},
                        }
                        for c in s.candidates
                    ],
                }
                for s in doc.sentences
            ],
        }
        lines.append(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
    return ("\n".join(lines) + "\n").encode("utf-8")
