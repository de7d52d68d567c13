"""Regenerate the bundled fixture corpus (src/snprex/data/fixture_corpus.jsonl).

The fixture is a synthetic stand-in for the real corpus distribution with a
documented composition: 12 documents (8 train / 4 test), 60 sentences,
52 candidate pairs (24 positive, 16 negative, 12 neutral). Texts are built
from templates so entity offsets are exact by construction.
"""

from pathlib import Path

from snprex.corpus import (
    CandidatePair,
    Corpus,
    Document,
    EntityMention,
    Label,
    MentionKind,
    Sentence,
    SplitHint,
    corpus_stats,
    serialize_corpus,
    validate_corpus,
)

SNPS = ["rs1042522", "rs429358", "rs7412", "rs6983267", "rs1800562",
        "rs1801133", "rs2476601", "rs3761548", "rs9939609", "rs7903146",
        "rs4977574", "rs1799971"]

PHENOTYPES = ["asthma", "type 2 diabetes", "Crohn's disease", "breast cancer",
              "Alzheimer's disease", "rheumatoid arthritis", "obesity",
              "coronary artery disease", "β-thalassemia", "hypertension",
              "major depressive disorder", "celiac disease"]

POS_TEMPLATES = [
    "The {snp} polymorphism was significantly associated with increased risk of {ph}.",
    "Carriers of {snp} showed a markedly higher susceptibility to {ph} in this cohort.",
    "Our meta-analysis confirmed that {snp} confers risk for {ph}.",
]
NEG_TEMPLATES = [
    "No association was observed between {snp} and {ph} after correction.",
    "The variant {snp} was not related to {ph} in any of the tested models.",
]
NEU_TEMPLATES = [
    "Patients carrying {snp} were genotyped and screened for {ph}.",
    "Further studies of {snp} and {ph} are required before conclusions can be drawn.",
]
FILLER = [
    "Genome-wide association studies have identified many susceptibility loci.",
    "All participants provided written informed consent.",
]


def make_sentence(doc_id, s_idx, template, snp, ph, label):
    text = template.format(snp=snp, ph=ph)
    sid = f"{doc_id}.s{s_idx}"
    snp_start = text.index(snp)
    ph_start = text.index(ph)
    m_snp = EntityMention(f"{sid}.e0", MentionKind.SNP, snp, snp_start,
                          snp_start + len(snp), normalized=snp)
    m_ph = EntityMention(f"{sid}.e1", MentionKind.PHENOTYPE, ph, ph_start,
                         ph_start + len(ph), normalized=ph.lower())
    pair = CandidatePair(f"{sid}.p0", m_snp.id, m_ph.id, label, sid,
                         extras={"confidence": "moderate" if label is Label.POSITIVE else "zero"})
    return Sentence(sid, text, [m_snp, m_ph], [pair])


def make_double_sentence(doc_id, s_idx, snp_a, snp_b, ph, label_a, label_b):
    text = (f"While {snp_a} increased the odds of {ph}, "
            f"{snp_b} showed no such effect on {ph} here.")
    sid = f"{doc_id}.s{s_idx}"
    a_start = text.index(snp_a)
    b_start = text.index(snp_b)
    ph1 = text.index(ph)
    ph2 = text.index(ph, ph1 + 1)
    mentions = [
        EntityMention(f"{sid}.e0", MentionKind.SNP, snp_a, a_start, a_start + len(snp_a), snp_a),
        EntityMention(f"{sid}.e1", MentionKind.PHENOTYPE, ph, ph1, ph1 + len(ph), ph.lower()),
        EntityMention(f"{sid}.e2", MentionKind.SNP, snp_b, b_start, b_start + len(snp_b), snp_b),
        EntityMention(f"{sid}.e3", MentionKind.PHENOTYPE, ph, ph2, ph2 + len(ph), ph.lower()),
    ]
    candidates = [
        CandidatePair(f"{sid}.p0", f"{sid}.e0", f"{sid}.e1", label_a, sid, {"confidence": "high"}),
        CandidatePair(f"{sid}.p1", f"{sid}.e2", f"{sid}.e3", label_b, sid, {"negation": "yes"}),
    ]
    return Sentence(sid, text, mentions, candidates)


def build() -> Corpus:
    documents = []
    for i in range(12):
        doc_id = f"d{i:03d}"
        snp = SNPS[i]
        ph = PHENOTYPES[i]
        other_snp = SNPS[(i + 5) % 12]
        sentences = [
            make_sentence(doc_id, 0, POS_TEMPLATES[i % 3], snp, ph, Label.POSITIVE),
            make_sentence(doc_id, 1, NEG_TEMPLATES[i % 2], other_snp, ph, Label.NEGATIVE),
            make_sentence(doc_id, 2, NEU_TEMPLATES[i % 2], snp,
                          PHENOTYPES[(i + 3) % 12], Label.NEUTRAL),
            Sentence(f"{doc_id}.s3", FILLER[i % 2]),
        ]
        # every third document gains a two-candidate sentence
        if i % 3 == 0:
            sentences.insert(
                3,
                make_double_sentence(doc_id, 4, SNPS[(i + 1) % 12], SNPS[(i + 7) % 12],
                                     PHENOTYPES[(i + 6) % 12], Label.POSITIVE, Label.NEGATIVE),
            )
        else:
            sentences.append(
                make_sentence(doc_id, 4, POS_TEMPLATES[(i + 1) % 3], other_snp,
                              PHENOTYPES[(i + 1) % 12], Label.POSITIVE),
            )
        hint = SplitHint.TRAIN if i < 8 else SplitHint.TEST
        documents.append(Document(doc_id, title=f"Synthetic abstract {i}",
                                  sentences=sentences, split_hint=hint))
    return Corpus(documents)


def main():
    corpus = build()
    report = validate_corpus(corpus)
    assert report.ok, report.errors
    out = Path(__file__).resolve().parents[1] / "src" / "snprex" / "data" / "fixture_corpus.jsonl"
    out.write_bytes(serialize_corpus(corpus))
    print(corpus_stats(corpus))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
