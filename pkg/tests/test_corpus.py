import random

import numpy as np
import pytest

from cmabfas.context import CLASS_LABELS, hamming_agreement
from cmabfas.corpus import (
    DEFAULT_COUNTS,
    ClassTemplate,
    CorpusSpec,
    draw_call,
    generate_corpus,
    read_corpus,
    write_corpus,
)


def test_small_spec_counts_and_intra_class_agreement():
    spec = CorpusSpec(counts={"normal": 2, "spitter": 1}, seed=1)
    corpus = generate_corpus(spec)
    assert len(corpus) == 3
    normals = [c for c in corpus if c.call_class.label == "normal"]
    assert len(normals) == 2
    assert hamming_agreement(normals[0].header, normals[1].header) >= 6


def test_generation_is_deterministic(tmp_path):
    spec = CorpusSpec(counts={"normal": 50, "voipbot": 20}, seed=9)
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    write_corpus(generate_corpus(spec), a)
    write_corpus(generate_corpus(spec), b)
    assert a.read_bytes() == b.read_bytes()
    other = tmp_path / "c.tsv"
    write_corpus(generate_corpus(CorpusSpec(counts={"normal": 50, "voipbot": 20}, seed=10)), other)
    assert other.read_bytes() != a.read_bytes()


def test_round_trip(tmp_path, small_corpus):
    path = tmp_path / "corpus.tsv"
    write_corpus(small_corpus, path)
    assert read_corpus(path) == small_corpus
    assert path.read_text().splitlines()[0] == "# cmabfas-corpus v1"


def test_read_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("normal\ta\n")
    with pytest.raises(ValueError):
        read_corpus(bad)
    bad.write_text("# cmabfas-corpus v1\nnormal\ta\tb\n")
    with pytest.raises(ValueError):
        read_corpus(bad)


def test_validation():
    with pytest.raises(ValueError):
        generate_corpus(CorpusSpec(counts={"normal": -1}))
    with pytest.raises(ValueError):
        generate_corpus(CorpusSpec(templates={"normal": ClassTemplate(fixed=17)}))
    with pytest.raises(ValueError):
        CorpusSpec.from_dict({"fixed": 17})


def test_default_counts(default_corpus):
    assert len(default_corpus) == sum(DEFAULT_COUNTS.values()) == 8426
    for label, n in DEFAULT_COUNTS.items():
        assert sum(c.call_class.label == label for c in default_corpus) == n


def _codes(calls):
    values = {}
    return np.array([[values.setdefault(v, len(values)) for v in c.header.attributes] for c in calls])


def test_class_structure_exhaustive(default_corpus):
    by_class = {label: [c for c in default_corpus if c.call_class.label == label] for label in CLASS_LABELS}
    table = {}
    values: dict[str, int] = {}
    for label, calls in by_class.items():
        table[label] = np.array(
            [[values.setdefault(v, len(values)) for v in c.header.attributes] for c in calls]
        )
    # normal vs spitter, every pair: agreement <= 10, i.e. distance >= 2**-10.
    worst = 0
    normal, spitter = table["normal"], table["spitter"]
    for start in range(0, len(normal), 500):
        agree = (normal[start : start + 500, None, :] == spitter[None, :, :]).sum(axis=2)
        worst = max(worst, int(agree.max()))
    assert worst <= 10
    # Same class: agreement >= F (= 6) for every pair.
    for label, codes in table.items():
        if label == "normal":
            sample = codes[:800]
        else:
            sample = codes
        agree = (sample[:, None, :] == sample[None, :, :]).sum(axis=2)
        assert agree.min() >= 6, label
    # Fixed signatures: each class has >= 6 constant slots, disjoint across classes.
    signatures = {}
    for label, calls in by_class.items():
        cols = list(zip(*(c.header.attributes for c in calls)))
        signatures[label] = {v for col in cols if len(set(col)) == 1 for v in col}
        assert len(signatures[label]) >= 6
    labels = list(signatures)
    for i, a in enumerate(labels):
        for b in labels[i + 1 :]:
            assert not signatures[a] & signatures[b]


def test_draw_call():
    corpus = generate_corpus(CorpusSpec(counts={"warvox": 1}))
    assert draw_call(corpus, random.Random(0)) is corpus[0]
    with pytest.raises(ValueError):
        draw_call([], random.Random(0))


def test_draw_call_reproducible(small_corpus):
    a = [draw_call(small_corpus, random.Random(5)) for _ in range(3)]
    r1, r2 = random.Random(11), random.Random(11)
    assert [draw_call(small_corpus, r1) for _ in range(100)] == [draw_call(small_corpus, r2) for _ in range(100)]
    assert a[0] is a[1]


def test_draw_call_frequencies(default_corpus):
    rng = random.Random(2024)
    normal = sum(draw_call(default_corpus, rng).call_class.label == "normal" for _ in range(1_000_000))
    assert abs(normal / 1_000_000 - 5609 / 8426) <= 0.01
