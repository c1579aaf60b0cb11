#!/usr/bin/env python3
"""Smoke test for the eventscope_py extension module.

Builds nothing itself: it locates the compiled cdylib under target/,
copies it into a temp directory under the importable name, and runs a
miniature end-to-end check of the exposed API.

Usage: cargo build -p eventscope-py && python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_extension():
    candidates = sorted(
        REPO.glob("target/*/libeventscope_py.so"),
        key=lambda p: p.stat().st_mtime,
        reverse=True,
    )
    if not candidates:
        sys.exit("no libeventscope_py.so under target/; run `cargo build -p eventscope-py` first")
    tmp = tempfile.mkdtemp(prefix="eventscope_py_")
    shutil.copy2(candidates[0], Path(tmp) / "eventscope_py.so")
    sys.path.insert(0, tmp)
    import eventscope_py

    return eventscope_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    es = import_extension()
    print(f"imported eventscope_py {es.__version__}")

    # Text utilities.
    sentences = es.split_sentences("First thing happened. Then another thing.")
    assert len(sentences) == 2, sentences
    tokens = es.tokenize("The Bank announced losses.")
    assert tokens[:4] == ["the", "bank", "announced", "losses"], tokens

    # Event-window labeling.
    assert es.label_pair("2010-06-10", ["2010-06-01"]) == 1
    assert es.label_pair("2011-06-10", ["2010-06-01"]) == 0
    assert es.label_pair("2010-03-01", ["2010-06-01"]) is None
    assert es.label_pair("2010-06-10", ["2010-06-01"], w_in=(-1, 1)) is None

    # Metrics.
    perfect = es.usefulness(tpc=20, fpc=0, tnc=80, fnc=0, mu=0.7)
    approx(perfect.relative, 1.0)
    assert perfect.absolute > 0
    silent = es.usefulness(tpc=0, fpc=0, tnc=80, fnc=20, mu=0.7)
    assert silent.absolute <= 0, silent
    approx(es.mu_to_beta(0.5), 1.0)
    approx(es.f_beta(tpc=5, fpc=5, tnc=85, fnc=5, beta=1.0), 0.5)
    assert es.f_beta(tpc=0, fpc=3, tnc=90, fnc=7, beta=1.0) == 0.0
    approx(es.roc_auc([0.1, 0.4, 0.8, 0.9], [0, 0, 1, 1]), 1.0)
    approx(es.roc_auc([0.9, 0.8, 0.4, 0.1], [0, 0, 1, 1]), 0.0)
    bands = es.percentile_band([0.1, 0.2, 0.3, 0.4], step=2)
    assert bands == sorted(bands) and bands[-1] <= 100.0, bands

    # Synthetic corpus round trip through ingestion.
    synth = es.generate_corpus(
        entities=4,
        span_days=150,
        background_vocab=150,
        event_vocab=25,
        sentences_per_day=0.4,
        seed=7,
    )
    again = es.generate_corpus(
        entities=4,
        span_days=150,
        background_vocab=150,
        event_vocab=25,
        sentences_per_day=0.4,
        seed=7,
    )
    assert synth.corpus == again.corpus, "same seed must reproduce the corpus"
    assert synth.planted_count > 0
    store = es.CorpusStore.ingest(synth.corpus, synth.lexicon)
    assert store.sentences == synth.sentence_count, (store.sentences, synth.sentence_count)
    assert store.entity_ids == ["e00", "e01", "e02", "e03"]
    mention_ids = store.mention_bearing_ids()
    truth_rows = synth.truth.strip().splitlines()[1:]
    assert len(mention_ids) == len(truth_rows), (len(mention_ids), len(truth_rows))

    sid = mention_ids[0]
    assert store.sentence_text(sid)
    assert store.sentence_entities(sid), "mention-bearing sentence lists its entities"
    assert len(store.sentence_date(sid)) == 10

    # Embedding training, extraction, and inference.
    model = es.EmbeddingModel.train(store, dim=12, context_n=3, min_count=1, epochs=2, seed=3)
    assert model.dim == 12
    vec = model.extract_vector(sid)
    assert len(vec) == 12 and all(math.isfinite(v) for v in vec)
    inferred = model.infer_vector(store.sentence_tokens(sid), steps=10)
    assert len(inferred) == 12

    # Classifier on planted-vs-background sentence vectors.
    planted = {int(row.split(",")[0]) for row in truth_rows if row.split(",")[1] == "1"}
    xs = [model.extract_vector(i) for i in mention_ids]
    ys = [1 if i in planted else 0 for i in mention_ids]
    assert 0 < sum(ys) < len(ys), "need both classes for training"
    clf = es.RelevanceClassifier.train(xs, ys, hidden=6, epochs=10, seed=5)
    posteriors = clf.posteriors(xs)
    assert all(0.0 <= p <= 1.0 for p in posteriors)
    auc = es.roc_auc(posteriors, ys)
    assert 0.0 <= auc <= 1.0

    # Model persistence round trips.
    with tempfile.TemporaryDirectory() as tmp:
        model_path = str(Path(tmp) / "embed.bin")
        clf_path = str(Path(tmp) / "clf.bin")
        store_path = str(Path(tmp) / "store.bin")
        model.save(model_path)
        clf.save(clf_path)
        store.save(store_path)
        # Files store f32, so reloaded values agree to single precision.
        approx(es.EmbeddingModel.load(model_path).extract_vector(sid)[0], vec[0], tol=1e-6)
        approx(es.RelevanceClassifier.load(clf_path).posterior(xs[0]), posteriors[0], tol=1e-6)
        assert es.CorpusStore.load(store_path).sentences == store.sentences

    # Errors surface as Python exceptions.
    for bad_call in (
        lambda: es.label_pair("not-a-date", ["2010-06-01"]),
        lambda: es.usefulness(tpc=1, fpc=1, tnc=1, fnc=1, mu=1.5),
        lambda: es.roc_auc([0.5], [1, 0]),
        lambda: es.percentile_band([], step=2),
        lambda: model.extract_vector(10**12),
        lambda: clf.posterior([0.0]),
    ):
        try:
            bad_call()
        except (ValueError, OSError):
            pass
        else:
            raise AssertionError(f"expected an exception from {bad_call}")

    print("smoke test passed")


if __name__ == "__main__":
    main()
