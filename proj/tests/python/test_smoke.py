import json
import math
import os
import pathlib
import shutil

import pytest

import mhqa

DATA = pathlib.Path(os.environ.get("MHQA_DATA_DIR", pathlib.Path(__file__).resolve().parents[2] / "data"))
CONFIG = DATA / "tiny_wiki" / "config.json"


def test_tokenize_offsets_are_code_points():
    toks = mhqa.tokenize("Café — Kiss and Tell")
    assert [t[0] for t in toks] == ["café", "kiss", "and", "tell"]
    assert toks[0][1:] == (0, 4)
    assert toks[1][1:] == (7, 11)


def test_metrics():
    assert mhqa.normalize_answer("The Chief of Protocol.") == "chief of protocol"
    em, f1 = mhqa.em_f1("United States", "United States of America")
    assert em == 0.0
    assert math.isclose(f1, 2 / 3)
    assert mhqa.em_f1("shirley temple.", "Shirley Temple") == (1.0, 1.0)
    ranked = [f"t{i}" for i in range(1, 12)]
    assert mhqa.hits_at_k(ranked, "t11", 10) == 0
    assert mhqa.hits_at_k(ranked, "t11", 11) == 1
    with pytest.raises(mhqa.ValidationError):
        mhqa.hits_at_k(ranked, "t1", 0)


def test_corpus_and_retrieval():
    corpus = mhqa.load_corpus(str(DATA / "tiny_wiki" / "corpus.jsonl"))
    assert len(corpus) == 60
    title = corpus.titles()[0]
    passage = corpus.passage(title)
    assert passage["title"] == title
    assert corpus.passage("no such title") is None

    retriever = mhqa.Retriever(corpus)
    hits = retriever.retrieve(passage["text"], k=5)
    assert 1 <= len(hits) <= 5
    scores = [s for _, s in hits]
    assert scores == sorted(scores, reverse=True)
    assert hits[0][0] == passage["id"]
    assert math.isclose(retriever.score(passage["text"], hits[0][0]), hits[0][1])
    assert retriever.retrieve(passage["text"], k=3) == hits[:3]


def test_best_span_and_folds():
    start = [0.0, 2.0, 1.0, -math.inf]
    end = [0.0, 0.5, 3.0, 9.0]
    assert mhqa.best_span(start, end, 30)[:2] == (1, 3)
    assert mhqa.best_span(start, end, 2)[:2] == (2, 3)
    assert mhqa.best_span(start, end, 1)[:2] == (2, 2)
    a, b = mhqa.split_folds([f"q{i}" for i in range(24)], 5)
    assert len(a) == len(b) == 12
    assert not set(a) & set(b)
    assert (a, b) == mhqa.split_folds([f"q{i}" for i in reversed(range(24))], 5)


def test_stage_runner(tmp_path):
    out = tmp_path / "run"
    overrides = [("output_dir", str(out)), ("hidden", "3"), ("abstract_hidden", "3"),
                 ("bridge_epochs", "1"), ("reader_epochs", "1")]
    with pytest.raises(mhqa.PrerequisiteError, match="run predict"):
        mhqa.run_stage(str(CONFIG), "evaluate", overrides)
    for stage in mhqa.stage_names()[:-1]:
        mhqa.run_stage(str(CONFIG), stage, overrides)
    summary = mhqa.run_stage(str(CONFIG), "evaluate", overrides)
    assert summary["mode"] == "full"
    assert summary["full"]["count"] == 16
    assert mhqa.check_fold_hygiene(str(out)) == []
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["effective_mode"] == "full"
    assert "no_bridge_reasoner" in mhqa.known_modes()
