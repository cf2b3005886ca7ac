import json
import math

import pytest

import topicforge as tf


def test_sentences_and_tokens():
    sents = tf.segment_sentences("My mentor helped a lot. Dr. Smith was great! Was it worth it?")
    assert len(sents) == 3
    assert tf.tokenize("Co-op placements, work-study") == ["co_op", "placements", "work_study"]


def test_cosine():
    assert tf.cosine_similarity([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 1.0
    assert tf.cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert abs(tf.cosine_similarity([2.0, 4.0, 6.0], [3.0, 1.0, 0.5]) - tf.cosine_similarity([1.0, 2.0, 3.0], [3.0, 1.0, 0.5])) < 1e-12


def test_statistics():
    r = tf.chi_square_independence([[10, 20], [20, 10]])
    assert abs(r["statistic"] - 6.6667) < 1e-4
    assert r["df"] == 1
    z = tf.two_proportion_test(550, 1000, 450, 1000)
    assert z["stars"] == "***"
    w = tf.welch_t_test(1.0, 1.0, 50, 1.0, 2.0, 60)
    assert w["statistic"] == 0.0 and w["p_value"] == pytest.approx(1.0)


def test_fit_lda_normalized_and_deterministic():
    docs = [[i % 10 + 10 * (d % 2) for i in range(30)] for d in range(20)]
    a = tf.fit_lda(docs, 20, 2, seed=3, iterations=60, burn_in=30, sample_lag=5)
    b = tf.fit_lda(docs, 20, 2, seed=3, iterations=60, burn_in=30, sample_lag=5)
    assert a == b
    for t in range(2):
        assert math.isclose(sum(a["phi"][t * 20:(t + 1) * 20]), 1.0, abs_tol=1e-9)


def test_invalid_config_raises(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"paths": {"corpus": "missing.csv"}}))
    with pytest.raises(tf.ValidationError):
        tf.preprocess(cfg)


def test_cohort_pipeline(tmp_path):
    tf.synth({"seed": 5, "cohort": {"per_group": 150,
                                    "effects": [{"topic": 1, "male": 0.6, "female": 0.3}]}}, tmp_path)
    cfg = tmp_path / "cohort" / "config.json"
    assert tf.load_config(cfg)["seed"] == 5
    pre = tf.preprocess(cfg)
    assert pre["records"] == 300
    assigned = tf.assign(cfg)
    assert "documents_per_topic" in assigned
    tf.analyze(cfg, "gender")
    table = json.loads((tmp_path / "cohort" / "out" / "analyze" / "table_gender.json").read_text())
    top = table["rows"][0]
    assert top["topic_id"] == 1
    assert top["differences"][0]["difference"] == pytest.approx(0.3, abs=0.05)
    assert top["differences"][0]["stars"] == "***"
    with pytest.raises(tf.ValidationError):
        tf.analyze(cfg, "height")


def test_planted_lda_pipeline(tmp_path):
    tf.synth({"seed": 2, "lda": {"docs": 120}}, tmp_path)
    cfg = tmp_path / "lda" / "config.json"
    tf.preprocess(cfg)
    first = tf.fit(cfg, 5)
    model = tmp_path / "lda" / "out" / "lda" / "model_k5.json"
    before = model.read_bytes()
    tf.fit(cfg, 5)
    assert model.read_bytes() == before
    assert first["k"] == 5
