import json
import math

import pytest

from visemelab.fixtures import fixture_text, load_map
from visemelab.harness import (ConfigurationError, FoldResult, StudyConfig,
                               build_word_network, correctness, crossval_folds, enumerate_specs,
                               make_spec, map_designation, needed_map_sources,
                               phoneme_confusions, report_text, results_json, run_experiment,
                               score_cell, weighted_score)
from visemelab.hmm import TrainingConfig
from visemelab.lexicon import parse_lexicon
from visemelab.synth import generate_corpus, make_speaker

SPEAKERS = (1, 2, 3, 4)


@pytest.fixture(scope="module")
def tiny_lexicon():
    return parse_lexicon("BEE b iy\nDAY d ey\nFOE f ow\n")


@pytest.fixture(scope="module")
def tiny_corpus(inventory, tiny_lexicon):
    profile = make_speaker(1, inventory, dimension=4, seed=2)
    return generate_corpus(profile, tiny_lexicon, recitations=2, seed=2)


def test_family_classification():
    assert make_spec((1,), 1, 1, SPEAKERS).family == "SSD"
    assert make_spec((2,), 2, 1, SPEAKERS).family == "DSD&D"
    assert make_spec((2,), 1, 1, SPEAKERS).family == "DSD"
    assert make_spec((1, 2, 3, 4), 3, 3, SPEAKERS).family == "MS"
    assert make_spec((2, 3, 4), 1, 1, SPEAKERS).family == "SI"


def test_family_classification_rejects_unsupported():
    with pytest.raises(ConfigurationError):
        make_spec((1, 2), 1, 1, SPEAKERS)
    with pytest.raises(ConfigurationError):
        make_spec((1, 2, 3, 4), 1, 2, SPEAKERS)
    with pytest.raises(ConfigurationError):
        make_spec((5,), 5, 5, SPEAKERS)


def test_enumerate_specs_counts():
    assert len(enumerate_specs("SSD", SPEAKERS)) == 4
    assert len(enumerate_specs("DSD&D", SPEAKERS)) == 12
    assert len(enumerate_specs("DSD", SPEAKERS)) == 12
    assert len(enumerate_specs("MS", SPEAKERS)) == 4
    assert len(enumerate_specs("SI", SPEAKERS)) == 4
    with pytest.raises(ConfigurationError):
        enumerate_specs("XXL", SPEAKERS)


def test_spec_designations():
    spec = make_spec((2, 3, 4), 1, 1, SPEAKERS)
    assert spec.designation() == "M_234"
    assert spec.label() == "M_234(1,1)"
    assert map_designation((4, 1, 3, 2)) == "M_1234"


def test_needed_map_sources():
    sources = needed_map_sources(["SSD", "SI"], SPEAKERS)
    assert (1,) in sources and (2, 3, 4) in sources
    assert len(sources) == 8


def test_crossval_folds_layout(inventory, letters):
    profile = make_speaker(1, inventory, dimension=4, seed=1)
    corpus = generate_corpus(profile, letters, recitations=7, seed=1)
    folds = crossval_folds(corpus, 7)
    assert len(folds) == 7
    seen = []
    for train, test in folds:
        assert len(train) == 156 and len(test) == 26
        assert {u.recitation for u in test} == {test[0].recitation}
        assert not set(id(u) for u in train) & set(id(u) for u in test)
        seen.extend(test)
    assert len(seen) == 182


def test_crossval_folds_toy_and_errors(tiny_corpus):
    folds = crossval_folds(tiny_corpus, 2)
    assert len(folds) == 2
    assert {u.recitation for u in folds[0][1]} == {1}
    assert {u.recitation for u in folds[0][0]} == {2}
    with pytest.raises(ConfigurationError):
        crossval_folds(tiny_corpus, 7)


def test_fold_result_validation():
    with pytest.raises(ValueError):
        FoldResult(1, 26, 27)
    assert FoldResult(1, 26, 13).fraction == 0.5


def test_correctness_trivial_cases():
    perfect = [FoldResult(i, 26, 26) for i in range(1, 8)]
    mean, se = correctness(perfect)
    assert mean == 1.0 and se == 0.0
    half = [FoldResult(i, 26, 13) for i in range(1, 8)]
    mean, se = correctness(half)
    assert mean == 0.5 and se == 0.0


def test_correctness_hand_computed_se():
    corrects = [26, 0, 13, 26, 0, 13, 26]
    results = [FoldResult(i + 1, 26, c) for i, c in enumerate(corrects)]
    mean, se = correctness(results)
    assert mean == pytest.approx(4 / 7)
    # fractions [1,0,.5,1,0,.5,1]; sample variance = 119/588
    assert se == pytest.approx(math.sqrt(119 / 588 / 7), abs=1e-12)


def test_correctness_single_fold():
    mean, se = correctness([FoldResult(1, 26, 20)])
    assert mean == pytest.approx(20 / 26) and se == 0.0


def test_score_cell_rules():
    assert score_cell(0.40, 0.40, 0.05) == 0
    assert score_cell(0.42, 0.40, 0.05) == 1
    assert score_cell(0.47, 0.40, 0.05) == 2
    assert score_cell(0.45, 0.40, 0.05) == 1  # boundary counts as within
    assert score_cell(0.38, 0.40, 0.05) == -1
    assert score_cell(0.30, 0.40, 0.05) == -2


def test_weighted_score_reproduces_published_table():
    doc = json.loads(fixture_text("table9_outcomes.json"))
    ssd = {s: (v["mean"], v["se"]) for s, v in doc["ssd"].items()}
    dsd = {(s, m): v for s, row in doc["dsd"].items() for m, v in row.items()}
    out = weighted_score(ssd, dsd, doc["speakers"], doc["maps"])
    assert out["matrix"] == {
        "1": {"M_1": 0, "M_2": 1, "M_3": 2, "M_4": 2},
        "2": {"M_1": -1, "M_2": 0, "M_3": 2, "M_4": 1},
        "3": {"M_1": -2, "M_2": -2, "M_3": 0, "M_4": -1},
        "4": {"M_1": -1, "M_2": 1, "M_3": -1, "M_4": 0},
    }
    assert out["totals"] == {"M_1": -4, "M_2": 0, "M_3": 3, "M_4": 2}
    assert out["ranking"] == ["M_3", "M_4", "M_2", "M_1"]


def test_weighted_score_structure_properties():
    speakers = ["1", "2"]
    maps = ["M_1", "M_2"]
    ssd = {"1": (0.5, 0.1), "2": (0.5, 0.1)}
    dsd = {("1", "M_2"): 0.5, ("2", "M_1"): 0.9}
    out = weighted_score(ssd, dsd, speakers, maps)
    for q in speakers:
        assert out["matrix"][q][f"M_{q}"] == 0
        for m in maps:
            assert out["matrix"][q][m] in (-2, -1, 0, 1, 2)


def test_build_word_network_dedupes_variants(inventory, letters):
    m = load_map("M_1", inventory)
    net = build_word_network(letters, m)
    words = dict(net.words)
    # O has three pronunciations but two collapse to the same garb string
    assert len(words["O"]) == 2
    assert all(v[0] == "sil" and v[-1] == "sil" for v in words["O"])
    assert set(net.labels()) <= {lab for lab, _ in m.visemes} | {"garb", "sil"}


def test_run_experiment_validates_inputs_before_training(inventory, letters):
    spec = make_spec((1,), 1, 1, SPEAKERS)
    with pytest.raises(ConfigurationError):
        run_experiment(spec, {}, {(1,): load_map("M_1", inventory)}, letters)
    with pytest.raises(ConfigurationError):
        run_experiment(spec, {1: object()}, {}, letters)


def test_run_experiment_tiny_end_to_end(inventory, tiny_lexicon, tiny_corpus):
    from visemelab.clustering import cluster
    from visemelab.alignment import ConfusionMatrix
    cm = ConfusionMatrix(inventory)
    for ph in ("b", "iy", "d", "ey", "f", "ow"):
        cm.observe_emission(ph)
        cm.increment(ph, ph, 1)
    p2v = cluster(cm, "M_1")
    spec = make_spec((1,), 1, 1, (1,) + SPEAKERS[1:])
    cfg = TrainingConfig(iterations=2, mix_schedule={}, variance_floor_scale=0.1)
    folds = run_experiment(spec, {1: tiny_corpus}, {(1,): p2v}, tiny_lexicon, cfg, k=2)
    assert len(folds) == 2
    assert all(0 <= r.correct <= r.classified == 3 for r in folds)


def test_phoneme_confusions_tiny(inventory, tiny_lexicon, tiny_corpus):
    cfg = TrainingConfig(iterations=2, mix_schedule={}, variance_floor_scale=0.1)
    cm = phoneme_confusions(tiny_corpus, inventory, cfg, k=2)
    assert cm.emitted <= set(inventory.symbols())
    diag = sum(c for r, h, c in cm.nonzero() if r == h)
    assert diag > 0


def test_study_config_parsing():
    cfg = StudyConfig.from_json(fixture_text("quickstart_study.json"))
    assert cfg.speakers == [1, 2, 3, 4]
    assert cfg.delta == 6.0
    assert cfg.seeds == [7]
    assert set(cfg.families) == {"SSD", "DSD&D", "DSD", "MS", "SI"}
    assert cfg.hmm.iterations == 11
    doc = cfg.to_doc()
    assert doc["hmm"]["mix_schedule"] == {"3": 2, "5": 3, "7": 5}
    with pytest.raises(ConfigurationError):
        StudyConfig.from_json('{"families": ["WAT"]}')


def test_run_study_parallel_seeds_match_sequential():
    from visemelab.harness import run_study
    cfg = StudyConfig(
        speakers=[1, 2], dimension=3, recitations=2, seeds=[3, 4], families=["SSD"],
        hmm=TrainingConfig(iterations=2, mix_schedule={}, realign_after=0,
                           variance_floor_scale=0.2),
        phoneme_hmm=TrainingConfig(iterations=2, mix_schedule={}, realign_after=0,
                                   variance_floor_scale=0.05))
    sequential = run_study(cfg)
    cfg.workers = 2
    parallel = run_study(cfg)
    assert results_json(sequential) == results_json(parallel)


def test_report_of_empty_results():
    text = report_text({"seeds": {}, "aggregate": {}})
    assert isinstance(text, str)


def test_results_json_roundtrip():
    doc = {"config": {"speakers": [1]}, "seeds": {"7": {"families": {}}}, "aggregate": {}}
    text = results_json(doc)
    assert json.loads(text) == doc
