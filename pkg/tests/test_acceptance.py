"""Acceptance suite: one criterion per test, each printing a PASS line.

Criterion 2's published unique-word counts for M_2, M_3, M_4 and M_124
cannot be reached by any letter lexicon under the declared homophone
rule: the published viseme groupings themselves force letter collisions
past those targets. Worked example for M_3 (target 24, tolerance 2):
its classes {d p t} and {ey iy} force D=P=T, and {b s}, {ey iy}, {l m},
{f n} with the fixed letter names force B=C, A=E, G=J, L=M, F=N, so at
most 26 - 7 = 19 unique words remain, under any variant set (extra
variants only merge further). The published table is also internally
inconsistent: the M_1234 and M_124 groupings differ only by swapping f
and m between a cluster and a singleton, which cannot move the count by
more than about one, yet they are listed as 14 and 20. Those four
parameters are therefore strict expected failures.
"""

import json
import random
import time

import numpy as np
import pytest

from oracles import enum_path_lls, logsumexp, oracle_cluster, random_confusions, rng_models
from visemelab.clustering import cluster, validate_map
from visemelab.fixtures import (CONFUSION_SOURCES, MAP_DESIGNATIONS, fixture_text,
                                load_confusions, load_map, load_map_text)
from visemelab.harness import StudyConfig, results_json, run_study, weighted_score
from visemelab.hmm import (TrainingConfig, composite_forward_ll, composite_viterbi, train_recipe)
from visemelab.translation import apply_map, homophone_analysis

PUBLISHED_T = {
    "M_1": 19, "M_2": 19, "M_3": 24, "M_4": 24, "M_1234": 14,
    "M_234": 17, "M_134": 18, "M_124": 20, "M_123": 15,
}
UNREACHABLE_T = {"M_2", "M_3", "M_4", "M_124"}


def conclude(name, ok, detail=""):
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------- criterion 1

def test_criterion_1_golden_maps_byte_for_byte(inventory):
    start = time.perf_counter()
    for designation in MAP_DESIGNATIONS:
        cm = load_confusions(CONFUSION_SOURCES[designation], inventory)
        got = cluster(cm, designation=designation).to_json_text()
        want = load_map_text(designation)
        assert got == want, f"{designation} diverges from golden fixture"
    elapsed = time.perf_counter() - start
    conclude("1 map fixtures", elapsed < 1.0, f"(9 maps, {elapsed:.2f}s)")


# ---------------------------------------------------------------- criterion 2

@pytest.mark.parametrize("designation", [
    pytest.param(d, marks=pytest.mark.xfail(
        strict=True,
        reason="published T unreachable: the published partition forces more "
               "letter collisions than the target allows; see module docstring")
    ) if d in UNREACHABLE_T else d
    for d in MAP_DESIGNATIONS
])
def test_criterion_2_homophone_counts(designation, inventory, letters):
    T, _ = homophone_analysis(letters, load_map(designation, inventory))
    target = PUBLISHED_T[designation]
    conclude(f"2 homophones {designation}", abs(T - target) <= 2,
             f"(T={T}, published {target}, tolerance 2)")


def test_criterion_2_bd_collision_exact(inventory, letters):
    m2 = load_map("M_2", inventory)
    same = apply_map(("b", "iy"), m2) == apply_map(("d", "iy"), m2)
    _, groups = homophone_analysis(letters, m2)
    grouped = any("B" in g and "D" in g for g in groups)
    conclude("2 B/D collision", same and grouped)


# ---------------------------------------------------------------- criterion 3

def test_criterion_3_weighted_scoring_published_outcomes():
    start = time.perf_counter()
    doc = json.loads(fixture_text("table9_outcomes.json"))
    ssd = {s: (v["mean"], v["se"]) for s, v in doc["ssd"].items()}
    dsd = {(s, m): v for s, row in doc["dsd"].items() for m, v in row.items()}
    out = weighted_score(ssd, dsd, doc["speakers"], doc["maps"])
    ok = (out["totals"] == {"M_1": -4, "M_2": 0, "M_3": 3, "M_4": 2}
          and out["ranking"] == ["M_3", "M_4", "M_2", "M_1"]
          and all(out["matrix"][q][m] in (-2, -1, 0, 1, 2)
                  for q in doc["speakers"] for m in doc["maps"]))
    elapsed = time.perf_counter() - start
    conclude("3 weighted scoring", ok and elapsed < 1.0,
             f"(totals {out['totals']}, {elapsed:.2f}s)")


# ---------------------------------------------------------------- criterion 4

def test_criterion_4_clustering_oracle(inventory):
    start = time.perf_counter()
    rng = random.Random(2024)
    for trial in range(200):
        cm = random_confusions(rng, inventory, max_phones=12, dense=trial % 3 == 0)
        got = cluster(cm, "M")
        classes = [phons for _, phons in got.visemes]
        assert classes == oracle_cluster(cm, inventory), f"trial {trial}"
        assert validate_map(got, inventory) == []
        for _, phons in got.visemes:
            for i, p in enumerate(phons):
                assert inventory.category(p) == inventory.category(phons[0])
                for q in phons[i + 1:]:
                    assert cm.count(p, q) > 0 and cm.count(q, p) > 0
    elapsed = time.perf_counter() - start
    conclude("4 clustering oracle", elapsed < 30.0, f"(200 matrices, {elapsed:.1f}s)")


# ---------------------------------------------------------------- criterion 5

def test_criterion_5_hmm_core_properties():
    start = time.perf_counter()
    rng = np.random.default_rng(99)

    # Viterbi equals exhaustive enumeration; forward dominates Viterbi
    for states, n_models, mixes in [(1, 1, 1), (2, 1, 2), (2, 2, 1), (3, 1, 1),
                                    (4, 1, 1), (1, 2, 2), (2, 2, 2), (3, 2, 1)]:
        labels = [f"u{i}" for i in range(n_models)]
        ms = rng_models(rng, labels, states=states, mixes=mixes)
        for T in range(states * n_models, 7):
            frames = rng.normal(0, 2, (T, 2))
            paths = enum_path_lls(ms, labels, frames)
            vit, _, _ = composite_viterbi(ms, frames, labels)
            fwd = composite_forward_ll(ms, frames, labels)
            assert vit == pytest.approx(max(paths), rel=1e-10)
            assert fwd == pytest.approx(logsumexp(paths), rel=1e-10)
            assert fwd >= vit - 1e-12

    # full 11-iteration schedule: non-decreasing corpus log-likelihood
    corpus = []
    for _ in range(8):
        T = int(rng.integers(22, 32))
        drift = np.linspace(0, 3, T)[:, None]
        corpus.append((rng.normal(0, 1, (T, 2)) + drift, ("a", "b")))
    ms, history = train_recipe(corpus, ["a", "b"], TrainingConfig())
    lls = history["log_likelihoods"]
    assert len(lls) == 11
    monotone = all(after >= before - 1e-6 * abs(before)
                   for before, after in zip(lls, lls[1:]))
    assert monotone, f"log-likelihoods not monotone: {lls}"

    # stochasticity preserved to 1e-9 after the full recipe
    for lab in ms.labels():
        model = ms[lab]
        assert np.all(np.abs(model.transitions.sum(axis=1) - 1.0) < 1e-9)
        for g in model.states:
            assert abs(g.weights.sum() - 1.0) < 1e-9
            assert g.n_components == 5

    # forward >= viterbi on fresh random cases
    for _ in range(25):
        ms2 = rng_models(rng, ["x", "y"], states=3)
        frames = rng.normal(0, 2, (int(rng.integers(6, 40)), 2))
        fwd = composite_forward_ll(ms2, frames, ("x", "y"))
        vit, _, _ = composite_viterbi(ms2, frames, ("x", "y"))
        assert fwd >= vit - 1e-12

    elapsed = time.perf_counter() - start
    conclude("5 hmm core", elapsed < 60.0, f"({elapsed:.1f}s)")


# ------------------------------------------------------------ criteria 6 & 7

@pytest.fixture(scope="module")
def study_runs():
    config = StudyConfig(seeds=[7, 8, 9])
    started = time.perf_counter()
    first = run_study(config)
    first_elapsed = time.perf_counter() - started
    second = run_study(config)
    return first, second, first_elapsed


@pytest.mark.slow
def test_criterion_6_end_to_end_study(study_runs):
    doc, _, elapsed = study_runs
    agg = doc["aggregate"]["families"]
    ssd = agg["SSD"]["mean"]
    dsdd = agg["DSD&D"]["mean"]
    dsd = agg["DSD"]["mean"]
    ms = agg["MS"]["mean"]
    si = agg["SI"]["mean"]
    detail = (f"(SSD={ssd:.3f} DSD&D={dsdd:.3f} DSD={dsd:.3f} "
              f"MS={ms:.3f} SI={si:.3f}, {elapsed:.0f}s)")
    conclude("6a SSD >= 0.8", ssd >= 0.8, detail)
    conclude("6b DSD&D <= 0.15", dsdd <= 0.15, detail)
    conclude("6c DSD within 15 points of SSD", abs(ssd - dsd) <= 0.15, detail)
    conclude("6d MS/SI >= DSD&D and within 20 points of SSD",
             ms >= dsdd and si >= dsdd and ssd - ms <= 0.20 and ssd - si <= 0.20, detail)
    conclude("6 runtime < 10 min", elapsed < 600.0, f"({elapsed:.0f}s)")


@pytest.mark.slow
def test_criterion_7_determinism(study_runs):
    first, second, _ = study_runs
    conclude("7 determinism", results_json(first) == results_json(second),
             "(two runs, byte-identical JSON)")
