"""Experiment harness: the five experiment families under k-fold
cross-validation, correctness scoring, weighted map ranking, and the full
synthetic multi-speaker study.

An experiment is the triple (map source n, training speaker p, test
speaker q): the P2V map comes from speaker set n, viseme models are
trained on p's data and evaluated on q's over the whole-word network.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .alignment import accumulate_confusions, merge_confusions
from .clustering import cluster
from .hmm import (NetworkDecoder, PhoneLoopDecoder, TrainingConfig, WordNetwork, train_recipe)
from .lexicon import SIL, default_inventory, load_letter_lexicon
from .synth import generate_corpus, make_speaker, perturb_speaker
from .translation import apply_map, homophone_analysis

FAMILIES = ("SSD", "DSD&D", "DSD", "MS", "SI")


class ConfigurationError(ValueError):
    """Bad or incomplete experiment configuration, raised before any
    training starts."""


def map_designation(map_source):
    return "M_" + "".join(str(s) for s in sorted(map_source, key=str))


@dataclass(frozen=True)
class ExperimentSpec:
    map_source: tuple
    train_speaker: object
    test_speaker: object
    family: str

    def designation(self):
        return map_designation(self.map_source)

    def label(self):
        return f"{self.designation()}({self.train_speaker},{self.test_speaker})"


def make_spec(map_source, train_speaker, test_speaker, speakers):
    """Classify and validate an (n, p, q) triple against the speaker set."""
    n = tuple(sorted(map_source, key=str))
    p, q = train_speaker, test_speaker
    everyone = tuple(sorted(speakers, key=str))
    if not set(n) <= set(everyone) or p not in everyone or q not in everyone:
        raise ConfigurationError(f"unknown speakers in ({n}, {p}, {q})")
    if n == (p,) == (q,):
        family = "SSD"
    elif n == (p,) and p != q:
        family = "DSD&D"
    elif len(n) == 1 and n != (p,) and p == q:
        family = "DSD"
    elif n == everyone and p == q:
        family = "MS"
    elif n == tuple(s for s in everyone if s != q) and p == q:
        family = "SI"
    else:
        raise ConfigurationError(f"unsupported experiment configuration ({n}, {p}, {q})")
    return ExperimentSpec(n, p, q, family)


def enumerate_specs(family, speakers):
    """All (n, p, q) triples of one experiment family."""
    speakers = tuple(sorted(speakers, key=str))
    specs = []
    if family == "SSD":
        for s in speakers:
            specs.append(make_spec((s,), s, s, speakers))
    elif family == "DSD&D":
        for q in speakers:
            for n in speakers:
                if n != q:
                    specs.append(make_spec((n,), n, q, speakers))
    elif family == "DSD":
        for q in speakers:
            for n in speakers:
                if n != q:
                    specs.append(make_spec((n,), q, q, speakers))
    elif family == "MS":
        for q in speakers:
            specs.append(make_spec(speakers, q, q, speakers))
    elif family == "SI":
        for q in speakers:
            specs.append(make_spec(tuple(s for s in speakers if s != q), q, q, speakers))
    else:
        raise ConfigurationError(f"unknown family {family!r}")
    return specs


@dataclass(frozen=True)
class FoldResult:
    fold: int
    classified: int
    correct: int

    def __post_init__(self):
        if not 0 <= self.correct <= self.classified:
            raise ValueError("correct count out of range")

    @property
    def fraction(self):
        return self.correct / self.classified


def crossval_folds(corpus, k=7):
    """Fold i tests recitation i and trains on the rest."""
    recitations = sorted({u.recitation for u in corpus.utterances})
    if len(recitations) != k:
        raise ConfigurationError(f"corpus has {len(recitations)} recitations, expected {k}")
    folds = []
    for r in recitations:
        test = [u for u in corpus.utterances if u.recitation == r]
        train = [u for u in corpus.utterances if u.recitation != r]
        folds.append((train, test))
    return folds


def correctness(results):
    """Mean fold correctness and its standard error (n-1 convention)."""
    if not results:
        raise ValueError("no fold results")
    fractions = [r.fraction for r in results]
    n = len(fractions)
    mean = sum(fractions) / n
    if n == 1:
        return mean, 0.0
    var = sum((f - mean) ** 2 for f in fractions) / (n - 1)
    return mean, math.sqrt(var) / math.sqrt(n)


def score_cell(dsd_mean, ssd_mean, ssd_se):
    """One weighted-score cell: +/-1 inside the error bar, +/-2 outside,
    0 on an exact tie."""
    d = dsd_mean - ssd_mean
    if d == 0:
        return 0
    magnitude = 1 if abs(d) <= ssd_se else 2
    return magnitude if d > 0 else -magnitude


def weighted_score(ssd, dsd, speakers, maps, own_map=None):
    """Score matrix of DSD-vs-SSD outcomes plus per-map totals.

    ssd: {speaker: (mean, se)}; dsd: {(speaker, map designation): mean}.
    The speaker's own map scores 0 on the diagonal.
    """
    own_map = own_map or {s: map_designation((s,)) for s in speakers}
    matrix = {}
    totals = {m: 0 for m in maps}
    for q in speakers:
        row = {}
        mean, se = ssd[q]
        for m in maps:
            if own_map[q] == m:
                row[m] = 0
            else:
                row[m] = score_cell(dsd[(q, m)], mean, se)
            totals[m] += row[m]
        matrix[q] = row
    ranking = sorted(maps, key=lambda m: (-totals[m], m))
    return {"matrix": matrix, "totals": totals, "ranking": ranking}


def build_word_network(lexicon, p2v_map, with_silence=True):
    """Whole-word network: one chain per distinct viseme-string variant."""
    words = []
    for word in sorted(lexicon.words()):
        variants = []
        for pron in lexicon.pronunciations(word):
            labels = apply_map(pron, p2v_map)
            if with_silence:
                labels = (SIL,) + labels + (SIL,)
            if labels not in variants:
                variants.append(labels)
        words.append((word, variants))
    return WordNetwork(words)


def phoneme_confusions(corpus, inventory, hmm_config=None, k=7):
    """Live confusion matrix: cross-validated phoneme recognition.

    Per fold, phoneme models train on the train split and a free phone
    loop decodes the test split; recognised sequences are aligned against
    the reference transcriptions and confusions accumulated over folds.
    """
    hmm_config = hmm_config or TrainingConfig(iterations=7, realign_after=0, mix_schedule={})
    matrices = []
    for train, test in crossval_folds(corpus, k):
        labels = sorted({ph for u in train for ph in u.phonemes})
        pairs = [(u.features.frames, u.phonemes) for u in train]
        models, _ = train_recipe(pairs, labels, hmm_config)
        decoder = PhoneLoopDecoder(models)
        decoded = decoder.decode_batch([u.features.frames for u in test])
        aligned_pairs = [(u.phonemes, tuple(hyp)) for u, (hyp, _) in zip(test, decoded)]
        matrices.append(accumulate_confusions(aligned_pairs, inventory))
    return merge_confusions(matrices)


def run_experiment(spec, corpora, maps, lexicon, hmm_config=None, k=7, trainer=None):
    """One experiment across all folds; returns FoldResult list."""
    if spec.train_speaker not in corpora or spec.test_speaker not in corpora:
        raise ConfigurationError(f"missing corpus for experiment {spec.label()}")
    if spec.map_source not in maps:
        raise ConfigurationError(f"missing map {spec.designation()} for experiment {spec.label()}")
    hmm_config = hmm_config or TrainingConfig()
    p2v = maps[spec.map_source]
    network = build_word_network(lexicon, p2v)
    labels = sorted(network.labels())
    train_folds = crossval_folds(corpora[spec.train_speaker], k)
    test_folds = crossval_folds(corpora[spec.test_speaker], k)

    def train_fold(i):
        train = train_folds[i][0]
        pairs = [(u.features.frames, apply_map(u.phonemes, p2v)) for u in train]
        candidates = [
            [(SIL,) + apply_map(pron, p2v) + (SIL,) for pron in lexicon.pronunciations(u.word)]
            for u in train
        ]
        models, _ = train_recipe(pairs, labels, hmm_config, candidates)
        return models

    results = []
    for i in range(k):
        if trainer is not None:
            models = trainer(spec.map_source, spec.train_speaker, i, train_fold)
        else:
            models = train_fold(i)
        test = test_folds[i][1]
        decoder = NetworkDecoder(models, network)
        decoded = decoder.decode_batch([u.features.frames for u in test])
        correct = sum(word == u.word for (word, _), u in zip(decoded, test))
        results.append(FoldResult(i + 1, len(test), correct))
    return results


@dataclass
class StudyConfig:
    """Study defaults.

    Variance floors are raised well above the engine default: with 182
    words per speaker some mixture components see only a handful of
    frames and would otherwise collapse onto them.
    """

    speakers: list = field(default_factory=lambda: [1, 2, 3, 4])
    dimension: int = 10
    delta: float = 6.0
    mean_scale: float = 0.8
    recitations: int = 7
    seeds: list = field(default_factory=lambda: [7])
    families: list = field(default_factory=lambda: list(FAMILIES))
    hmm: TrainingConfig = field(default_factory=lambda: TrainingConfig(variance_floor_scale=0.2))
    phoneme_hmm: TrainingConfig = field(
        default_factory=lambda: TrainingConfig(iterations=7, realign_after=0, mix_schedule={},
                                               variance_floor_scale=0.01))
    workers: int = 1

    @staticmethod
    def from_json(text):
        doc = json.loads(text)
        cfg = StudyConfig()
        for key in ("speakers", "dimension", "delta", "mean_scale", "recitations",
                    "seeds", "families", "workers"):
            if key in doc:
                setattr(cfg, key, doc[key])
        for key, target in (("hmm", "hmm"), ("phoneme_hmm", "phoneme_hmm")):
            if key in doc:
                sub = doc[key]
                tc = TrainingConfig()
                for f in ("states", "iterations", "realign_after", "variance_floor_scale"):
                    if f in sub:
                        setattr(tc, f, sub[f])
                if "mix_schedule" in sub:
                    tc.mix_schedule = {int(k): int(v) for k, v in sub["mix_schedule"].items()}
                setattr(cfg, target, tc)
        unknown = [f for f in cfg.families if f not in FAMILIES]
        if unknown:
            raise ConfigurationError(f"unknown families {unknown}")
        return cfg

    def to_doc(self):
        def tc_doc(tc):
            return {
                "states": tc.states,
                "iterations": tc.iterations,
                "realign_after": tc.realign_after,
                "mix_schedule": {str(k): v for k, v in sorted(tc.mix_schedule.items())},
                "variance_floor_scale": tc.variance_floor_scale,
            }
        return {
            "speakers": list(self.speakers),
            "dimension": self.dimension,
            "delta": self.delta,
            "mean_scale": self.mean_scale,
            "recitations": self.recitations,
            "seeds": list(self.seeds),
            "families": list(self.families),
            "hmm": tc_doc(self.hmm),
            "phoneme_hmm": tc_doc(self.phoneme_hmm),
        }


def needed_map_sources(families, speakers):
    sources = set()
    for family in families:
        for spec in enumerate_specs(family, speakers):
            sources.add(spec.map_source)
    return sorted(sources)


def _seed_block(config, seed, lexicon, inv, say):
    """Everything one seed contributes: corpora, live maps, experiments."""
    speakers = tuple(sorted(config.speakers, key=str))
    say(f"seed {seed}: synthesising corpora")
    base = make_speaker("base", inv, config.dimension, seed, config.mean_scale)
    corpora = {}
    for s in speakers:
        profile = perturb_speaker(base, config.delta, seed=_speaker_seed(s), speaker_id=s)
        corpora[s] = generate_corpus(profile, lexicon, config.recitations, seed)
    say(f"seed {seed}: deriving confusion matrices")
    confusions = {s: phoneme_confusions(corpora[s], inv, config.phoneme_hmm, config.recitations)
                  for s in speakers}
    maps = {}
    homophones = {}
    for source in needed_map_sources(config.families, speakers):
        designation = map_designation(source)
        merged = merge_confusions([confusions[s] for s in source])
        p2v = cluster(merged, designation)
        maps[source] = p2v
        T, _ = homophone_analysis(lexicon, p2v)
        homophones[designation] = T
    block = {
        "maps": {map_designation(src): json.loads(maps[src].to_json_text()) for src in maps},
        "homophones": homophones,
        "families": {},
    }
    cache = {}

    def trainer(source, p, fold, build):
        key = (source, p, fold)
        if key not in cache:
            cache[key] = build(fold)
        return cache[key]

    for family in config.families:
        say(f"seed {seed}: family {family}")
        entries = []
        for spec in enumerate_specs(family, speakers):
            folds = run_experiment(spec, corpora, maps, lexicon, config.hmm,
                                   config.recitations, trainer)
            mean, se = correctness(folds)
            entries.append({
                "map_source": [str(s) for s in spec.map_source],
                "train_speaker": str(spec.train_speaker),
                "test_speaker": str(spec.test_speaker),
                "label": spec.label(),
                "folds": [{"fold": r.fold, "classified": r.classified, "correct": r.correct}
                          for r in folds],
                "mean": mean,
                "se": se,
            })
        block["families"][family] = entries
    if "SSD" in block["families"] and "DSD" in block["families"]:
        ssd = {e["test_speaker"]: (e["mean"], e["se"]) for e in block["families"]["SSD"]}
        dsd = {(e["test_speaker"], "M_" + "".join(e["map_source"])): e["mean"]
               for e in block["families"]["DSD"]}
        map_names = sorted({m for _, m in dsd} | {map_designation((s,)) for s in speakers})
        own = {str(s): map_designation((s,)) for s in speakers}
        block["weighted"] = weighted_score(
            {str(s): ssd[str(s)] for s in speakers}, dsd,
            [str(s) for s in speakers], map_names, own)
    return block


def _seed_job(args):
    config, seed, lexicon, inv = args
    return seed, _seed_block(config, seed, lexicon, inv, lambda msg: None)


def run_study(config, lexicon=None, inventory=None, progress=None):
    """The full multi-speaker study over all configured seeds.

    Per seed: synthesise speaker corpora at the configured divergence,
    derive live P2V maps from cross-validated phoneme recognition, then
    run every requested experiment family. Seeds may run in parallel
    worker processes; the assembled document is identical either way.
    """
    inv = inventory or default_inventory()
    lexicon = lexicon or load_letter_lexicon()
    say = progress or (lambda msg: None)
    doc = {"config": config.to_doc(), "seeds": {}, "aggregate": {}}
    if config.workers > 1 and len(config.seeds) > 1:
        from concurrent.futures import ProcessPoolExecutor
        jobs = [(config, seed, lexicon, inv) for seed in config.seeds]
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            blocks = dict(pool.map(_seed_job, jobs))
        for seed in config.seeds:
            doc["seeds"][str(seed)] = blocks[seed]
    else:
        for seed in config.seeds:
            doc["seeds"][str(seed)] = _seed_block(config, seed, lexicon, inv, say)
    doc["aggregate"] = _aggregate(doc["seeds"], config.families)
    doc["reference"] = {
        "reported_ssd_correctness_speaker1": 0.159,
        "reported_ssd_correctness_speaker4": 0.384,
    }
    return doc


def _speaker_seed(speaker):
    return 1000 + int("".join(c for c in str(speaker) if c.isdigit()) or 0)


def _aggregate(seed_blocks, families):
    agg = {"families": {}}
    for family in families:
        means = []
        by_speaker = {}
        for block in seed_blocks.values():
            for entry in block["families"].get(family, []):
                means.append(entry["mean"])
                by_speaker.setdefault(entry["test_speaker"], []).append(entry["mean"])
        if means:
            agg["families"][family] = {
                "mean": sum(means) / len(means),
                "by_speaker": {s: sum(v) / len(v) for s, v in sorted(by_speaker.items())},
            }
    return agg


def results_json(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def report_text(doc):
    """Plain-text summary: per-family correctness tables, homophone
    counts, weighted scores."""
    lines = []
    agg = doc.get("aggregate", {}).get("families", {})
    if agg:
        lines.append("Correctness by family (mean over folds, specs and seeds)")
        for family in FAMILIES:
            if family in agg:
                a = agg[family]
                per_speaker = "  ".join(f"Sp{s}={v:.3f}" for s, v in a["by_speaker"].items())
                lines.append(f"  {family:7s} mean={a['mean']:.3f}  {per_speaker}")
        lines.append("")
    for seed, block in sorted(doc.get("seeds", {}).items()):
        lines.append(f"Seed {seed}")
        homophones = block.get("homophones", {})
        if homophones:
            lines.append("  Unique words (T) per map: "
                         + "  ".join(f"{m}={t}" for m, t in sorted(homophones.items())))
        for family, entries in sorted(block.get("families", {}).items()):
            lines.append(f"  {family}")
            for e in entries:
                lines.append(f"    {e['label']:18s} {e['mean']:.3f} +/- {e['se']:.3f}")
        if "weighted" in block:
            w = block["weighted"]
            lines.append("  Weighted scores: "
                         + "  ".join(f"{m}={w['totals'][m]:+d}" for m in sorted(w["totals"]))
                         + f"  ranking: {' > '.join(w['ranking'])}")
        lines.append("")
    ref = doc.get("reference", {})
    if ref:
        lines.append("Reported single-speaker correctness values for reference: "
                     + ", ".join(f"{k}={v}" for k, v in sorted(ref.items())))
    return "\n".join(lines) + "\n"
