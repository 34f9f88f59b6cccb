"""Synthetic per-speaker feature corpora.

Stands in for tracked lip features: each speaker owns one Gaussian per
phoneme, utterances are silence-padded concatenations of per-phoneme
segments. Emissions are phoneme-conditioned, so a viseme class groups
genuinely different distributions and map quality shows up in recognition
scores. A single scalar delta controls how far one speaker's phoneme
means sit from another's.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass

import numpy as np

from .features import read_features_csv, read_features_vlf, write_features_csv, write_features_vlf
from .hmm import FeatureSequence
from .lexicon import SIL

MIN_SEGMENT_FRAMES = 3


def _token(value):
    return zlib.crc32(str(value).encode())


@dataclass
class SpeakerProfile:
    speaker_id: object
    dimension: int
    means: dict
    variances: dict
    durations: dict
    rng_token: int

    def phonemes(self):
        return sorted(self.means)


def make_speaker(speaker_id, inventory, dimension=10, seed=0, mean_scale=2.0):
    """Deterministic per-phoneme emission parameters for one speaker."""
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    rng = np.random.default_rng([seed, _token(speaker_id)])
    means = {}
    variances = {}
    durations = {}
    for ph in inventory.symbols():
        means[ph] = rng.normal(0.0, mean_scale, dimension)
        variances[ph] = rng.uniform(0.8, 1.2, dimension)
        durations[ph] = rng.uniform(6.0, 10.0)
    return SpeakerProfile(speaker_id, dimension, means, variances, durations,
                          rng_token=_token((seed, speaker_id)))


def perturb_speaker(base, delta, seed, speaker_id=None):
    """Displace every phoneme mean by delta times the per-dimension stddev
    along one deterministic +/-1 direction vector. delta=0 is the identity.

    A single shared direction keeps the within-speaker phoneme geometry
    intact, so delta moves speakers apart without changing how confusable
    a speaker's own phonemes are with each other."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    rng = np.random.default_rng([seed, base.rng_token])
    new_id = base.speaker_id if speaker_id is None else speaker_id
    direction = rng.integers(0, 2, base.dimension) * 2.0 - 1.0
    means = {}
    for ph in base.phonemes():
        means[ph] = base.means[ph] + delta * np.sqrt(base.variances[ph]) * direction
    return SpeakerProfile(new_id, base.dimension, means,
                          {ph: v.copy() for ph, v in base.variances.items()},
                          dict(base.durations),
                          rng_token=_token((seed, new_id, base.rng_token)))


@dataclass
class Utterance:
    word: str
    recitation: int
    features: FeatureSequence
    phonemes: tuple


@dataclass
class Corpus:
    speaker_id: object
    dimension: int
    recitations: int
    utterances: list

    def __len__(self):
        return len(self.utterances)

    def recitation(self, r):
        return [u for u in self.utterances if u.recitation == r]


def _segment_length(rng, mean_duration):
    p = min(1.0, 1.0 / max(mean_duration - 2.0, 1.0))
    return MIN_SEGMENT_FRAMES - 1 + int(rng.geometric(p))


def generate_corpus(profile, lexicon, recitations=7, seed=0):
    """One corpus: every word of the lexicon uttered `recitations` times."""
    words = sorted(lexicon.words())
    utterances = []
    for r in range(1, recitations + 1):
        for wi, word in enumerate(words):
            rng = np.random.default_rng([seed, profile.rng_token, r, wi])
            variants = lexicon.pronunciations(word)
            pron = variants[int(rng.integers(len(variants)))]
            transcription = (SIL,) + tuple(pron) + (SIL,)
            segments = []
            for ph in transcription:
                n = _segment_length(rng, profile.durations[ph])
                noise = rng.standard_normal((n, profile.dimension))
                segments.append(profile.means[ph] + np.sqrt(profile.variances[ph]) * noise)
            frames = np.concatenate(segments, axis=0)
            utterances.append(Utterance(word, r, FeatureSequence(frames, transcription), transcription))
    return Corpus(profile.speaker_id, profile.dimension, recitations, utterances)


def save_corpus(corpus, out_dir, fmt="vlf"):
    """Write feature files plus a JSON manifest."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for u in corpus.utterances:
        ext = "vlf" if fmt == "vlf" else "csv"
        fname = f"r{u.recitation:02d}_{u.word}.{ext}"
        path = os.path.join(out_dir, fname)
        if fmt == "vlf":
            write_features_vlf(path, u.features.frames)
        else:
            write_features_csv(path, u.features.frames)
        entries.append({
            "word": u.word,
            "recitation": u.recitation,
            "file": fname,
            "frames": int(u.features.frames.shape[0]),
            "phonemes": list(u.phonemes),
        })
    manifest = {
        "speaker": str(corpus.speaker_id),
        "dimension": corpus.dimension,
        "recitations": corpus.recitations,
        "format": fmt,
        "utterances": entries,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def load_corpus(corpus_dir):
    with open(os.path.join(corpus_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    reader = read_features_vlf if manifest["format"] == "vlf" else read_features_csv
    utterances = []
    for e in manifest["utterances"]:
        frames = reader(os.path.join(corpus_dir, e["file"]))
        phonemes = tuple(e["phonemes"])
        utterances.append(Utterance(e["word"], e["recitation"], FeatureSequence(frames, phonemes), phonemes))
    return Corpus(manifest["speaker"], manifest["dimension"], manifest["recitations"], utterances)
