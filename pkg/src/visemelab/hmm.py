"""Left-to-right continuous-density HMMs with Gaussian-mixture emissions.

Implements the training recipe used throughout: flat start from global
corpus statistics, embedded Baum-Welch re-estimation over composite
utterance chains, forced alignment, incremental mixture splitting, and
Viterbi recognition over an isolated-word network.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

LOG_2PI = np.log(2.0 * np.pi)
_TINY_OCC = 1e-8


class HmmError(RuntimeError):
    pass


class NoPathError(HmmError):
    """No admissible state path (e.g. sequence shorter than the chain)."""


@dataclass
class FeatureSequence:
    frames: np.ndarray
    labels: tuple = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] == 0:
            raise ValueError("frames must be a nonempty (T, D) array")

    @property
    def dimension(self):
        return self.frames.shape[1]


class GaussianMixture:
    """Diagonal-covariance mixture: weights (K,), means/variances (K, D)."""

    def __init__(self, weights, means, variances):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        self.variances = np.asarray(variances, dtype=np.float64)
        if self.means.shape != self.variances.shape or self.weights.shape[0] != self.means.shape[0]:
            raise ValueError("inconsistent mixture shapes")
        if np.any(self.weights <= 0):
            raise ValueError("mixture weights must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        if np.any(self.variances <= 0):
            raise ValueError("variances must be positive")

    @property
    def n_components(self):
        return self.weights.shape[0]

    @property
    def dimension(self):
        return self.means.shape[1]

    def component_log_densities(self, frames):
        """(T, K) per-component log densities including log weights."""
        inv = 1.0 / self.variances
        const = -0.5 * (self.dimension * LOG_2PI + np.log(self.variances).sum(axis=1))
        diff = frames[:, None, :] - self.means[None, :, :]
        quad = np.einsum("tkd,kd->tk", diff * diff, inv)
        return np.log(self.weights)[None, :] + const[None, :] - 0.5 * quad

    def log_density(self, frames):
        comp = self.component_log_densities(frames)
        m = comp.max(axis=1)
        return m + np.log(np.exp(comp - m[:, None]).sum(axis=1))

    def copy(self):
        return GaussianMixture(self.weights.copy(), self.means.copy(), self.variances.copy())


def left_right_transitions(n_states, stay=0.5):
    """(S+2)x(S+2) row-stochastic matrix over entry, emitting states, exit."""
    size = n_states + 2
    trans = np.zeros((size, size))
    trans[0, 1] = 1.0
    for i in range(1, n_states + 1):
        trans[i, i] = stay
        trans[i, i + 1] = 1.0 - stay
    trans[-1, -1] = 1.0
    return trans


class HmmModel:
    def __init__(self, label, states, transitions):
        self.label = label
        self.states = list(states)
        self.transitions = np.asarray(transitions, dtype=np.float64)
        s = len(self.states)
        if self.transitions.shape != (s + 2, s + 2):
            raise ValueError("transition matrix shape mismatch")
        rows = self.transitions.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-9):
            raise ValueError("transition rows must sum to 1")
        if np.any(np.tril(self.transitions, -1) != 0):
            raise ValueError("backward transitions are not allowed")

    @property
    def n_states(self):
        return len(self.states)

    def log_self(self):
        idx = np.arange(1, self.n_states + 1)
        with np.errstate(divide="ignore"):
            return np.log(self.transitions[idx, idx])

    def log_adv(self):
        idx = np.arange(1, self.n_states + 1)
        with np.errstate(divide="ignore"):
            return np.log(self.transitions[idx, idx + 1])

    def copy(self):
        return HmmModel(self.label, [g.copy() for g in self.states], self.transitions.copy())


class ModelSet:
    """Trained models keyed by label, sharing dimension and variance floor."""

    def __init__(self, models, variance_floor):
        self.models = {m.label: m for m in models}
        self.variance_floor = np.asarray(variance_floor, dtype=np.float64)

    @property
    def dimension(self):
        return self.variance_floor.shape[0]

    def labels(self):
        return sorted(self.models)

    def __contains__(self, label):
        return label in self.models

    def __getitem__(self, label):
        return self.models[label]

    def copy(self):
        return ModelSet([m.copy() for m in self.models.values()], self.variance_floor.copy())

    def to_json_text(self):
        doc = {
            "dimension": int(self.dimension),
            "variance_floor": self.variance_floor.tolist(),
            "models": [
                {
                    "label": lab,
                    "transitions": self.models[lab].transitions.tolist(),
                    "states": [
                        {
                            "weights": g.weights.tolist(),
                            "means": g.means.tolist(),
                            "variances": g.variances.tolist(),
                        }
                        for g in self.models[lab].states
                    ],
                }
                for lab in self.labels()
            ],
        }
        return json.dumps(doc, indent=2) + "\n"


def model_set_from_json(text):
    doc = json.loads(text)
    models = []
    for m in doc["models"]:
        states = [GaussianMixture(s["weights"], s["means"], s["variances"]) for s in m["states"]]
        models.append(HmmModel(m["label"], states, np.asarray(m["transitions"])))
    return ModelSet(models, np.asarray(doc["variance_floor"]))


def flat_start(corpus, labels, states=3, mixes=1, floor_scale=1e-4):
    """Identical models from global corpus statistics, uniform transitions."""
    if not corpus:
        raise ValueError("empty corpus")
    frames = np.concatenate([np.asarray(f, dtype=np.float64) for f in corpus], axis=0)
    mean = frames.mean(axis=0)
    var = frames.var(axis=0)
    if np.any(var <= 0):
        raise HmmError("degenerate corpus: zero variance dimension")
    floor = floor_scale * var
    models = []
    for label in sorted(labels):
        gm_states = [
            GaussianMixture(np.full(mixes, 1.0 / mixes), np.tile(mean, (mixes, 1)), np.tile(var, (mixes, 1)))
            for _ in range(states)
        ]
        models.append(HmmModel(label, gm_states, left_right_transitions(states)))
    return ModelSet(models, floor)


def split_mixtures(model_set, target_components=5):
    """Split the heaviest component (weights halved, means nudged by
    +/- 0.2 stddev) until every state has `target_components`."""
    new_set = model_set.copy()
    for model in new_set.models.values():
        for si, g in enumerate(model.states):
            if g.n_components > target_components:
                raise HmmError(f"{model.label} state {si} already has {g.n_components} components")
            w, mu, var = g.weights, g.means, g.variances
            while w.shape[0] < target_components:
                k = int(np.argmax(w))
                sd = np.sqrt(var[k])
                w = np.concatenate([w[:k], [w[k] / 2, w[k] / 2], w[k + 1:]])
                mu = np.concatenate([mu[:k], [mu[k] + 0.2 * sd, mu[k] - 0.2 * sd], mu[k + 1:]])
                var = np.concatenate([var[:k], [var[k], var[k]], var[k + 1:]])
            model.states[si] = GaussianMixture(w / w.sum(), mu, var)
    return new_set


class _Composite:
    """Concatenation of a transcription's models into one chain."""

    def __init__(self, model_set, transcription):
        if not transcription:
            raise ValueError("empty transcription")
        self.transcription = tuple(transcription)
        for lab in self.transcription:
            if lab not in model_set:
                raise HmmError(f"no model for label {lab!r}")
        self.models = [model_set[lab] for lab in self.transcription]
        self.log_self = np.concatenate([m.log_self() for m in self.models])
        self.log_adv = np.concatenate([m.log_adv() for m in self.models])
        self.n_states = self.log_self.shape[0]
        self.owner = np.concatenate(
            [np.full(m.n_states, i, dtype=np.int64) for i, m in enumerate(self.models)]
        )

    def emissions(self, frames):
        by_label = {}
        for m in self.models:
            if m.label not in by_label:
                by_label[m.label] = np.stack([g.log_density(frames) for g in m.states], axis=1)
        return np.concatenate([by_label[lab] for lab in self.transcription], axis=1)


def composite_forward_ll(model_set, frames, transcription):
    comp = _Composite(model_set, transcription)
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[0] < comp.n_states:
        raise NoPathError("sequence shorter than the minimum chain duration")
    logb = comp.emissions(frames)
    _, ll = _kernels.chain_forward(logb, comp.log_self, comp.log_adv)
    return float(ll)


def composite_viterbi(model_set, frames, transcription):
    comp = _Composite(model_set, transcription)
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[0] < comp.n_states:
        raise NoPathError("sequence shorter than the minimum chain duration")
    logb = comp.emissions(frames)
    ll, path = _kernels.chain_viterbi(logb, comp.log_self, comp.log_adv)
    if not np.isfinite(ll):
        raise NoPathError("no admissible path")
    return float(ll), path, comp


def force_align(model_set, frames, transcription):
    """Viterbi segmentation against a known transcription.

    Returns (segments, log_likelihood) where segments are
    (label, start_frame, end_frame_exclusive) triples.
    """
    ll, path, comp = composite_viterbi(model_set, frames, transcription)
    owners = comp.owner[path]
    segments = []
    start = 0
    for t in range(1, len(path)):
        if owners[t] != owners[t - 1]:
            segments.append((comp.transcription[owners[t - 1]], start, t))
            start = t
    segments.append((comp.transcription[owners[-1]], start, len(path)))
    return segments, float(ll)


def _pack_models(model_set, labels):
    """Pack per-label mixture parameters into dense arrays for the kernel.

    Requires a uniform state and component count across the labels, which
    every recipe in this package maintains.
    """
    first = model_set[labels[0]]
    S = first.n_states
    K = first.states[0].n_components
    D = first.states[0].dimension
    gm_const = np.empty((len(labels), S, K))
    gm_means = np.empty((len(labels), S, K, D))
    gm_inv_var = np.empty((len(labels), S, K, D))
    log_self = np.empty((len(labels), S))
    log_adv = np.empty((len(labels), S))
    for li, lab in enumerate(labels):
        model = model_set[lab]
        if model.n_states != S or any(g.n_components != K for g in model.states):
            raise HmmError("batched re-estimation needs uniform model topology")
        log_self[li] = model.log_self()
        log_adv[li] = model.log_adv()
        for s in range(S):
            g = model.states[s]
            gm_const[li, s] = np.log(g.weights) - 0.5 * (D * LOG_2PI + np.log(g.variances).sum(axis=1))
            gm_means[li, s] = g.means
            gm_inv_var[li, s] = 1.0 / g.variances
    return gm_const, gm_means, gm_inv_var, log_self, log_adv


def baum_welch(model_set, corpus, iterations=1):
    """Embedded re-estimation over (frames, transcription) pairs.

    Returns (new_model_set, log_likelihoods, flags): one total corpus
    log-likelihood per iteration, measured before that iteration's update;
    flags name (label, state) pairs kept unchanged for lack of occupancy.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    current = model_set.copy()
    frames_list = [np.asarray(f, dtype=np.float64) for f, _ in corpus]
    transcriptions = [tuple(t) for _, t in corpus]
    labels = sorted({lab for t in transcriptions for lab in t})
    for lab in labels:
        if lab not in current:
            raise HmmError(f"no model for label {lab!r}")
    n_states = current[labels[0]].n_states
    for frames, trans in zip(frames_list, transcriptions):
        if frames.shape[0] < n_states * len(trans):
            raise NoPathError(
                f"utterance of {frames.shape[0]} frames cannot traverse "
                f"{n_states * len(trans)} states")
    frames_all = np.concatenate(frames_list)
    counts = np.array([f.shape[0] for f in frames_list], dtype=np.int64)
    frame_end = np.cumsum(counts)
    frame_start = frame_end - counts
    lab_index = {lab: i for i, lab in enumerate(labels)}
    trans_flat = np.array([lab_index[lab] for t in transcriptions for lab in t], dtype=np.int64)
    trans_ptr = np.concatenate([[0], np.cumsum([len(t) for t in transcriptions])]).astype(np.int64)
    idle = [lab for lab in current.labels() if lab not in lab_index]

    lls_out = []
    flags = []
    for _ in range(iterations):
        gm_const, gm_means, gm_inv_var, log_self, log_adv = _pack_models(current, labels)
        L, S, K, D = gm_means.shape
        acc_occ = np.zeros((L, S, K))
        acc_x = np.zeros((L, S, K, D))
        acc_x2 = np.zeros((L, S, K, D))
        self_buf = np.zeros((L, S))
        adv_buf = np.zeros((L, S))
        per_utt = np.zeros(len(transcriptions))
        total = _kernels.embedded_pass(
            gm_const, gm_means, gm_inv_var, log_self, log_adv,
            frames_all, frame_start, frame_end, trans_flat, trans_ptr,
            acc_occ, acc_x, acc_x2, self_buf, adv_buf, per_utt)
        lls_out.append(float(total))
        for li, lab in enumerate(labels):
            model = current[lab]
            for s in range(S):
                g = model.states[s]
                comp_occ = acc_occ[li, s]
                state_occ = comp_occ.sum()
                if state_occ < _TINY_OCC:
                    flags.append((lab, s))
                    continue
                weights = np.maximum(comp_occ / state_occ, 1e-8)
                weights = weights / weights.sum()
                means = g.means.copy()
                variances = g.variances.copy()
                for k in range(K):
                    if comp_occ[k] < _TINY_OCC:
                        continue
                    means[k] = acc_x[li, s, k] / comp_occ[k]
                    var = acc_x2[li, s, k] / comp_occ[k] - means[k] ** 2
                    variances[k] = np.maximum(var, current.variance_floor)
                model.states[s] = GaussianMixture(weights, means, variances)
                arcs = self_buf[li, s] + adv_buf[li, s]
                if arcs > _TINY_OCC:
                    stay = self_buf[li, s] / arcs
                    model.transitions[s + 1, s + 1] = stay
                    model.transitions[s + 1, s + 2] = 1.0 - stay
        for lab in idle:
            for s in range(current[lab].n_states):
                flags.append((lab, s))
    return current, lls_out, flags


@dataclass
class WordNetwork:
    """Isolated-word network: each word lists viseme-label variants."""

    words: list

    def __post_init__(self):
        if not self.words:
            raise ValueError("empty word network")
        seen = set()
        for word, variants in self.words:
            if word in seen:
                raise ValueError(f"duplicate word {word!r}")
            seen.add(word)
            if not variants:
                raise ValueError(f"word {word!r} has no pronunciation variants")

    def labels(self):
        out = set()
        for _, variants in self.words:
            for v in variants:
                out.update(v)
        return out


class NetworkDecoder:
    """Caches per-network index arrays; decode() is then per-utterance."""

    def __init__(self, model_set, network):
        missing = {lab for lab in network.labels() if lab not in model_set}
        if missing:
            raise HmmError(f"network labels without models: {sorted(missing)}")
        self.model_set = model_set
        self.network = network
        self.labels = sorted({lab for lab in network.labels()})
        col = {}
        offset = 0
        for lab in self.labels:
            n = model_set[lab].n_states
            col[lab] = offset
            offset += n
        self.n_model_states = offset
        state_index = []
        log_self = []
        log_adv = []
        starts = []
        lengths = []
        self.chain_words = []
        for wi, (word, variants) in enumerate(network.words):
            for variant in variants:
                starts.append(len(state_index))
                n = 0
                for lab in variant:
                    model = model_set[lab]
                    state_index.extend(range(col[lab], col[lab] + model.n_states))
                    log_self.append(model.log_self())
                    log_adv.append(model.log_adv())
                    n += model.n_states
                lengths.append(n)
                self.chain_words.append(wi)
        self.state_index = np.asarray(state_index, dtype=np.int64)
        self.log_self = np.concatenate(log_self)
        self.log_adv = np.concatenate(log_adv)
        self.starts = np.asarray(starts, dtype=np.int64)
        self.lengths = np.asarray(lengths, dtype=np.int64)

    def _emissions(self, frames):
        blocks = []
        for lab in self.labels:
            model = self.model_set[lab]
            blocks.append(np.stack([g.log_density(frames) for g in model.states], axis=1))
        return np.concatenate(blocks, axis=1)

    def decode_batch(self, frames_list):
        """Decode several utterances; one emission pass over all frames.

        Returns a (word, log-likelihood) pair per utterance; ties go to
        the lexicographically smallest word."""
        frames_list = [np.asarray(f, dtype=np.float64) for f in frames_list]
        frames_all = np.concatenate(frames_list)
        counts = np.array([f.shape[0] for f in frames_list], dtype=np.int64)
        frame_end = np.cumsum(counts)
        frame_start = frame_end - counts
        logb = self._emissions(frames_all)
        scores = _kernels.network_scores_batch(
            logb, frame_start, frame_end, self.state_index,
            self.starts, self.lengths, self.log_self, self.log_adv)
        results = []
        for u in range(len(frames_list)):
            best_by_word = {}
            for chain, score in zip(self.chain_words, scores[u]):
                word = self.network.words[chain][0]
                if word not in best_by_word or score > best_by_word[word]:
                    best_by_word[word] = score
            best_word, best = None, -np.inf
            for word in sorted(best_by_word):
                if best_by_word[word] > best:
                    best_word, best = word, best_by_word[word]
            if best_word is None or not np.isfinite(best):
                raise NoPathError("no admissible path for any word")
            results.append((best_word, float(best)))
        return results

    def decode(self, frames):
        return self.decode_batch([frames])[0]


def viterbi_decode(model_set, network, frames):
    return NetworkDecoder(model_set, network).decode(frames)


class PhoneLoopDecoder:
    """Free loop over unit models with uniform inter-model transitions."""

    def __init__(self, model_set, labels=None):
        self.model_set = model_set
        self.labels = sorted(labels) if labels is not None else model_set.labels()
        offsets = [0]
        log_self = []
        log_adv = []
        for lab in self.labels:
            model = model_set[lab]
            offsets.append(offsets[-1] + model.n_states)
            log_self.append(model.log_self())
            log_adv.append(model.log_adv())
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.log_self = np.concatenate(log_self)
        self.log_adv = np.concatenate(log_adv)
        self.log_loop = -np.log(len(self.labels))
        self.model_of = np.concatenate(
            [np.full(model_set[lab].n_states, i, dtype=np.int64) for i, lab in enumerate(self.labels)])

    def _emissions(self, frames):
        blocks = []
        for lab in self.labels:
            model = self.model_set[lab]
            blocks.append(np.stack([g.log_density(frames) for g in model.states], axis=1))
        return np.concatenate(blocks, axis=1)

    def decode_batch(self, frames_list):
        frames_list = [np.asarray(f, dtype=np.float64) for f in frames_list]
        logb_all = self._emissions(np.concatenate(frames_list))
        results = []
        offset = 0
        for frames in frames_list:
            logb = logb_all[offset: offset + frames.shape[0]]
            offset += frames.shape[0]
            ll, path, bounds = _kernels.loop_viterbi(
                logb, self.offsets, self.log_self, self.log_adv, self.log_loop)
            if not np.isfinite(ll):
                raise NoPathError("no admissible path through the loop")
            sequence = [self.labels[self.model_of[path[0]]]]
            for t in range(1, len(path)):
                if bounds[t]:
                    sequence.append(self.labels[self.model_of[path[t]]])
            results.append((sequence, float(ll)))
        return results

    def decode(self, frames):
        return self.decode_batch([frames])[0]


@dataclass
class TrainingConfig:
    states: int = 3
    iterations: int = 11
    realign_after: int = 7
    mix_schedule: dict = field(default_factory=lambda: {3: 2, 5: 3, 7: 5})
    variance_floor_scale: float = 1e-4


def train_recipe(corpus, labels, config=None, variant_candidates=None):
    """Full training schedule over (frames, transcription) pairs.

    Flat start, then `iterations` embedded re-estimations; mixtures grow
    per `mix_schedule` (after the keyed iteration); after iteration
    `realign_after` each utterance with several candidate transcriptions
    is forced-aligned and relabelled with its best-scoring candidate.

    Returns (model_set, history) where history records per-iteration
    corpus log-likelihoods, empty-occupancy flags and realignment swaps.
    """
    config = config or TrainingConfig()
    corpus = [(np.asarray(f, dtype=np.float64), tuple(t)) for f, t in corpus]
    model_set = flat_start(
        [f for f, _ in corpus], labels, states=config.states,
        floor_scale=config.variance_floor_scale)
    lls = []
    all_flags = []
    realignments = 0
    for it in range(1, config.iterations + 1):
        model_set, ll, flags = baum_welch(model_set, corpus, iterations=1)
        lls.extend(ll)
        all_flags.extend(flags)
        if it in config.mix_schedule and it < config.iterations:
            model_set = split_mixtures(model_set, config.mix_schedule[it])
        if it == config.realign_after and variant_candidates is not None:
            for u, candidates in enumerate(variant_candidates):
                if len(candidates) <= 1:
                    continue
                frames, current = corpus[u]
                best, best_ll = current, -np.inf
                for cand in candidates:
                    cand = tuple(cand)
                    try:
                        ll_c, _, _ = composite_viterbi(model_set, frames, cand)
                    except NoPathError:
                        continue
                    if ll_c > best_ll:
                        best, best_ll = cand, ll_c
                if best != current:
                    corpus[u] = (frames, best)
                    realignments += 1
    history = {"log_likelihoods": lls, "flags": all_flags, "realignments": realignments}
    return model_set, history
