"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .alignment import ConfusionFormatError, parse_confusions
from .clustering import cluster, map_from_json, validate_map
from .harness import (ConfigurationError, StudyConfig, report_text, results_json, run_study)
from .hmm import (HmmError, NetworkDecoder, NoPathError, TrainingConfig, model_set_from_json,
                  train_recipe)
from .harness import build_word_network
from .lexicon import LexiconError, default_inventory, load_letter_lexicon, parse_lexicon
from .synth import generate_corpus, load_corpus, make_speaker, perturb_speaker, save_corpus
from .translation import TranslationError, apply_map, homophone_analysis


class UsageError(ValueError):
    pass


def _load_lexicon(args):
    if getattr(args, "lexicon", None):
        with open(args.lexicon) as fh:
            return parse_lexicon(fh.read())
    return load_letter_lexicon()


def _load_map(path):
    with open(path) as fh:
        p2v = map_from_json(fh.read(), default_inventory())
    problems = validate_map(p2v, default_inventory())
    if problems:
        raise UsageError(f"{path}: invalid map: {problems[0]}")
    return p2v


def cmd_cluster(args):
    inv = default_inventory()
    with open(args.confusions) as fh:
        cm = parse_confusions(fh.read(), inv)
    p2v = cluster(cm, designation=args.designation)
    text = p2v.to_json_text()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    if args.json:
        print(text, end="")
    else:
        print(f"P2V map {p2v.designation}")
        for label, phonemes in p2v.visemes:
            print(f"  /{label}/  " + " ".join(f"/{p}/" for p in phonemes))
        print("  /sil/  /sil/")
        print("  /garb/ " + " ".join(f"/{p}/" for p in p2v.garb))
    return 0


def cmd_translate(args):
    lexicon = _load_lexicon(args)
    p2v = _load_map(args.map)
    if args.word not in lexicon.entries:
        raise UsageError(f"word {args.word!r} not in lexicon")
    strings = [apply_map(pron, p2v) for pron in lexicon.pronunciations(args.word)]
    if args.json:
        print(json.dumps({"word": args.word, "viseme_strings": [list(s) for s in strings]}))
    else:
        for s in strings:
            print(" ".join(s))
    return 0


def cmd_homophones(args):
    lexicon = _load_lexicon(args)
    p2v = _load_map(args.map)
    T, groups = homophone_analysis(lexicon, p2v)
    collided = [g for g in groups if len(g) > 1]
    if args.json:
        print(json.dumps({"map": p2v.designation, "unique_words": T,
                          "groups": [list(g) for g in groups]}))
    else:
        print(f"T = {T}")
        for g in collided:
            print("  " + " ".join(g))
    return 0


def cmd_synth(args):
    inv = default_inventory()
    lexicon = _load_lexicon(args)
    base = make_speaker("base", inv, args.dimension, args.seed, args.mean_scale)
    profile = perturb_speaker(base, args.delta, seed=1000 + args.speaker, speaker_id=args.speaker)
    corpus = generate_corpus(profile, lexicon, args.recitations, args.seed)
    manifest = save_corpus(corpus, args.out, fmt=args.format)
    print(f"wrote {len(manifest['utterances'])} utterances to {args.out}")
    return 0


def _hmm_config(args):
    schedule = {}
    if args.mixtures >= 2:
        schedule[3] = 2
    if args.mixtures >= 3:
        schedule[5] = 3
    if args.mixtures > 3:
        schedule[7] = args.mixtures
    return TrainingConfig(states=args.states, iterations=args.iterations,
                          realign_after=args.realign_after, mix_schedule=schedule,
                          variance_floor_scale=args.variance_floor)


def cmd_train(args):
    lexicon = _load_lexicon(args)
    p2v = _load_map(args.map)
    corpus = load_corpus(args.corpus)
    network = build_word_network(lexicon, p2v)
    pairs = [(u.features.frames, apply_map(u.phonemes, p2v)) for u in corpus.utterances]
    candidates = [
        [("sil",) + apply_map(pron, p2v) + ("sil",) for pron in lexicon.pronunciations(u.word)]
        for u in corpus.utterances
    ]
    models, history = train_recipe(pairs, sorted(network.labels()), _hmm_config(args), candidates)
    with open(args.out, "w") as fh:
        fh.write(models.to_json_text())
    lls = history["log_likelihoods"]
    print(f"trained {len(models.labels())} models over {len(pairs)} utterances; "
          f"log-likelihood {lls[0]:.1f} -> {lls[-1]:.1f}")
    return 0


def cmd_decode(args):
    lexicon = _load_lexicon(args)
    p2v = _load_map(args.map)
    with open(args.models) as fh:
        models = model_set_from_json(fh.read())
    corpus = load_corpus(args.corpus)
    decoder = NetworkDecoder(models, build_word_network(lexicon, p2v))
    decoded = decoder.decode_batch([u.features.frames for u in corpus.utterances])
    correct = 0
    rows = []
    for u, (word, ll) in zip(corpus.utterances, decoded):
        ok = word == u.word
        correct += ok
        rows.append({"recitation": u.recitation, "word": u.word, "decoded": word,
                     "log_likelihood": ll, "correct": bool(ok)})
    summary = {"classified": len(rows), "correct": correct,
               "correctness": correct / len(rows) if rows else 0.0}
    if args.json:
        print(json.dumps({"utterances": rows, "summary": summary}, indent=2))
    else:
        for r in rows:
            mark = "" if r["correct"] else f"  -> {r['decoded']}"
            print(f"  r{r['recitation']:02d} {r['word']}{mark}")
        print(f"correctness {summary['correct']}/{summary['classified']}"
              f" = {summary['correctness']:.3f}")
    return 0


def cmd_experiment(args):
    with open(args.config) as fh:
        config = StudyConfig.from_json(fh.read())
    if args.family:
        if args.family not in config.families:
            raise UsageError(f"family {args.family!r} not in config families {config.families}")
        config.families = [args.family]
    if args.workers:
        config.workers = args.workers
    os.makedirs(args.out, exist_ok=True)
    doc = run_study(config, progress=lambda msg: print(msg, file=sys.stderr))
    _write_results(doc, args.out)
    print(f"results written to {args.out}")
    return 0


def _write_results(doc, out_dir):
    with open(os.path.join(out_dir, "results.json"), "w") as fh:
        fh.write(results_json(doc))
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write(report_text(doc))
    for seed, block in doc["seeds"].items():
        for family, entries in block["families"].items():
            fam_dir = os.path.join(out_dir, f"seed{seed}", family.replace("&", "_"))
            os.makedirs(fam_dir, exist_ok=True)
            for e in entries:
                stem = f"M_{''.join(e['map_source'])}_p{e['train_speaker']}_q{e['test_speaker']}"
                for fold in e["folds"]:
                    payload = {"spec": e["label"], "family": family, "seed": seed, **fold}
                    with open(os.path.join(fam_dir, f"{stem}_fold{fold['fold']}.json"), "w") as fh:
                        json.dump(payload, fh, sort_keys=True, indent=2)
                        fh.write("\n")


def cmd_report(args):
    path = args.results
    if os.path.isdir(path):
        path = os.path.join(path, "results.json")
    with open(path) as fh:
        doc = json.load(fh)
    if args.json:
        print(results_json(doc), end="")
    else:
        print(report_text(doc), end="")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="visemelab",
                                     description="Phoneme-to-viseme maps and their evaluation "
                                                 "with an HMM isolated-word recogniser.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="build a P2V map from a confusion matrix CSV")
    p.add_argument("--confusions", required=True)
    p.add_argument("--out")
    p.add_argument("--designation", default="M")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("translate", help="print a word's viseme strings under a map")
    p.add_argument("word")
    p.add_argument("--map", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("homophones", help="unique-word count and homophone groups under a map")
    p.add_argument("--map", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_homophones)

    p = sub.add_parser("synth", help="generate a synthetic speaker corpus")
    p.add_argument("--speaker", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--dimension", type=int, default=10)
    p.add_argument("--recitations", type=int, default=7)
    p.add_argument("--mean-scale", type=float, default=0.8)
    p.add_argument("--format", choices=("vlf", "csv"), default="vlf")
    p.add_argument("--lexicon")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train viseme HMMs on a corpus directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--states", type=int, default=3)
    p.add_argument("--iterations", type=int, default=11)
    p.add_argument("--mixtures", type=int, default=5)
    p.add_argument("--realign-after", type=int, default=7)
    p.add_argument("--variance-floor", type=float, default=0.2)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="decode a corpus over the 26-word network")
    p.add_argument("--corpus", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("experiment", help="run the configured study end to end")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--family")
    p.add_argument("--workers", type=int, default=os.cpu_count())
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="print the report for a results directory")
    p.add_argument("--results", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, LexiconError, ConfusionFormatError, ConfigurationError,
            TranslationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (HmmError, NoPathError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
