"""Viseme construction: group mutually-confused phonemes into cliques.

A phoneme may join a viseme only if it has been confused, in both
directions, with every other phoneme of that viseme. Vowels and consonants
are never mixed. Phonemes absent from recogniser output form the garb
class; silence keeps its own class.
"""

from __future__ import annotations

import json

from .lexicon import CONSONANT, SIL, SILENCE, VOWEL


class P2VMap:
    """Partition of the inventory into visemes plus /sil/ and /garb/."""

    def __init__(self, designation, visemes, garb, inventory):
        self.designation = designation
        self.visemes = [(label, tuple(sorted(phons))) for label, phons in visemes]
        self.garb = tuple(sorted(garb))
        self.inventory = inventory
        self._label_of = {}
        for label, phons in self.visemes:
            for ph in phons:
                self._label_of[ph] = label
        for ph in self.garb:
            self._label_of[ph] = "garb"
        self._label_of[SIL] = "sil"

    def label_of(self, phoneme):
        return self._label_of[phoneme]

    def covers(self, phoneme):
        return phoneme in self._label_of

    def phonemes(self, label):
        for lab, phons in self.visemes:
            if lab == label:
                return phons
        raise KeyError(label)

    def __eq__(self, other):
        return (isinstance(other, P2VMap)
                and self.designation == other.designation
                and self.visemes == other.visemes
                and self.garb == other.garb)

    def to_json_text(self):
        doc = {
            "designation": self.designation,
            "visemes": [{"label": lab, "phonemes": list(phons)} for lab, phons in self.visemes],
            "sil": [SIL],
            "garb": list(self.garb),
        }
        return json.dumps(doc, indent=2) + "\n"


def map_from_json(text, inventory):
    doc = json.loads(text)
    visemes = [(v["label"], tuple(v["phonemes"])) for v in doc["visemes"]]
    return P2VMap(doc["designation"], visemes, tuple(doc["garb"]), inventory)


def mutual_confusion_graph(cm):
    """Undirected adjacency: edge {p,q} iff confusions ran both ways and
    the phonemes share a category (silence excluded)."""
    inv = cm.inventory
    vertices = [s for s in inv.symbols() if inv.category(s) != SILENCE]
    adj = {v: set() for v in vertices}
    for p in vertices:
        for q in vertices:
            if p >= q or inv.category(p) != inv.category(q):
                continue
            if cm.count(p, q) > 0 and cm.count(q, p) > 0:
                adj[p].add(q)
                adj[q].add(p)
    return adj


def garb_class(cm):
    """Inventory phonemes (silence excluded) absent from recogniser output."""
    inv = cm.inventory
    return {s for s in inv.symbols() if inv.category(s) != SILENCE} - cm.emitted


def _maximal_cliques(vertices, adj):
    """Bron-Kerbosch with pivoting, restricted to `vertices`."""
    cliques = []

    def expand(r, p, x):
        if not p and not x:
            cliques.append(frozenset(r))
            return
        pivot = max(p | x, key=lambda u: len(adj[u] & p))
        for v in sorted(p - adj[pivot]):
            expand(r | {v}, p & adj[v], x & adj[v])
            p = p - {v}
            x = x | {v}

    expand(set(), set(vertices), set())
    return cliques


def _intra_count(cm, clique):
    total = 0
    for p in clique:
        for q in clique:
            if p != q:
                total += cm.count(p, q)
    return total


def _greedy_partition(cm, vertices, adj):
    """Repeatedly remove the best maximal clique.

    Ties break on largest size, then greatest total intra-clique confusion
    count, then lexicographically smallest phoneme set.
    """
    remaining = set(vertices)
    out = []
    while remaining:
        sub_adj = {v: adj[v] & remaining for v in remaining}
        cliques = _maximal_cliques(remaining, sub_adj)
        best = min(cliques, key=lambda c: (-len(c), -_intra_count(cm, c), tuple(sorted(c))))
        out.append(tuple(sorted(best)))
        remaining -= best
    return out


def cluster(cm, designation="M"):
    """Build a P2V map from a confusion matrix."""
    inv = cm.inventory
    garb = garb_class(cm)
    adj = mutual_confusion_graph(cm)
    classes = []
    for category in (VOWEL, CONSONANT):
        vertices = [s for s in inv.symbols(category) if s in cm.emitted]
        classes.extend(_greedy_partition(cm, vertices, adj))
    visemes = [(f"v{i:02d}", phons) for i, phons in enumerate(classes, start=1)]
    return P2VMap(designation, visemes, garb, inv)


def validate_map(m, inventory):
    """Return a list of invariant violations (empty means valid)."""
    violations = []
    seen = {}
    classes = list(m.visemes) + [("garb", m.garb), ("sil", (SIL,))]
    for label, phons in classes:
        for ph in phons:
            if ph not in inventory:
                violations.append(f"unknown: {ph!r} in {label} is not an inventory phoneme")
                continue
            if ph in seen:
                violations.append(f"overlap: {ph!r} in both {seen[ph]} and {label}")
            seen[ph] = label
    for ph in inventory.symbols():
        if ph not in seen:
            violations.append(f"missing: {ph!r} assigned to no class")
    for label, phons in m.visemes:
        cats = {inventory.category(ph) for ph in phons if ph in inventory}
        if SILENCE in cats:
            violations.append(f"silence-in-viseme: {label}")
        if VOWEL in cats and CONSONANT in cats:
            violations.append(f"category-mix: {label} holds vowels and consonants")
    expected = [f"v{i:02d}" for i in range(1, len(m.visemes) + 1)]
    if [label for label, _ in m.visemes] != expected:
        violations.append("label-order: viseme labels are not v01, v02, ... in order")
    return violations
