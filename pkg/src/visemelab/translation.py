"""Word -> phoneme -> viseme translation and homophone analysis."""

from __future__ import annotations


class TranslationError(KeyError):
    """Raised when a phoneme is not covered by the map."""


def apply_map(pronunciation, p2v_map):
    """Replace each phoneme by its class label (viseme label, garb or sil)."""
    labels = []
    for ph in pronunciation:
        if not p2v_map.covers(ph):
            raise TranslationError(f"phoneme {ph!r} not covered by map {p2v_map.designation}")
        labels.append(p2v_map.label_of(ph))
    return tuple(labels)


def viseme_strings(lexicon, p2v_map, word):
    """The set of viseme strings over a word's pronunciation variants."""
    return {apply_map(pron, p2v_map) for pron in lexicon.pronunciations(word)}


def homophone_analysis(lexicon, p2v_map):
    """Group words whose viseme-string sets intersect, transitively.

    Returns (T, groups): T is the number of equivalence classes (unique
    words), groups lists every class as a sorted word tuple.
    """
    words = sorted(lexicon.words())
    if not words:
        raise ValueError("homophone analysis over an empty lexicon")

    parent = {w: w for w in words}

    def find(w):
        while parent[w] != w:
            parent[w] = parent[parent[w]]
            w = parent[w]
        return w

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    by_string = {}
    for w in words:
        for s in viseme_strings(lexicon, p2v_map, w):
            owner = by_string.setdefault(s, w)
            if owner != w:
                union(owner, w)

    classes = {}
    for w in words:
        classes.setdefault(find(w), []).append(w)
    groups = [tuple(sorted(members)) for members in classes.values()]
    groups.sort()
    return len(groups), groups


def homophone_groups(lexicon, p2v_map):
    """Only the classes that actually collide (two or more words)."""
    _, groups = homophone_analysis(lexicon, p2v_map)
    return [g for g in groups if len(g) > 1]
