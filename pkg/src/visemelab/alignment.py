"""Phoneme sequence alignment and confusion accumulation.

Recogniser output is aligned against the reference transcription with a
minimal-cost global alignment (unit costs). Matches and substitutions feed
a directed confusion matrix; insertions and deletions carry no confusion
mass.
"""

from __future__ import annotations

from dataclasses import dataclass

MATCH = "match"
SUBSTITUTION = "substitution"
INSERTION = "insertion"
DELETION = "deletion"


@dataclass(frozen=True)
class AlignmentStep:
    kind: str
    reference: str | None = None
    hypothesis: str | None = None

    def __post_init__(self):
        if self.kind in (MATCH, SUBSTITUTION):
            if self.reference is None or self.hypothesis is None:
                raise ValueError(f"{self.kind} step needs both phonemes")
            if self.kind == MATCH and self.reference != self.hypothesis:
                raise ValueError("match step with differing phonemes")
        elif self.kind == INSERTION:
            if self.hypothesis is None or self.reference is not None:
                raise ValueError("insertion step carries hypothesis only")
        elif self.kind == DELETION:
            if self.reference is None or self.hypothesis is not None:
                raise ValueError("deletion step carries reference only")
        else:
            raise ValueError(f"unknown step kind {self.kind!r}")


def align(reference, hypothesis):
    """Minimal-cost global alignment under unit costs.

    On cost ties the traceback prefers substitution over deletion over
    insertion. Total cost equals the Levenshtein distance.
    """
    ref = list(reference)
    hyp = list(hypothesis)
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = dist[i - 1][j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1)
            dele = dist[i - 1][j] + 1
            ins = dist[i][j - 1] + 1
            dist[i][j] = min(sub, dele, ins)

    steps = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            if dist[i][j] == dist[i - 1][j - 1] + cost:
                kind = MATCH if cost == 0 else SUBSTITUTION
                steps.append(AlignmentStep(kind, ref[i - 1], hyp[j - 1]))
                i, j = i - 1, j - 1
                continue
        if i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            steps.append(AlignmentStep(DELETION, reference=ref[i - 1]))
            i -= 1
            continue
        steps.append(AlignmentStep(INSERTION, hypothesis=hyp[j - 1]))
        j -= 1
    steps.reverse()
    return steps


def alignment_cost(steps):
    return sum(1 for s in steps if s.kind != MATCH)


class ConfusionMatrix:
    """Directed counts of reference phoneme r recognised as h.

    `emitted` records every phoneme that appeared in any hypothesis,
    whether or not it contributed a count.
    """

    def __init__(self, inventory):
        self.inventory = inventory
        self._counts = {}
        self.emitted = set()

    def count(self, reference, hypothesis):
        return self._counts.get(reference, {}).get(hypothesis, 0)

    def increment(self, reference, hypothesis, amount=1):
        if amount < 0:
            raise ValueError("confusion counts are nonnegative")
        row = self._counts.setdefault(reference, {})
        row[hypothesis] = row.get(hypothesis, 0) + amount

    def observe_emission(self, phoneme):
        self.emitted.add(phoneme)

    def nonzero(self):
        for r, row in self._counts.items():
            for h, c in row.items():
                if c:
                    yield r, h, c

    def total(self):
        return sum(c for _, _, c in self.nonzero())

    def to_csv(self):
        symbols = self.inventory.symbols()
        lines = ["," + ",".join(symbols)]
        for r in symbols:
            lines.append(r + "," + ",".join(str(self.count(r, h)) for h in symbols))
        lines.append("# emitted: " + " ".join(sorted(self.emitted)))
        return "\n".join(lines) + "\n"


class ConfusionFormatError(ValueError):
    """Raised when confusion CSV text is malformed."""


def parse_confusions(text, inventory):
    """Read a confusion matrix from its CSV serialisation."""
    cm = ConfusionMatrix(inventory)
    header = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("emitted:"):
                for ph in body[len("emitted:"):].split():
                    if ph not in inventory:
                        raise ConfusionFormatError(f"line {lineno}: unknown phoneme {ph!r}")
                    cm.observe_emission(ph)
            continue
        cells = [c.strip() for c in line.split(",")]
        if header is None:
            header = cells[1:]
            for ph in header:
                if ph not in inventory:
                    raise ConfusionFormatError(f"line {lineno}: unknown phoneme {ph!r}")
            continue
        if len(cells) != len(header) + 1:
            raise ConfusionFormatError(f"line {lineno}: expected {len(header) + 1} cells, got {len(cells)}")
        r = cells[0]
        if r not in inventory:
            raise ConfusionFormatError(f"line {lineno}: unknown phoneme {r!r}")
        for h, cell in zip(header, cells[1:]):
            try:
                value = int(cell)
            except ValueError:
                raise ConfusionFormatError(f"line {lineno}: non-integer cell {cell!r}") from None
            if value < 0:
                raise ConfusionFormatError(f"line {lineno}: negative count {value}")
            if value:
                cm.increment(r, h, value)
    if header is None:
        raise ConfusionFormatError("no header row")
    bad = {h for r, h, c in cm.nonzero()} - cm.emitted
    if bad:
        raise ConfusionFormatError(f"counts for phonemes missing from emitted set: {sorted(bad)}")
    return cm


def accumulate_confusions(pairs, inventory):
    """Align each (reference, hypothesis) pair and accumulate confusions."""
    cm = ConfusionMatrix(inventory)
    for reference, hypothesis in pairs:
        for step in align(reference, hypothesis):
            if step.kind in (MATCH, SUBSTITUTION):
                cm.increment(step.reference, step.hypothesis)
        for ph in hypothesis:
            cm.observe_emission(ph)
    return cm


def merge_confusions(matrices):
    """Elementwise sum of confusion matrices over identical inventories."""
    matrices = list(matrices)
    if not matrices:
        raise ValueError("nothing to merge")
    first = matrices[0]
    symbols = first.inventory.symbols()
    merged = ConfusionMatrix(first.inventory)
    for cm in matrices:
        if cm.inventory.symbols() != symbols:
            raise ValueError("inventory mismatch in merge")
        for r, h, c in cm.nonzero():
            merged.increment(r, h, c)
        merged.emitted |= cm.emitted
    return merged
