"""Phoneme inventory and the letter-name pronunciation dictionary.

The inventory is the 29 phonemes observed in the alphabet transcriptions
(12 vowels, 17 consonants) plus a distinguished silence symbol. Categories
follow standard ARPAbet-style conventions.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from importlib import resources

VOWEL = "vowel"
CONSONANT = "consonant"
SILENCE = "silence"

SIL = "sil"

VOWELS = ("aa", "ah", "ao", "ax", "ay", "ea", "eh", "ey", "iy", "oh", "ow", "uw")
CONSONANTS = ("b", "ch", "d", "f", "jh", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "y", "z")


class LexiconError(ValueError):
    """Raised when dictionary text violates the lexicon format."""


@dataclass(frozen=True)
class Phoneme:
    symbol: str
    category: str

    def __post_init__(self):
        if not self.symbol:
            raise ValueError("phoneme symbol must be nonempty")
        if self.category not in (VOWEL, CONSONANT, SILENCE):
            raise ValueError(f"unknown category {self.category!r}")


class Inventory:
    """Fixed set of phonemes with category lookup."""

    def __init__(self, phonemes):
        self._by_symbol = {}
        for p in phonemes:
            if p.symbol in self._by_symbol:
                raise ValueError(f"duplicate phoneme symbol {p.symbol!r}")
            self._by_symbol[p.symbol] = p

    def __contains__(self, symbol):
        return symbol in self._by_symbol

    def __iter__(self):
        return iter(self._by_symbol.values())

    def __len__(self):
        return len(self._by_symbol)

    def category(self, symbol):
        return self._by_symbol[symbol].category

    def symbols(self, category=None):
        if category is None:
            return [p.symbol for p in self]
        return [p.symbol for p in self if p.category == category]


def default_inventory():
    """The 29-phoneme alphabet inventory plus silence."""
    phonemes = [Phoneme(s, VOWEL) for s in VOWELS]
    phonemes += [Phoneme(s, CONSONANT) for s in CONSONANTS]
    phonemes.append(Phoneme(SIL, SILENCE))
    return Inventory(phonemes)


class Lexicon:
    """Word -> pronunciation variants, each a tuple of phoneme symbols."""

    def __init__(self, inventory=None):
        self.inventory = inventory or default_inventory()
        self.entries = {}

    def add(self, word, pronunciation):
        pron = tuple(pronunciation)
        if not pron:
            raise LexiconError(f"empty pronunciation for {word!r}")
        for ph in pron:
            if ph not in self.inventory:
                raise LexiconError(f"unknown phoneme {ph!r} in {word!r}")
        variants = self.entries.setdefault(word, [])
        if pron in variants:
            raise LexiconError(f"duplicate pronunciation for {word!r}: {' '.join(pron)}")
        variants.append(pron)

    def words(self):
        return list(self.entries)

    def pronunciations(self, word):
        return list(self.entries[word])

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, Lexicon) and self.entries == other.entries

    def to_text(self):
        lines = []
        for word, variants in self.entries.items():
            for pron in variants:
                lines.append(f"{word} {' '.join(pron)}")
        return "\n".join(lines) + "\n" if lines else ""


def parse_lexicon(text, inventory=None):
    """Parse line-oriented dictionary text: `WORD ph1 ph2 ...`, `#` comments.

    Repeated WORD lines accumulate variants in file order.
    """
    lex = Lexicon(inventory)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        word, pron = fields[0], fields[1:]
        if not pron:
            raise LexiconError(f"line {lineno}: empty pronunciation for {word!r}")
        for ph in pron:
            if ph not in lex.inventory:
                raise LexiconError(f"line {lineno}: unknown phoneme {ph!r}")
        try:
            lex.add(word, pron)
        except LexiconError as exc:
            raise LexiconError(f"line {lineno}: {exc}") from None
    return lex


def phoneme_histogram(lexicon):
    """Count phonemes over all pronunciations of all words; silence omitted."""
    if not lexicon.entries:
        raise ValueError("histogram of an empty lexicon")
    counts = Counter()
    for variants in lexicon.entries.values():
        for pron in variants:
            for ph in pron:
                if lexicon.inventory.category(ph) != SILENCE:
                    counts[ph] += 1
    return dict(counts)


def load_letter_lexicon():
    """The bundled A-Z letter lexicon (British English, BEEP-style)."""
    text = resources.files("visemelab.fixtures").joinpath("avl2_letters.lex").read_text()
    return parse_lexicon(text)
