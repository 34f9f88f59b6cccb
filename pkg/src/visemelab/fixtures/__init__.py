"""Access to bundled fixture data: lexicon, confusion matrices, maps."""

from __future__ import annotations

from importlib import resources

from ..alignment import parse_confusions
from ..clustering import map_from_json
from ..lexicon import default_inventory

MAP_DESIGNATIONS = ("M_1", "M_2", "M_3", "M_4", "M_1234", "M_234", "M_134", "M_124", "M_123")

CONFUSION_SOURCES = {
    "M_1": "speaker1",
    "M_2": "speaker2",
    "M_3": "speaker3",
    "M_4": "speaker4",
    "M_1234": "m1234",
    "M_234": "si_234",
    "M_134": "si_134",
    "M_124": "si_124",
    "M_123": "si_123",
}


def fixture_text(relpath):
    return resources.files("visemelab.fixtures").joinpath(relpath).read_text()


def load_confusions(name, inventory=None):
    """Bundled confusion matrix by fixture name (e.g. "speaker1")."""
    inv = inventory or default_inventory()
    return parse_confusions(fixture_text(f"confusions/{name}.csv"), inv)


def load_map(designation, inventory=None):
    """Bundled golden P2V map by designation (e.g. "M_1")."""
    inv = inventory or default_inventory()
    return map_from_json(fixture_text(f"maps/{designation}.json"), inv)


def load_map_text(designation):
    return fixture_text(f"maps/{designation}.json")
