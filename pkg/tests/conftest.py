import pytest

from visemelab.lexicon import default_inventory, load_letter_lexicon


@pytest.fixture(scope="session")
def inventory():
    return default_inventory()


@pytest.fixture(scope="session")
def letters():
    return load_letter_lexicon()
