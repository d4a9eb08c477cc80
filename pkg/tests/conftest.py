import os

import pytest

from src.corpus import corpus_dir, corpus_manifest
from src.dsl import parse
from src.io_handler import ModelLoader


def corpus_path(name):
    return os.path.join(corpus_dir(), name)


def load(name):
    return ModelLoader.load_document(corpus_path(name))


@pytest.fixture
def build():
    """Parses inline `.tm` text."""
    def _build(source):
        return parse(source, '<test>')
    return _build


@pytest.fixture(scope='session')
def manifest():
    return {entry.name: entry for entry in corpus_manifest()}


@pytest.fixture
def restaurant():
    return load('restaurant.tm')


@pytest.fixture
def ten_integers():
    return load('example1_ten_integers.tm')


@pytest.fixture
def odd_even():
    return load('example2_odd_even.tm')


@pytest.fixture
def acceptor():
    return load('turing_01star0.tm')


@pytest.fixture
def palindrome():
    return load('palindrome.tm')


@pytest.fixture
def thermostat():
    return load('thermostat.tm')


@pytest.fixture
def traffic_light():
    return load('traffic_light.tm')
