"""Shared fixtures: the bundled corpus and its Hamiltonian systems."""

import pytest
import sympy as sp

from ocfactor.cli import corpus_dir
from ocfactor.ocs import load

SYSTEMS = ("e1", "e2", "e3", "e4")


@pytest.fixture(scope="session")
def corpus():
    files = {}
    for name in SYSTEMS:
        files[name] = load(corpus_dir() / f"{name}.ocs")
        files[f"{name}_identity"] = load(corpus_dir() / f"{name}_identity.ocs")
    return files


@pytest.fixture(scope="session")
def hams(corpus):
    return {name: corpus[name].hamiltonian_system() for name in SYSTEMS}


@pytest.fixture(scope="session")
def e1(hams):
    return hams["e1"]


@pytest.fixture(scope="session")
def e2(hams):
    return hams["e2"]


@pytest.fixture(scope="session")
def e3(hams):
    return hams["e3"]


@pytest.fixture(scope="session")
def e4(hams):
    return hams["e4"]


def syms(names):
    return sp.symbols(names)
