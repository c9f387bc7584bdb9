import json
from pathlib import Path

import pytest

from cpgqa.corpus import load_corpus
from cpgqa.ontology import load_annotations, load_graph, load_mapping
from cpgqa.patients import load_ccs, load_patients

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def corpus():
    return load_corpus(FIXTURES / "corpus.json")


@pytest.fixture(scope="session")
def guideline_html() -> str:
    return (FIXTURES / "guideline.html").read_text()


@pytest.fixture(scope="session")
def selectors() -> dict:
    return json.loads((FIXTURES / "selectors.json").read_text())


@pytest.fixture(scope="session")
def annotations():
    return load_annotations(FIXTURES / "annotations.jsonl")


@pytest.fixture(scope="session")
def graph():
    return load_graph(FIXTURES / "graph.jsonl")


@pytest.fixture(scope="session")
def mapping():
    return load_mapping(FIXTURES / "mapping.jsonl")


@pytest.fixture(scope="session")
def patients():
    return load_patients(FIXTURES / "patients.json")


@pytest.fixture(scope="session")
def patients_by_id(patients):
    return {p.id: p for p in patients}


@pytest.fixture(scope="session")
def cohort_patients():
    return load_patients(FIXTURES / "cohort_patients.json")


@pytest.fixture(scope="session")
def ccs():
    return load_ccs(FIXTURES / "ccs.csv")
