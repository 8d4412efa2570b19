import sys

import pytest

from ruleflow.fixtures import data_path, load_fixture


@pytest.fixture(scope="session")
def mini_corpus():
    return load_fixture("mini_corpus")


@pytest.fixture(scope="session")
def dep_examples():
    return {d.id: d for d in load_fixture("dependency_examples")}


@pytest.fixture(scope="session")
def by_id(mini_corpus):
    return {d.id: d for d in mini_corpus}


@pytest.fixture
def transcript():
    return lambda name: data_path(f"transcripts/{name}")


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[number])
