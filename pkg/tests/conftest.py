from __future__ import annotations

import pytest

from finbench import corpus, fixtures


@pytest.fixture(scope="session")
def full_corpus(tmp_path_factory) -> str:
    """Manifests path for a fixture corpus at the reference cardinalities."""
    root = tmp_path_factory.mktemp("full_corpus")
    return str(fixtures.write_corpus(root, scale="full"))


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory) -> str:
    """Manifests path for a fast, few-dozen-row corpus of the same shapes."""
    root = tmp_path_factory.mktemp("small_corpus")
    return str(fixtures.write_corpus(root, scale="small"))


@pytest.fixture(scope="session")
def small_manifests(small_corpus) -> list[corpus.DatasetManifest]:
    return corpus.load_manifests(small_corpus)


def pytest_runtest_logreport(report):
    """One PASS/FAIL line per acceptance criterion, printed as it runs."""
    if report.when != "call" or "acceptance" not in report.keywords:
        return
    verdict = "PASS" if report.passed else "FAIL"
    print(f"\n[ACCEPTANCE] {report.nodeid.split('::', 1)[1]}: {verdict}")
