from __future__ import annotations

import random

import pytest

from umr.fixtures import build_registry, fixture_records
from umr.registry import RegistryView


@pytest.fixture
def healthcare(tmp_path):
    """A local registry populated with the healthcare case-study records."""
    return build_registry("healthcare", tmp_path / "registry", "healthcare")


@pytest.fixture
def healthcare_view(healthcare):
    return RegistryView([healthcare])


@pytest.fixture(scope="session")
def healthcare_records():
    return {str(r.id): r for r in fixture_records("healthcare")}


@pytest.fixture
def umr_env(healthcare, monkeypatch, tmp_path):
    """Point UMR_REGISTRY at the healthcare registry, with no config file in the cwd."""
    work = tmp_path / "work"
    work.mkdir()
    monkeypatch.setenv("UMR_REGISTRY", str(healthcare.path))
    monkeypatch.chdir(work)
    return healthcare


@pytest.fixture
def rng():
    return random.Random(20240601)


# -- acceptance reporting ------------------------------------------------------
# Tests marked ``acceptance(number, title)`` are folded into one PASS/FAIL line
# per criterion, printed in the terminal summary regardless of output capture.

_criteria: dict[int, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or len(marker.args) != 2:
        return
    if rep.when == "call" or rep.failed or rep.skipped:
        number, title = marker.args
        entry = _criteria.setdefault(number, [title, True])
        entry[1] = entry[1] and rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}")
