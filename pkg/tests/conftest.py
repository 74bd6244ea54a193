"""Shared fixtures and the acceptance-summary reporter."""

import numpy as np
import pytest

import emitpair as ep

ACCEPTANCE_PREFIX = "test_criterion_"
_acceptance_results = {}


@pytest.fixture(scope="session")
def pair_config():
    """Strongly coupled, strongly driven pair used throughout."""
    return ep.EmitterPairConfig(kr12=0.05, rabi=30.0)


@pytest.fixture(scope="session")
def pair_triplet(pair_config):
    return ep.dressed_triplet(pair_config, ep.dipole_coefficients(pair_config))


@pytest.fixture(scope="session")
def asym_config():
    """Very close pair under very strong drive; broad sensors."""
    return ep.EmitterPairConfig(kr12=0.006, rabi=250.0)


@pytest.fixture(scope="session")
def asym_triplet(asym_config):
    return ep.dressed_triplet(asym_config, ep.dipole_coefficients(asym_config))


@pytest.fixture(scope="session")
def single_config():
    return ep.EmitterPairConfig(atom_count=1, rabi=30.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if name.startswith(ACCEPTANCE_PREFIX):
        label = name[len(ACCEPTANCE_PREFIX):]
        _acceptance_results[label] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for label in sorted(_acceptance_results):
        outcome = _acceptance_results[label]
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(
            outcome, outcome.upper()
        )
        terminalreporter.write_line(f"criterion {label}: {status}")
