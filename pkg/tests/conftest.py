"""Shared fixtures: tagging resources, a small synthetic corpus, and a
pipeline trained once with shrunken hyperparameters so persistence, CLI, and
evaluation tests stay fast."""

from __future__ import annotations

import pytest

from smishfuse.config import config_from_dict
from smishfuse.corpus import write_corpus_jsonl
from smishfuse.pipeline import train_pipeline
from smishfuse.synthetic import SyntheticSpec, generate_corpus
from smishfuse.tagging import EntityGazetteer, PhraseLexicon


@pytest.fixture(scope="session")
def gazetteer():
    return EntityGazetteer.default()


@pytest.fixture(scope="session")
def lexicon():
    return PhraseLexicon.default()


@pytest.fixture(scope="session")
def tiny_corpus():
    return generate_corpus(SyntheticSpec(n_messages=160, seed=9))


@pytest.fixture(scope="session")
def tiny_config():
    return config_from_dict(
        {
            "seed": 9,
            "data": {"relabel": {"enabled": False}},
            "semantic": {"n_trees": 15},
            "structural": {"n_trees": 15},
            "char": {
                "epochs": 2,
                "embed_dim": 8,
                "filter_widths": [3, 5],
                "filters_per_width": 8,
                "hidden": 16,
            },
            "contextual_head": {"epochs": 2, "filters_per_width": 4},
            "fusion": {"k": 16, "hidden": [16], "epochs": 4},
        }
    )


@pytest.fixture(scope="session")
def tiny_pipeline(tiny_corpus, tiny_config):
    return train_pipeline(tiny_corpus, tiny_config)


@pytest.fixture(scope="session")
def tiny_corpus_path(tiny_corpus, tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "tiny.jsonl"
    write_corpus_jsonl(tiny_corpus, path)
    return path


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one line per acceptance criterion after the run."""
    lines = []
    for outcome in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in nodeid:
                name = nodeid.split("::", 1)[1]
                lines.append((name, outcome.upper()))
    if not lines:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(lines):
        mark = {"PASSED": "PASS", "FAILED": "FAIL", "ERROR": "FAIL", "SKIPPED": "SKIP"}[
            outcome
        ]
        terminalreporter.write_line(f"{mark}  {name}")
