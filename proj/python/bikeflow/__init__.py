"""Python access to the bike-lane design pipeline engine."""

import json as _json

from . import _core
from ._core import (
    Error,
    accept_case,
    boundary_clause,
    composite_fidelity,
    cosine_similarity,
    format_percent,
    histogram_embedding,
    next_state,
    render_template,
    write_reference,
)

__all__ = [
    "Error",
    "accept_case",
    "accuracy_table",
    "boundary_clause",
    "composite_fidelity",
    "cosine_similarity",
    "format_percent",
    "histogram_embedding",
    "load_run",
    "next_state",
    "render_template",
    "run_mock",
    "scenario_catalog",
    "write_reference",
]


def scenario_catalog():
    """The eight design scenarios as dicts."""
    return _json.loads(_core.catalog_json())["scenarios"]


def accuracy_table(labels_csv, picks):
    """Per-scenario evaluator accuracy for gold labels (CSV text) and picks."""
    return _json.loads(_core.accuracy_table(labels_csv, dict(picks)))


def run_mock(scene, scenario_id, pool_size, runs_dir, seed=0, run_id=None):
    """Run the full pipeline headless with mock providers; returns the run summary."""
    return _json.loads(_core.run_mock(str(scene), scenario_id, pool_size, str(runs_dir), seed, run_id))


def load_run(runs_dir, run_id):
    """Replay and verify a stored run."""
    return _json.loads(_core.load_run(str(runs_dir), run_id))
