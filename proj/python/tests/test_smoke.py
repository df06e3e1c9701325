import math

import pytest

import bikeflow


def test_catalog_has_eight_scenarios():
    scenarios = bikeflow.scenario_catalog()
    assert [s["scenario_id"] for s in scenarios] == list(range(1, 9))


def test_cosine_matches_closed_form():
    assert bikeflow.cosine_similarity([1, 2, 2], [2, 1, 2]) == pytest.approx(8 / 9, abs=1e-12)


def test_cosine_rejects_zero_vector():
    with pytest.raises(bikeflow.Error):
        bikeflow.cosine_similarity([0, 0], [1, 1])


def test_format_percent():
    assert bikeflow.format_percent(191, 200) == "95.5"
    assert bikeflow.format_percent(0, 0) == "n/a"


def test_accept_case_boundary():
    assert bikeflow.accept_case(4, 4, 4)
    assert not bikeflow.accept_case(4, 4, 3)
    assert not bikeflow.accept_case(5, 5, 5, background_change=True)


def test_next_state():
    assert bikeflow.next_state("Created", "located") == "Located"
    assert bikeflow.next_state("Created", "expert_agrees") is None


def test_accuracy_table():
    labels = "case_id,scenario_id,correct_candidate_id\na,1,c1\nb,1,c2\n"
    table = bikeflow.accuracy_table(labels, {"a": "c1", "b": "c9"})
    assert table["overall"]["accuracy_percent"] == "50.0"


def test_run_mock_end_to_end(tmp_path):
    scene = tmp_path / "scene.png"
    bikeflow.write_reference(3, scene, 512)
    summary = bikeflow.run_mock(scene, 3, 6, tmp_path / "runs", seed=7)
    assert summary["state"] in ("Finalized", "Excluded")
    again = bikeflow.load_run(tmp_path / "runs", summary["run_id"])
    assert again["state"] == summary["state"]
    assert again["version"] == summary["version"]
