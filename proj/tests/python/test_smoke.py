import json
import os
import pathlib
import subprocess

import pytest

import latticework as lw

FIXTURES = pathlib.Path(os.environ.get("LW_FIXTURE_DIR", pathlib.Path(__file__).parents[1] / "fixtures"))


@pytest.fixture
def engine(tmp_path):
    return lw.Engine(str(tmp_path / "store"), {"synthesis.workers": "2"})


def run_pipeline(engine):
    engine.ingest(str(FIXTURES / "amy_records.jsonl"), str(FIXTURES / "denylist.txt"))
    engine.build()
    engine.merge()
    engine.tasks()
    return engine.propose()


def test_segmentation_from_python():
    text = (FIXTURES / "amy_records.jsonl").read_text()
    sessions = lw.segment_sessions(text)
    assert [s["session_id"] for s in sessions] == ["day-2025-03-03", "day-2025-03-04", "day-2025-03-05"]


def test_pipeline_and_lattice_helpers(engine):
    actions = run_pipeline(engine)
    assert len(actions) % 2 == 0 and actions
    doc = engine.final_lattice()
    assert lw.validate_lattice(doc) == []
    lattice = json.loads(doc)
    assert len(lattice["layers"]) == 3
    top = lattice["layers"][-1][0]
    trail = lw.descendants(doc, top)
    assert trail["root"] == top
    assert trail["leaf_observations"]
    assert engine.provenance(top)["leaf_observations"] == trail["leaf_observations"]
    exported = engine.export()
    assert len(exported["insights"]) == len(lattice["layers"][-1])


def test_action_lifecycle_and_errors(engine):
    action = run_pipeline(engine)[0]["id"]
    assert engine.steer(action, "use the v2 draft")["status"] == "info_requested"
    assert engine.approve(action)["status"] == "approved"
    run = engine.run(action)
    assert run["outcome"] == "completed"
    assert len(run["artifacts"]) == 1
    with pytest.raises(lw.LatticeworkError) as err:
        engine.approve(action)
    assert lw.error_code(err.value) == "InvalidStatus"


def test_stage_order_is_enforced(engine):
    with pytest.raises(lw.LatticeworkError) as err:
        engine.build()
    assert lw.error_code(err.value) == "MissingPredecessor"


def test_bad_override_is_a_config_error(tmp_path):
    with pytest.raises(lw.LatticeworkError) as err:
        lw.Engine(str(tmp_path), {"tasking.utility_threshold": "2"})
    assert lw.error_code(err.value) == "ConfigError"


@pytest.mark.skipif(not os.environ.get("LW_CLI"), reason="command-line tool not built")
def test_cli_matches_module(tmp_path):
    store = tmp_path / "cli-store"
    cli = os.environ["LW_CLI"]

    def call(*args):
        out = subprocess.run([cli, "--store", str(store), *args], check=True, capture_output=True, text=True)
        return json.loads(out.stdout)

    call("ingest", str(FIXTURES / "amy_records.jsonl"), "--denylist", str(FIXTURES / "denylist.txt"))
    call("build")
    call("merge")
    module_engine = lw.Engine(str(store))
    assert len(module_engine.export()["insights"]) == call("merge")["final_insights"]
