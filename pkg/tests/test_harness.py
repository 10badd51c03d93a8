import json

import numpy as np
import pytest

from evoset import cli, harness
from evoset.errors import ConfigError
from evoset.harness import ANCHORS, ExperimentConfig, Record, run


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_verify_identities_e2_exit_zero(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"env": {"generator": "e2", "exact": True}, "horizon": 4})
    code = cli.main(["verify-identities", "--config", cfg, "--out", str(tmp_path / "out")])
    assert code == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["passed"] and report["seed"] == 0
    assert all(r["anchor"] in ANCHORS for r in report["records"])
    assert "PASS" in capsys.readouterr().out


def test_missing_dimension_names_field(tmp_path, capsys):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({"env": {"generator": "e2"}}, task="kappa-table")
    assert info.value.field == "iso.d"
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({"env": {"generator": "e2"}, "iso": {"mode": "exact"}}, task="kappa-table")
    assert info.value.field == "iso.d"
    cfg = write(tmp_path, "k.json", {"env": {"generator": "e2"}})
    assert cli.main(["kappa-table", "--config", cfg]) == 2
    assert "iso.d" in capsys.readouterr().err


def test_alpha_one_rejected():
    with pytest.raises(ConfigError, match="alpha=1 vacuous"):
        ExperimentConfig.from_dict({"env": {"generator": "e2"}, "alphas": [0.5, 1]}, task="drift-suite")


def test_unknown_task_and_bad_seed():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({"task": "nope"})
    assert info.value.field == "task"
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({"env": {"generator": "e2"}, "seed": -1}, task="evolving-sim")
    assert info.value.field == "seed"


def test_record_anchor_checked():
    with pytest.raises(ValueError):
        Record("made-up", "x", True, 0.0, 0.0)


def test_failing_record_gives_nonzero_exit(tmp_path):
    # on a finite graph without killing, pi(x) h tends to a positive constant, so the envelope grows
    cfg = write(tmp_path, "d.json", {"env": {"generator": "e2"}, "horizon": 30, "iso": {"d": 2, "mode": "exact"}})
    assert cli.main(["kernel-decay", "--config", cfg]) == 1


def test_drift_suite_with_fuzz():
    cfg = ExperimentConfig.from_dict({"fuzz": 5, "seed": 3}, task="drift-suite")
    report = run(cfg)
    assert report.passed and len(report.records) == 5 * len(harness.DEFAULT_ALPHAS)


def test_verify_identities_fuzz_and_complement():
    cfg = ExperimentConfig.from_dict({"fuzz": 3, "complement_envs": 3, "fuzz_max_vertices": 5}, task="verify-identities")
    report = run(cfg)
    assert report.passed
    assert {r.anchor for r in report.records} >= {"duality-identity", "complement-duality", "coupling-set-marginal"}


def _outputs(tmp_path, task, doc, tag):
    out = tmp_path / tag
    cfg = ExperimentConfig.from_dict(doc, task=task, out=str(out))
    run(cfg)
    return {p.name: p.read_bytes() for p in out.iterdir() if p.suffix == ".csv"}


@pytest.mark.parametrize("task,doc", [
    ("evolving-sim", {"env": {"generator": "e3"}, "horizon": 4, "replicas": 4, "steps": 4, "seed": 17}),
    ("csrw-sim", {"env": {"generator": "e2"}, "horizon": 10, "replicas": 4, "t_max": 10, "seed": 5}),
])
def test_byte_identical_outputs(tmp_path, monkeypatch, task, doc):
    a = _outputs(tmp_path, task, doc, "a")
    b = _outputs(tmp_path, task, doc, "b")
    monkeypatch.setenv(harness.WORKERS_ENV, "2")
    c = _outputs(tmp_path, task, doc, "c")
    assert a and a == b == c


def test_seed_override_changes_output(tmp_path):
    doc = {"env": {"generator": "e3"}, "horizon": 4, "replicas": 3, "steps": 4, "seed": 1}
    a = _outputs(tmp_path, "evolving-sim", doc, "a")
    b = _outputs(tmp_path, "evolving-sim", {**doc, "seed": 2}, "b")
    assert a != b


def test_replica_streams_independent_of_order():
    first = harness.replica_rng(9, 3).random(4)
    harness.replica_rng(9, 0).random(100)
    assert np.array_equal(first, harness.replica_rng(9, 3).random(4))


def test_yaml_config_and_kappa_table(tmp_path):
    p = tmp_path / "k.yaml"
    p.write_text("env:\n  generator: e3\nhorizon: 3\niso:\n  d: 2\n  mode: exact\n")
    assert cli.main(["kappa-table", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "kappa.csv").exists()


def test_csrw_sim_records(tmp_path):
    cfg = ExperimentConfig.from_dict(
        {"env": {"generator": "e2"}, "horizon": 20, "replicas": 300, "t_max": 20, "target": "b"}, task="csrw-sim")
    report = run(cfg)
    names = {r.name for r in report.records}
    assert {"ring_count_mean_z", "ring_count_var_z", "effective_jump_ks_pvalue"} <= names
    assert report.summary["visit_histogram"]


def test_percolation_task_small(tmp_path):
    doc = {"perc": {"d": 3, "L": 6, "p": 1.0}, "control": {"d": 1, "L": 300, "p": 1.0},
           "n_walks": 100, "t_max": 2000, "seed": 4}
    cfg = ExperimentConfig.from_dict(doc, task="percolation-transience", out=str(tmp_path))
    report = run(cfg)
    summary = json.loads((tmp_path / "percolation.json").read_text())
    assert summary["main"]["seed"] == 4 and "kill_fraction" in summary["main"]
    assert any(r.name == "kill_fraction_reported" for r in report.records)


def test_percolation_requires_block():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({"perc": {"d": 3, "L": 5}}, task="percolation-transience")
    assert info.value.field == "perc.p"


@pytest.mark.parametrize("n,h", [(9, 1), (3, 5)])
def test_fuzzer_caps(n, h):
    with pytest.raises(ConfigError):
        harness.random_env_fuzzer(n, h, np.random.default_rng(0))


def test_steps_past_horizon_rejected():
    cfg = ExperimentConfig.from_dict({"env": {"generator": "e3"}, "steps": 4}, task="evolving-sim")
    with pytest.raises(ConfigError) as info:
        run(cfg)
    assert info.value.field == "params.steps"
