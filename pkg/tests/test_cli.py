import json

import pytest

from dtpaudit.cli import main
from dtpaudit.data import binary_schema


def write_config(tmp_path, **overrides):
    cfg = {
        "seed": 5,
        "dataset": {"synth": {"n_records": 40, "n_features": 5, "n_classes": 2}},
        "classifier": {"algorithm": "naive-bayes"},
        "targets": [0, 1, 2],
    }
    cfg.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def csv_config(tmp_path, rows, **overrides):
    """One binary feature, two classes, ``rows`` as (x, label) pairs."""
    binary_schema(1, 2).save(tmp_path / "schema.json")
    lines = ["f0,class"] + [f"{x},c{y}" for x, y in rows]
    (tmp_path / "data.csv").write_text("\n".join(lines) + "\n")
    return write_config(tmp_path, dataset={"csv": "data.csv", "schema": "schema.json"}, **overrides)


def run(*args):
    return main([str(a) for a in args])


def test_pdtp_zero_passes_policy(tmp_path):
    cfg = write_config(tmp_path, classifier={"algorithm": "constant"})
    assert run("pdtp", "--config", cfg, "--out", tmp_path / "o", "--enforce-dtp1") == 0
    lines = (tmp_path / "o" / "pdtp.jsonl").read_text().splitlines()
    assert [json.loads(s)["epsilon"] for s in lines] == [0.0, 0.0, 0.0]


def test_pdtp_above_one_violates_policy(tmp_path, capsys):
    # Bayes inference, target (1, c1) among three x=1 records: epsilon ln 67
    cfg = csv_config(tmp_path, [(1, 0), (1, 0), (1, 1)], classifier={"algorithm": "bayes-inference"},
                     targets=[2])
    out = tmp_path / "o"
    assert run("pdtp", "--config", cfg, "--out", out) == 0
    assert run("pdtp", "--config", cfg, "--out", out, "--enforce-dtp1") == 2
    assert "DTP-1" in capsys.readouterr().err
    assert (out / "pdtp.csv").read_text().startswith("record_id,epsilon,ratio\n2,4.20")


def test_missing_dataset_file(tmp_path, capsys):
    cfg = write_config(tmp_path, dataset={"csv": "nope.csv", "schema": "adult"})
    assert run("pdtp", "--config", cfg, "--out", tmp_path) == 1
    assert "nope.csv" in capsys.readouterr().err


def test_seed_is_mandatory(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dataset": {"synth": {"n_records": 10, "n_features": 2, "n_classes": 2}}}))
    assert run("synth", "--config", cfg, "--out", tmp_path) == 1
    assert "seed" in capsys.readouterr().err
    assert run("synth", "--config", cfg, "--out", tmp_path, "--seed", 3) == 0


def test_attack_lines_and_determinism(tmp_path):
    cfg = write_config(tmp_path, attack={"kind": "distance", "shadows": 3})
    assert run("attack", "--config", cfg, "--out", tmp_path / "a") == 0
    assert run("attack", "--config", cfg, "--out", tmp_path / "b") == 0
    a = (tmp_path / "a" / "verdicts.jsonl").read_bytes()
    assert a == (tmp_path / "b" / "verdicts.jsonl").read_bytes()
    lines = [json.loads(s) for s in a.decode().splitlines()]
    assert len(lines) == 3
    assert set(lines[0]) >= {"target_id", "attack", "decision", "score"}


def test_attack_unknown_kind(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert run("attack", "--config", cfg, "--kind", "foo", "--out", tmp_path) == 1
    assert "unknown attack kind" in capsys.readouterr().err


def test_unknown_command_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 1


def test_stability_naive_bayes(tmp_path):
    cfg = write_config(tmp_path)
    assert run("stability", "--config", cfg, "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "stability.json").read_text())
    assert set(doc["bound"]["parameters"]) == {"m", "n", "n_ymin"}
    assert doc["bound"]["parameters"]["n"] == 40
    assert len(doc["dtp"]) == 3


def test_stability_knn_without_lipschitz(tmp_path, capsys):
    cfg = write_config(tmp_path, classifier={"algorithm": "knn"})
    assert run("stability", "--config", cfg, "--out", tmp_path) == 1
    assert "no analytic stability bound" in capsys.readouterr().err


def test_stability_mlp_lipschitz(tmp_path):
    cfg = write_config(tmp_path, classifier={"algorithm": "mlp", "epochs": 2},
                       dataset={"synth": {"n_records": 12, "n_features": 3, "n_classes": 2}})
    assert run("stability", "--config", cfg, "--out", tmp_path, "--lipschitz", "2.0") == 0
    doc = json.loads((tmp_path / "stability.json").read_text())
    assert doc["method"] == "lipschitz-bound" and doc["dtp"]["epsilon"] >= 0


def test_dtp_command(tmp_path):
    cfg = csv_config(tmp_path, [(1, 0), (1, 0), (1, 1), (0, 1)], classifier={"algorithm": "bayes-inference"})
    assert run("dtp", "--config", cfg, "--out", tmp_path, "--targets", "2", "3") == 0
    lines = (tmp_path / "dtp.jsonl").read_text().splitlines()
    assert [json.loads(s)["record_id"] for s in lines] == [2, 3]


def test_experiment_command(tmp_path, capsys):
    cfg = write_config(tmp_path, protocol={"iterations": 2, "pdtp_iterations": 1, "targets": 4})
    assert run("experiment", "--config", cfg, "--out", tmp_path / "e", "--workers", "1") == 0
    out = tmp_path / "e"
    assert {p.name for p in out.iterdir()} == {"report.json", "per_target.csv", "summary.txt"}
    assert "Attack Acc" in capsys.readouterr().out


def test_reduce_and_synth(tmp_path):
    cfg = write_config(tmp_path, removals=2, dataset={"synth": {"n_records": 16, "n_features": 3, "n_classes": 2}})
    assert run("reduce", "--config", cfg, "--out", tmp_path) == 0
    assert len((tmp_path / "reduction.csv").read_text().splitlines()) == 4
    assert run("synth", "--config", cfg, "--out", tmp_path) == 0
    assert (tmp_path / "synth.csv").read_text().count("\n") == 17


def test_bad_target_ids(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert run("pdtp", "--config", cfg, "--out", tmp_path, "--targets", "999") == 1
    assert "999" in capsys.readouterr().err
