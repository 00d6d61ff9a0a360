import json
import subprocess
import sys

import pytest

from dofw import cli, config, experiment


def small_config(out, **over):
    raw = {
        "seed": 3,
        "network": {"topology": "cycle_split", "n": 4, "Q": 3},
        "loss": {"kind": "ridge", "lambda1": 1e-3},
        "set": {"kind": "simplex"},
        "dims": [3],
        "horizons": [20, 40],
        "runs": [
            {"label": "fw", "algorithm": "dofw", "step": {"kind": "power", "c": 0.25, "theta": 0.4}},
            {"label": "gd", "algorithm": "dogd", "step": {"kind": "constant", "alpha": 0.1}},
        ],
        "output": str(out),
    }
    return config.merge(raw, over)


def write(tmp_path, raw, name="exp.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return str(p)


def test_check_only_fig1_preset(capsys):
    assert cli.main(["run", "--preset", "fig1", "--check-only"]) == 0
    assert "config ok" in capsys.readouterr().out


def test_all_presets_validate():
    for name in config.PRESETS:
        conf, rep = config.validate(config.load_preset(name), certify=False)
        assert rep.ok, rep.errors


def test_n_mismatch_names_both_fields(tmp_path, capsys):
    path = write(tmp_path, small_config(tmp_path / "o", loss={"n": 5}))
    assert cli.main(["run", "--config", path]) == 1
    err = capsys.readouterr().err
    assert "loss.n" in err and "network.n" in err


def test_small_Q_rejected(tmp_path, capsys):
    path = write(tmp_path, small_config(tmp_path / "o", network={"n": 6, "Q": 2}))
    assert cli.main(["run", "--config", path, "--check-only"]) == 1
    err = capsys.readouterr().err
    assert "network.Q" in err and "joint connectivity" in err


def test_missing_seed_rejected(tmp_path, capsys):
    raw = small_config(tmp_path / "o")
    del raw["seed"]
    assert cli.main(["run", "--config", write(tmp_path, raw)]) == 1
    assert "seed: is mandatory" in capsys.readouterr().err


@pytest.mark.parametrize("patch,field", [
    ({"runs": [{"algorithm": "sgd", "step": {"kind": "constant", "alpha": 0.1}}]}, "runs[0].algorithm"),
    ({"runs": [{"algorithm": "dofw", "step": {"kind": "constant", "alpha": -0.1}}]}, "runs[0]"),
    ({"set": {"kind": "ball"}}, "set.kind"),
    ({"metrics": {"at": "v"}}, "metrics.at"),
    ({"horizons": []}, "horizons"),
])
def test_field_paths_in_errors(tmp_path, capsys, patch, field):
    assert cli.main(["run", "--config", write(tmp_path, small_config(tmp_path / "o", **patch))]) == 1
    assert field in capsys.readouterr().err


def test_unreadable_config(tmp_path, capsys):
    (tmp_path / "bad.json").write_text("{")
    assert cli.main(["run", "--config", str(tmp_path / "bad.json")]) == 1
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    assert cli.main(["run"]) == 1


def _artifacts(out):
    return {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*.csv"))
            if p.name not in ("timing.csv",)}


def test_run_writes_artifacts_and_reruns_identically(tmp_path, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        path = write(tmp_path, small_config(out), f"exp{k}.json")
        assert cli.main(["run", "--config", path]) == 0
        outs.append(out)
    files = _artifacts(outs[0])
    names = {str(p) for p in files}
    for cell in ("fw/d3_T20_r0", "fw/d3_T40_r0"):
        for f in ("trace_full.csv", "regret.csv", "diagnostics.csv"):
            assert f"{cell}/{f}" in names
    assert "gd/d3_T40_r0/regret.csv" in names
    # trace.csv carries the machine-dependent timing column; compare the rest
    other = _artifacts(outs[1])
    for p, data in files.items():
        if p.name == "trace.csv":
            strip = lambda b: [line.rsplit(b",", 1)[0] for line in b.splitlines()]
            assert strip(data) == strip(other[p])
        else:
            assert data == other[p], p
    summary = json.loads((outs[0] / "summary.json").read_text())
    assert summary["ok"] and summary["seed"] == 3 and len(summary["cells"]) == 4
    fw = [c for c in summary["cells"] if c["label"] == "fw"][0]
    assert fw["checks"]["conservation"]["ok"] and "C1" in fw["theorem1"]
    assert (outs[0] / "timing.csv").exists()


def test_seed_and_out_overrides(tmp_path):
    path = write(tmp_path, small_config(tmp_path / "ignored", horizons=[10]))
    assert cli.main(["run", "--config", path, "--seed", "11", "--out", str(tmp_path / "x")]) == 0
    assert json.loads((tmp_path / "x" / "summary.json").read_text())["seed"] == 11
    assert not (tmp_path / "ignored").exists()


def test_failing_invariant_exits_2(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(experiment, "CONSERVATION_TOL", -1.0)
    path = write(tmp_path, small_config(tmp_path / "o", horizons=[10]))
    assert cli.main(["run", "--config", path]) == 2
    assert "FAILED conservation" in capsys.readouterr().out
    assert not json.loads((tmp_path / "o" / "summary.json").read_text())["ok"]


def test_threads_env_gives_same_results(tmp_path, monkeypatch):
    raw = small_config(tmp_path / "a", horizons=[15, 25])
    conf, _ = config.validate(raw)
    experiment.run_experiment(conf, tmp_path / "a", threads=1)
    monkeypatch.setenv(experiment.THREADS_ENV, "3")
    assert experiment.thread_count() == 3
    experiment.run_experiment(conf, tmp_path / "b")
    a, b = _artifacts(tmp_path / "a"), _artifacts(tmp_path / "b")
    assert a.keys() == b.keys()
    for p in a:
        if p.name != "trace.csv":
            assert a[p] == b[p]


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "dofw.cli", "run", "--preset", "fig3", "--check-only"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "config ok" in r.stdout
