import json

import numpy as np
import pytest

from photonlab.cli import run

POISSON = {"family": "poissonian", "mean": 30}
DETS = [{"R_aa": 0.3, "R_bb": 0.2}, {"R_aa": 0.2, "R_bb": 0.3, "theta": 2.199}]


def write(tmp_path, **kw):
    cfg = {"sources": {"kind": "independent", "a": POISSON, "b": POISSON}, "detectors": DETS, **kw}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def test_joint_writes_csv_and_sidecar(tmp_path):
    cfg = write(tmp_path)
    assert run(["joint", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    header, data = read_csv(tmp_path / "o" / "joint.csv")
    assert header == ["n1", "n2", "probability"]
    assert data[:, 2].sum() == pytest.approx(1.0, abs=1e-9)
    side = json.loads((tmp_path / "o" / "joint.json").read_text())
    assert side["engine"] == ["phase"] and side["degraded"] is False
    assert side["tail_mass"] <= 1e-9


def test_csv_format(tmp_path):
    cfg = write(tmp_path)
    run(["marginal", "--config", cfg, "--out", str(tmp_path)])
    raw = (tmp_path / "marginal.csv").read_bytes()
    assert b"\r" not in raw
    first = raw.split(b"\n")[1].split(b",")
    assert first[0] == b"0"
    assert first[1].decode() == "%.17g" % float(first[1])


def test_conditional_is_normalised(tmp_path):
    cfg = write(tmp_path)
    assert run(["conditional", "--config", cfg, "--fix", "n1=12", "--out", str(tmp_path)]) == 0
    _, data = read_csv(tmp_path / "conditional.csv")
    assert data[:, 1].sum() == pytest.approx(1.0, abs=1e-12)


def test_seeded_sampling_is_byte_identical(tmp_path):
    cfg = write(tmp_path, samples=200)
    for d in ("a", "b"):
        assert run(["sample", "--config", cfg, "--seed", "11", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "sample.csv").read_bytes() == (tmp_path / "b" / "sample.csv").read_bytes()
    run(["sample", "--config", cfg, "--seed", "12", "--out", str(tmp_path / "c")])
    assert (tmp_path / "a" / "sample.csv").read_bytes() != (tmp_path / "c" / "sample.csv").read_bytes()


def test_trajectory_and_scaling(tmp_path):
    cfg = write(tmp_path, scaling={"q": "1/2"}, grid=60)
    assert run(["trajectory", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "trajectory.csv")
    assert header == ["delta", "n1", "n2"] and len(data) == 256
    assert run(["scaling-check", "--config", cfg, "--out", str(tmp_path)]) == 0
    side = json.loads((tmp_path / "scaling.json").read_text())
    assert side["sup_norm"] < 1e-10


def test_exit_codes(tmp_path, capsys):
    assert run(["joint", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"sources": {"kind": "independent", "a": POISSON, "b": POISSON}, "detectors": DETS, "oops": 1}))
    assert run(["joint", "--config", str(bad), "--out", str(tmp_path)]) == 2
    heavy = write(tmp_path, detectors=[{"R_aa": 0.75, "R_bb": 0.5}, {"R_aa": 0.5, "R_bb": 0.75}])
    assert run(["joint", "--config", heavy, "--engine", "fock", "--out", str(tmp_path)]) == 4
    assert run(["conditional", "--config", write(tmp_path), "--out", str(tmp_path)]) == 2
    assert run(["figure", "5", "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_figure_three_preset(tmp_path):
    assert run(["figure", "3", "--out", str(tmp_path)]) == 0
    _, data = read_csv(tmp_path / "figure3.csv")
    p = data[:, 1]
    assert p.sum() == pytest.approx(1.0, abs=1e-9)
    assert {int(data[np.argmax(p[:300]), 0]), int(data[300 + np.argmax(p[300:]), 0])} <= set(range(160, 510))
