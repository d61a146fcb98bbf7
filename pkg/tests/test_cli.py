import json

import numpy as np
import pytest

from fioresidue.cli import main
from fioresidue.trace_engine import TraceSamples


def write(tmp_path, cfg, name="job.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


INVERSE_OSCILLATOR = {
    "modes": 1,
    "D": [{"osc_power": 1, "terms": [{"xpow": [0], "ppow": [0]}]}],
}


def test_residue_command(tmp_path):
    out = tmp_path / "r.json"
    assert main(["residue", "--config", write(tmp_path, INVERSE_OSCILLATOR), "--out", str(out)]) == 0
    data = json.loads(out.read_text())["data"]
    assert data["value_re"] == pytest.approx(2.0, abs=1e-12)
    assert data["value_im"] == pytest.approx(0.0, abs=1e-12)


def test_heat_command_writes_rows_and_sidecar(tmp_path):
    cfg = {"modes": 1, "grid": "0.05:2:40", "D": [{"angles": [1.0], "terms": [{"xpow": [0], "ppow": [0]}]}]}
    out = tmp_path / "heat.csv"
    assert main(["heat", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    samples = TraceSamples.from_csv(out)
    assert len(samples) == 40 and np.all(np.diff(samples.grid.real) > 0)
    t = samples.grid.real
    assert np.allclose(samples.values, np.exp(-t / 2) / (1 - np.exp(-1j - t)), atol=1e-10)
    side = json.loads((tmp_path / "heat.csv.json").read_text())
    assert side["data"]["rows"] == 40 and "config_sha256" in side["metadata"]


@pytest.mark.parametrize(
    "cfg",
    [
        {"modes": 5, "D": INVERSE_OSCILLATOR["D"]},
        {"modes": 1, "D": [{"terms": [{"xpow": [0, 1], "ppow": [0]}]}]},
        {"modes": 1, "D": INVERSE_OSCILLATOR["D"], "unknown": 1},
        {"modes": 1, "D": INVERSE_OSCILLATOR["D"], "grid": "1:2"},
    ],
)
def test_bad_config_exits_2(tmp_path, cfg, capsys):
    assert main(["heat", "--config", write(tmp_path, cfg)]) == 2
    assert "error" in capsys.readouterr().err


def test_task_mismatch_exits_2(tmp_path):
    cfg = dict(INVERSE_OSCILLATOR, task="heat")
    assert main(["residue", "--config", write(tmp_path, cfg)]) == 2


def test_numerical_failure_exits_3(tmp_path):
    # the identity's zeta function diverges at Re z <= n
    cfg = {"modes": 1, "z_re": [0.5], "D": [{"terms": [{"xpow": [0], "ppow": [0]}]}]}
    assert main(["zeta", "--config", write(tmp_path, cfg)]) == 3


def test_resolvent_on_spectrum_exits_3(tmp_path):
    cfg = dict(INVERSE_OSCILLATOR, grid="-1.5:-1.5:1")
    cfg["D"] = [{"terms": [{"xpow": [0], "ppow": [0]}]}]
    assert main(["resolvent", "--config", write(tmp_path, cfg)]) in (2, 3)


def test_output_data_is_deterministic(tmp_path):
    path = write(tmp_path, INVERSE_OSCILLATOR)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["residue", "--config", path, "--out", str(a)])
    main(["residue", "--config", path, "--out", str(b)])
    ja, jb = json.loads(a.read_text()), json.loads(b.read_text())
    assert ja["data"] == jb["data"]
    assert ja["metadata"]["config_sha256"] == jb["metadata"]["config_sha256"]


def test_fit_round_trip(tmp_path):
    cfg = {"modes": 1, "grid": "0.01:0.3:30", "fit": {"j_max": 6}, "D": [{"terms": [{"xpow": [0], "ppow": [0]}]}]}
    path = write(tmp_path, cfg)
    csv = tmp_path / "h.csv"
    assert main(["heat", "--config", path, "--out", str(csv)]) == 0
    out = tmp_path / "fit.json"
    assert main(["fit", "--config", path, "--samples", str(csv), "--out", str(out)]) == 0
    assert "expansion" in json.loads(out.read_text())["data"]


def test_verify_single_criterion(capsys):
    assert main(["verify", "--only", "3"]) == 0
    assert "[PASS]  3 " in capsys.readouterr().out
