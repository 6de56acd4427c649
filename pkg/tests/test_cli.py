"""End-to-end checks of the command-line driver.

Every invocation goes through main(argv) in-process; the contract under
test is the exit code and the files a command leaves behind.
"""

import json
import os

import numpy as np
import pytest

from hdmrfit.cli import main
from hdmrfit.model import evaluate_model, load_model


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    """Workspace holding a small generated diffusion dataset (no x column)."""
    d = tmp_path_factory.mktemp("cli")
    rc = main(["gen-diffusion", "--out", str(d / "diff.csv"), "--nq", "260",
               "--nd-nu", "2", "--nd-f", "2", "--mx", "32", "--mk", "48",
               "--seed", "3"])
    assert rc == 0
    return d


def _fit_args(ws, out, *extra):
    return ["fit", str(ws / "diff.csv"), "--out", str(out), "--no", "3",
            "--nolars", "2", "--ninter", "2", "--npc", "2", "--seed", "1",
            *extra]


def test_gen_writes_csv_and_manifest(ws):
    csv = ws / "diff.csv"
    assert csv.exists()
    header = csv.read_text().splitlines()[0]
    assert header == "xi1,xi2,xi3,xi4,u"
    doc = json.loads((ws / "diff.csv.manifest.json").read_text())
    assert doc["command"] == "gen-diffusion"
    assert doc["config"]["nq"] == 260
    assert set(doc["versions"]) >= {"python", "numpy", "scipy"}
    assert doc["timings"]["total"] > 0
    assert str(csv) in doc["outputs"]


def test_fit_predict_stats_round_trip(ws, tmp_path, capsys):
    model_path = tmp_path / "m.json"
    rc = main(_fit_args(ws, model_path, "--test", "30"))
    assert rc == 0
    out = capsys.readouterr().out
    assert "test relative error" in out

    pred_path = tmp_path / "p.csv"
    rc = main(["predict", str(model_path), str(ws / "diff.csv"),
               "--out", str(pred_path)])
    assert rc == 0
    lines = pred_path.read_text().splitlines()
    assert lines[0] == "u_hat"
    assert len(lines) == 1 + 260

    # spot-check the written predictions against direct evaluation
    model = load_model(model_path)
    raw = np.loadtxt(ws / "diff.csv", delimiter=",", skiprows=1)
    direct = evaluate_model(model, raw[:3, :4])
    for k in range(3):
        assert float(lines[1 + k]) == pytest.approx(direct[k], rel=1e-15)

    stats_path = tmp_path / "s.csv"
    rc = main(["stats", str(model_path), "--out", str(stats_path)])
    assert rc == 0
    rows = [ln.split(",") for ln in stats_path.read_text().splitlines()[1:]]
    kinds = {r[0] for r in rows}
    assert {"mean", "variance"} <= kinds
    var = float(next(r[2] for r in rows if r[0] == "variance"))
    assert np.isfinite(var) and var >= 0
    if "sobol" in kinds:
        total = sum(float(r[2]) for r in rows if r[0] == "sobol")
        assert total == pytest.approx(1.0, abs=1e-10)


def test_fit_manifest_records_run(ws, tmp_path):
    model_path = tmp_path / "m.json"
    diag_path = tmp_path / "diag.csv"
    rc = main(_fit_args(ws, model_path, "--diagnostics", str(diag_path),
                        "--manifest", str(tmp_path / "mf.json")))
    assert rc == 0
    assert diag_path.exists()
    doc = json.loads((tmp_path / "mf.json").read_text())
    assert doc["command"] == "fit"
    assert doc["seed"] == 1
    assert doc["config"]["no"] == 3
    assert str(model_path) in doc["outputs"]
    assert str(diag_path) in doc["outputs"]
    assert {"load", "select", "fit", "total"} <= set(doc["timings"])


def test_fit_model_bytes_deterministic(ws, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(_fit_args(ws, a)) == 0
    assert main(_fit_args(ws, b)) == 0
    assert a.read_bytes() == b.read_bytes()


def test_missing_data_exits_3(tmp_path, capsys):
    rc = main(["fit", str(tmp_path / "nope.csv")])
    assert rc == 3
    assert "error:" in capsys.readouterr().err


def test_bad_basis_interval_exits_2(ws, tmp_path):
    rc = main(_fit_args(ws, tmp_path / "m.json",
                        "--basis-lo", "1.0", "--basis-hi", "0.0"))
    assert rc == 2


def test_oversubscribed_split_exits_3(ws, tmp_path):
    rc = main(_fit_args(ws, tmp_path / "m.json", "--train", "10000"))
    assert rc == 3


def test_separated_without_spatial_column_exits_3(ws, tmp_path):
    rc = main(_fit_args(ws, tmp_path / "m.json", "--mode", "separated"))
    assert rc == 3


def test_out_of_domain_spatial_exits_4(tmp_path):
    # x runs over [0, 2] but the spatial basis defaults to [0, 1]
    csv = tmp_path / "sp.csv"
    g = np.random.default_rng(0)
    with open(csv, "w") as fh:
        fh.write("x1,xi1,xi2,u\n")
        for _ in range(60):
            x = float(g.uniform(0, 2))
            a, b = (float(v) for v in g.uniform(0, 1, 2))
            fh.write(f"{x!r},{a!r},{b!r},{float(np.sin(x) * (1 + a))!r}\n")
    rc = main(["fit", str(csv), "--mode", "separated",
               "--out", str(tmp_path / "m.json"), "--no", "2", "--nolars", "2",
               "--ninter", "1", "--npc", "1", "--cardx", "4", "--rank", "1"])
    assert rc == 4


def test_separated_fit_predict_and_stats_rejection(tmp_path):
    csv = tmp_path / "field.csv"
    rc = main(["gen-diffusion", "--out", str(csv), "--nq", "300",
               "--nd-nu", "2", "--nd-f", "2", "--mx", "32", "--mk", "48",
               "--sampling", "scattered", "--seed", "5"])
    assert rc == 0
    header = csv.read_text().splitlines()[0]
    assert header.startswith("x1,xi1")

    model_path = tmp_path / "sep.json"
    rc = main(["fit", str(csv), "--mode", "separated", "--out", str(model_path),
               "--no", "3", "--nolars", "2", "--ninter", "2", "--npc", "2",
               "--cardx", "8", "--rank", "1", "--seed", "1"])
    assert rc == 0

    pred_path = tmp_path / "p.csv"
    rc = main(["predict", str(model_path), str(csv), "--out", str(pred_path)])
    assert rc == 0
    vals = [float(v) for v in pred_path.read_text().splitlines()[1:]]
    assert len(vals) == 300
    assert all(np.isfinite(v) for v in vals)

    # closed-form moments are undefined for the separated format
    assert main(["stats", str(model_path)]) == 2


def test_predict_rejects_bad_model_file(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text('{"schema": 99}\n')
    csv = tmp_path / "d.csv"
    csv.write_text("xi1,u\n0.5,1.0\n")
    assert main(["predict", str(bad), str(csv)]) == 3


def test_bench_scaling_writes_rows(tmp_path):
    out = tmp_path / "bench.csv"
    rc = main(["bench", "--kind", "scaling", "--out", str(out),
               "--nq", "120", "--nd", "5", "--nd2", "6", "--no", "3",
               "--nolars", "3", "--bench-steps", "2"])
    assert rc == 0
    rows = [ln.split(",") for ln in out.read_text().splitlines()[1:]]
    scans = [r for r in rows if r[0] == "scan"]
    coeffs = [r for r in rows if r[0] == "coeff"]
    assert len(scans) == 2 and len(coeffs) == 2
    # cardinality grows with the dimension; timings are positive
    assert int(scans[1][2]) > int(scans[0][2])
    assert all(float(r[3]) > 0 for r in rows)


def test_bench_convergence_writes_rows(tmp_path):
    out = tmp_path / "conv.csv"
    rc = main(["bench", "--kind", "convergence", "--out", str(out),
               "--nq-list", "80,160", "--nd-nu", "2", "--nd-f", "2",
               "--mx", "32", "--mk", "48", "--ntest", "200", "--no", "3",
               "--nolars", "3"])
    assert rc == 0
    rows = [ln.split(",") for ln in out.read_text().splitlines()[1:]]
    assert [r[0] for r in rows] == ["eps", "eps"]
    assert [int(r[1]) for r in rows] == [80, 160]
    assert all(0 <= float(r[3]) < 1 for r in rows)


def test_threads_flag_seeds_env(tmp_path, monkeypatch):
    monkeypatch.delenv("HDMR_THREADS", raising=False)
    rc = main(["--threads", "2", "predict", str(tmp_path / "no.json"),
               str(tmp_path / "no.csv")])
    assert rc == 3
    assert os.environ["HDMR_THREADS"] == "2"
    # an explicit environment setting wins over the flag
    monkeypatch.setenv("HDMR_THREADS", "7")
    main(["--threads", "2", "predict", str(tmp_path / "no.json"),
          str(tmp_path / "no.csv")])
    assert os.environ["HDMR_THREADS"] == "7"
