import csv
import hashlib
import subprocess
import sys
import threading
import time

import numpy as np
import pytest

from qsurrogate.cli import holdout_split, main, parse_sensor_row
from qsurrogate.femgen import Dataset, load_dataset, write_csv
from qsurrogate.nn import checkpoint

SMALL = """\
seed: 3
embedding: {degree: 1, include_bias: true}
quantum: {n_layers: 1, diag_qubits: 4, cq_qubits: 4}
nn:
  hidden: [16, 8]
  train: {max_epochs: 4}
"""


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "small.yaml"
    cfg.write_text(SMALL)
    assert run("--config", cfg, "--out-dir", root, "gen-data", "--samples", 100) == 0
    return root, cfg


def test_gen_data_rows_and_checksum(workspace, tmp_path, capsys):
    root, cfg = workspace
    ds = load_dataset(root / "dataset.csv")
    assert len(ds) == 100 and ds.sensors.shape[1] == 7 and ds.displacements.shape[1] == 132
    assert run("--config", cfg, "--out-dir", tmp_path, "gen-data", "--samples", 100) == 0
    assert sha(tmp_path / "dataset.csv") == sha(root / "dataset.csv")
    assert sha(tmp_path / "effective_config.yaml") == sha(root / "effective_config.yaml")
    out = capsys.readouterr().out
    assert "wrote 100 samples" in out and "44 nodes" in out
    assert run("--config", cfg, "--seed", 4, "--out-dir", tmp_path, "gen-data", "--samples", 100) == 0
    assert sha(tmp_path / "dataset.csv") != sha(root / "dataset.csv")


def test_gen_data_npz(tmp_path):
    out = tmp_path / "d.npz"
    assert run("--out-dir", tmp_path, "gen-data", "--samples", 5, "--output", out) == 0
    assert len(load_dataset(out)) == 5


def metrics_line(text):
    return next(line for line in text.splitlines() if line.startswith("mse="))


def test_train_then_evaluate_bit_identical(workspace, capsys):
    root, cfg = workspace
    capsys.readouterr()
    assert run("--config", cfg, "--out-dir", root, "train", "--variant", "BaselineMLP") == 0
    trained = metrics_line(capsys.readouterr().out)
    ck = root / "checkpoints" / "BaselineMLP.npz"
    assert run("--config", cfg, "--out-dir", root, "evaluate", "--checkpoint", ck) == 0
    assert metrics_line(capsys.readouterr().out) == trained
    _, meta = checkpoint.load(ck)
    assert meta["seed"] == 3 and meta["variant"] == "BaselineMLP"
    with (root / "reports" / "BaselineMLP_history.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4


def test_train_is_reproducible(workspace, tmp_path):
    root, cfg = workspace
    args = ("--config", cfg, "--out-dir", tmp_path, "train", "--variant", "PolySPD_Clustered",
            "--dataset", root / "dataset.csv")
    assert run(*args) == 0
    first = {p.name: sha(p) for p in (tmp_path / "reports").iterdir()}
    first_ck = sha(tmp_path / "checkpoints" / "PolySPD_Clustered.npz")
    assert run(*args) == 0
    assert {p.name: sha(p) for p in (tmp_path / "reports").iterdir()} == first
    assert sha(tmp_path / "checkpoints" / "PolySPD_Clustered.npz") == first_ck


def test_infer_matches_stored_predictions(workspace, tmp_path, capsys):
    root, cfg = workspace
    ck = root / "checkpoints" / "BaselineMLP.npz"
    if not ck.exists():
        run("--config", cfg, "--out-dir", root, "train", "--variant", "BaselineMLP")
    ds = load_dataset(root / "dataset.csv")
    rows = tmp_path / "rows.csv"
    lines = [",".join(f"{v:.17g}" for v in x) for x in ds.sensors[:10]]
    lines.insert(3, "1,2,3,4,5,6")  # six fields
    lines.insert(5, "a,b,c,d,e,f,g")
    rows.write_text("# sensor rows\n" + "\n".join(lines) + "\n")
    out = tmp_path / "pred.csv"
    capsys.readouterr()
    assert run("infer", "--checkpoint", ck, "--input", rows, "--output", out) == 0
    err = capsys.readouterr().err
    assert "processed 10 rows, skipped 2 malformed" in err and "p95" in err
    stored = (root / "reports" / "BaselineMLP_predictions.csv").read_text().splitlines()[:10]
    assert out.read_text().splitlines() == stored
    assert run("infer", "--checkpoint", ck, "--input", rows, "--output", out, "--dump-state", tmp_path / "s.txt") == 2


def test_infer_dump_state_is_normalized(workspace, tmp_path):
    root, cfg = workspace
    run("--config", cfg, "--out-dir", tmp_path, "train", "--variant", "QuantumClassical",
        "--dataset", root / "dataset.csv", "--epochs", 1)
    ds = load_dataset(root / "dataset.csv")
    rows = tmp_path / "rows.csv"
    rows.write_text("\n".join(",".join(f"{v:.17g}" for v in x) for x in ds.sensors[:3]) + "\n")
    dump = tmp_path / "state.txt"
    assert run("infer", "--checkpoint", tmp_path / "checkpoints" / "QuantumClassical.npz", "--input", rows,
               "--output", tmp_path / "p.csv", "--dump-state", dump, "--dump-row", 2) == 0
    amps = np.array([[float(t) for t in line.split()[1:]] for line in dump.read_text().splitlines()])
    assert amps.shape == (2**7, 2)
    assert np.sum(amps**2) == pytest.approx(1.0, abs=1e-12)


def test_infer_follow_mode_keeps_order(workspace, tmp_path):
    root, cfg = workspace
    ck = root / "checkpoints" / "BaselineMLP.npz"
    if not ck.exists():
        run("--config", cfg, "--out-dir", root, "train", "--variant", "BaselineMLP")
    ds = load_dataset(root / "dataset.csv")
    src = tmp_path / "live.csv"
    src.write_text("")
    out = tmp_path / "live_pred.csv"

    def writer():
        with src.open("a") as fh:
            for x in ds.sensors[:6]:
                line = ",".join(f"{v:.17g}" for v in x) + "\n"
                fh.write(line[:20])  # partial line first
                fh.flush()
                time.sleep(0.03)
                fh.write(line[20:])
                fh.flush()

    t = threading.Thread(target=writer)
    t.start()
    code = run("infer", "--checkpoint", ck, "--input", src, "--output", out, "--follow",
               "--poll-interval", 0.01, "--idle-timeout", 1.0)
    t.join()
    assert code == 0
    stored = (root / "reports" / "BaselineMLP_predictions.csv").read_text().splitlines()[:6]
    assert out.read_text().splitlines() == stored


def test_infer_stdin_via_subprocess(workspace):
    root, cfg = workspace
    ck = root / "checkpoints" / "BaselineMLP.npz"
    if not ck.exists():
        run("--config", cfg, "--out-dir", root, "train", "--variant", "BaselineMLP")
    ds = load_dataset(root / "dataset.csv")
    text = "\n".join(" ".join(f"{v:.17g}" for v in x) for x in ds.sensors[:4]) + "\n"
    res = subprocess.run([sys.executable, "-m", "qsurrogate.cli", "infer", "--checkpoint", str(ck)],
                         input=text, capture_output=True, text=True, check=True)
    assert len(res.stdout.splitlines()) == 4


def test_compare_rows_and_determinism(workspace, tmp_path, capsys):
    root, cfg = workspace
    a, b = tmp_path / "a", tmp_path / "b"
    argv = lambda out: ("--config", cfg, "--out-dir", out, "compare", "--dataset", root / "dataset.csv", "--epochs", 2)
    assert run(*argv(a)) == 0
    table = capsys.readouterr().out
    assert run(*argv(b)) == 0
    assert sha(a / "reports" / "compare.csv") == sha(b / "reports" / "compare.csv")
    with (a / "reports" / "compare.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    assert list(rows[0]) == ["variant", "model", "mse", "rmse", "r2", "nrmse_range", "nrmse_std", "note"]
    for r in rows:
        assert float(r["rmse"]) == pytest.approx(float(r["mse"]) ** 0.5, rel=1e-15)
    for header in ("Model", "MSE", "RMSE", "R2", "NRMSE(range)", "NRMSE(std)"):
        assert header in table
    c = tmp_path / "c"
    assert run("--config", cfg, "--out-dir", c, "compare", "--dataset", root / "dataset.csv", "--epochs", 1,
               "--variants", "ClusteredMLP") == 0
    assert len((c / "reports" / "compare.csv").read_text().splitlines()) == 2


def test_compare_records_failures(workspace, tmp_path):
    root, _ = workspace
    cfg = tmp_path / "diverge.yaml"
    cfg.write_text(SMALL.replace("max_epochs: 4", "max_epochs: 2, learning_rate: 1.0e+300"))
    with np.errstate(all="ignore"):
        assert run("--config", cfg, "--out-dir", tmp_path, "compare", "--dataset", root / "dataset.csv",
                   "--variants", "BaselineMLP", "ClusteredMLP") == 0
    with (tmp_path / "reports" / "compare.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 and all("non-finite" in r["note"] for r in rows)


def test_cluster_analyze_three_regimes(tmp_path, capsys):
    rng = np.random.default_rng(0)
    centers = rng.normal(scale=5.0, size=(3, 7))
    X = np.concatenate([c + 0.2 * rng.normal(size=(30, 7)) for c in centers])
    ds = Dataset(X, np.zeros((90, 3)), {"n_nodes": 1, "sensor_columns": [f"s{i}" for i in range(7)]})
    write_csv(ds, tmp_path / "regimes.csv")
    capsys.readouterr()
    assert run("--out-dir", tmp_path, "cluster-analyze", "--dataset", tmp_path / "regimes.csv", "--k-min", 2,
               "--k-max", 10, "--no-train") == 0
    out = capsys.readouterr().out
    assert "Davies-Bouldin min at k=3" in out
    rows = (tmp_path / "reports" / "k_sweep.csv").read_text().splitlines()
    assert len(rows) == 1 + 9


def test_complexity_command(capsys):
    assert run("complexity") == 0
    out = capsys.readouterr().out
    assert "35040" in out and "87780" in out and "R = C_QMLP / C_classical = 2.505" in out
    assert "'dense_macs': 35040" in out
    assert run("complexity", "--dims", 7, 64, 32, 1, 28, 10, 10, 64) == 0
    assert "= 448 + 2048 + 32 = 2528" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv, code",
    [
        (["complexity", "--dims", 7, 0, 32, 1017, 28, 10, 10, 64], 2),
        (["--seed", -1, "complexity"], 2),
        (["--threads", 0, "complexity"], 2),
        (["train", "--variant", "Nope", "--dataset", "missing.csv"], 3),
        (["evaluate", "--checkpoint", "missing.npz"], 3),
        (["infer", "--checkpoint", "missing.npz"], 3),
    ],
)
def test_exit_codes(tmp_path, argv, code):
    assert run("--out-dir", tmp_path, *argv) == code


def test_unknown_variant_and_bad_config(workspace, tmp_path):
    root, cfg = workspace
    assert run("--config", cfg, "--out-dir", tmp_path, "train", "--variant", "Nope",
               "--dataset", root / "dataset.csv") == 2
    assert run("--out-dir", tmp_path, "compare", "--dataset", root / "dataset.csv", "--variants", "Nope") == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("nn: {hidden: [64]}\n")
    assert run("--config", bad, "complexity") == 2


def test_threads_flag(capsys):
    assert run("--threads", 1, "complexity") == 0


def test_holdout_split_and_row_parser():
    tr, te = holdout_split(100, 0.2, 0)
    assert len(te) == 20 and not set(tr) & set(te) and len(tr) + len(te) == 100
    np.testing.assert_array_equal(holdout_split(100, 0.2, 0)[1], te)
    assert parse_sensor_row("1,2,3", 3).tolist() == [1, 2, 3]
    assert parse_sensor_row("1 2 3", 3).tolist() == [1, 2, 3]
    assert parse_sensor_row("1;2;3", 3).tolist() == [1, 2, 3]
    assert parse_sensor_row("1,2", 3) is None
    assert parse_sensor_row("1,nan,3", 3) is None
