"""Command-line front end: data generation, cluster analysis, training, comparison, inference."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import qsim
from .clustering import k_sweep, plot_report
from .complexity import ComplexityDims, complexity, model_counts
from .config import ExperimentConfig, load_config
from .errors import ConfigError, DataError, NumericalError
from .femgen import build_frame, conditioning_diagnostic, load_dataset, sample_dataset, write_csv, write_npz
from .nn import TABLE_NAMES, VARIANTS, EmbedConfig, HybridModel, QuantumConfig, MetricsReport, build_variant, checkpoint, evaluate, train
from .seeding import stream

log = logging.getLogger("qsurrogate")

METRIC_COLUMNS = ("mse", "rmse", "r2", "nrmse_range", "nrmse_std")


# ---------------------------------------------------------------- helpers

def _out(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_effective_config(cfg: ExperimentConfig, out: Path) -> None:
    (out / "effective_config.yaml").write_text(cfg.effective_yaml())


def _dataset_path(cfg: ExperimentConfig, args) -> Path:
    if getattr(args, "dataset", None):
        return Path(args.dataset)
    if cfg.paths.dataset:
        return Path(cfg.paths.dataset)
    return Path(args.out_dir) / f"dataset.{cfg.femgen.format}"


def _subdir(out: Path, name: str) -> Path:
    p = out / name
    p.mkdir(parents=True, exist_ok=True)
    return p


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def holdout_split(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded (train, test) index split shared by train, evaluate and compare."""
    n_test = max(1, int(round(n * test_fraction)))
    if n - n_test < 2:
        raise DataError(f"dataset with {n} rows is too small for a {test_fraction} test split")
    perm = stream(seed, "holdout").permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def format_metrics(m: MetricsReport) -> str:
    return " ".join(f"{k}={getattr(m, k)!r}" for k in METRIC_COLUMNS)


def _architecture(cfg: ExperimentConfig, tag: str, n_in: int, n_out: int):
    if tag not in VARIANTS:
        raise ConfigError(f"unknown variant {tag!r}; choose from {', '.join(VARIANTS)}")
    try:
        return build_variant(
            tag, n_in, n_out, cfg.clustering.final_k, cfg.quantum.build(), cfg.embedding.build(),
            tuple(cfg.nn.hidden), cfg.nn.cluster_placement,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _fit(cfg: ExperimentConfig, tag: str, X: np.ndarray, Y: np.ndarray, epochs: int | None):
    arch = _architecture(cfg, tag, X.shape[1], Y.shape[1])
    t0 = time.perf_counter()
    model, hist = train(arch, X, Y, cfg.train_config(epochs))
    return model, hist, time.perf_counter() - t0


def predict_rows(model: HybridModel, X: np.ndarray) -> np.ndarray:
    """Row-at-a-time predictions: the exact arithmetic path used by streaming inference."""
    return np.vstack([model.predict(x[None, :]) for x in X])


def _write_matrix(path: Path, M: np.ndarray) -> None:
    buf = io.StringIO()
    np.savetxt(buf, M, fmt="%.17g", delimiter=",")
    path.write_text(buf.getvalue())


# ---------------------------------------------------------------- commands

def cmd_gen_data(cfg: ExperimentConfig, args) -> int:
    out = _out(args)
    n = args.samples or cfg.femgen.samples
    model = build_frame(cfg.femgen.frame())
    ds = sample_dataset(model, n, cfg.seed, load_cfg=cfg.femgen.loads(), noise_sigma=cfg.femgen.noise_sigma)
    path = Path(args.output) if args.output else _dataset_path(cfg, args)
    path.parent.mkdir(parents=True, exist_ok=True)
    (write_npz if path.suffix == ".npz" else write_csv)(ds, path)
    _write_effective_config(cfg, out)
    U = ds.displacements.reshape(len(ds), -1, 3)
    print(f"wrote {len(ds)} samples to {path}")
    print(f"frame: {model.n_nodes} nodes, {model.n_dof} DOFs, {len(model.elements)} elements; "
          f"{ds.sensors.shape[1]} sensor channels, {ds.displacements.shape[1]} outputs")
    for a, name in enumerate("xyz"):
        print(f"u{name} range [{U[..., a].min():.4e}, {U[..., a].max():.4e}] m")
    print(f"sensor range [{ds.sensors.min():.4e}, {ds.sensors.max():.4e}] rad")
    print(conditioning_diagnostic(model).summary())
    return 0


def cmd_cluster_analyze(cfg: ExperimentConfig, args) -> int:
    out = _out(args)
    ds = load_dataset(_dataset_path(cfg, args))
    k_min = args.k_min or cfg.clustering.k_min
    k_max = args.k_max or cfg.clustering.k_max
    if not 2 <= k_min <= k_max <= 12:
        raise ConfigError("k range must satisfy 2 <= k_min <= k_max <= 12")
    tcfg = cfg.train_config(args.epochs or cfg.clustering.sweep_epochs)
    Y = None if args.no_train else ds.displacements
    report = k_sweep(ds.sensors, Y, range(k_min, k_max + 1), tcfg, cfg.seed, log=log.warning)
    reports = _subdir(out, cfg.paths.reports)
    (reports / "k_sweep.csv").write_text(report.to_csv())
    _write_effective_config(cfg, out)
    print(report.table())
    best = report.best()
    print(f"silhouette max at k={best['silhouette']}; Davies-Bouldin min at k={best['davies_bouldin']}; "
          f"model k (config) = {cfg.clustering.final_k}")
    if args.plot:
        plot_report(report, args.plot)
    return 0


def cmd_train(cfg: ExperimentConfig, args) -> int:
    out = _out(args)
    path = _dataset_path(cfg, args)
    ds = load_dataset(path)
    tr, te = holdout_split(len(ds), cfg.nn.test_fraction, cfg.seed)
    model, hist, secs = _fit(cfg, args.variant, ds.sensors[tr], ds.displacements[tr], args.epochs)
    metrics = evaluate(model, ds.sensors[te], ds.displacements[te])
    ckdir, reports = _subdir(out, cfg.paths.checkpoints), _subdir(out, cfg.paths.reports)
    tcfg = cfg.train_config(args.epochs)
    meta = {
        "variant": args.variant,
        "seed": cfg.seed,
        "test_fraction": cfg.nn.test_fraction,
        "train_config": tcfg.__dict__,
        "train_config_hash": tcfg.config_hash(),
        "dataset_sha256": _sha256(path),
        "best_epoch": hist.best_epoch,
        "metrics": metrics.as_dict(),
    }
    ck = ckdir / f"{args.variant}.npz"
    checkpoint.save(model, ck, meta)
    with (reports / f"{args.variant}_history.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for e, (a, b) in enumerate(zip(hist.train_loss, hist.val_loss)):
            w.writerow([e, repr(a), repr(b)])
    _write_matrix(reports / f"{args.variant}_predictions.csv", predict_rows(model, ds.sensors))
    _write_effective_config(cfg, out)
    print(f"{args.variant}: {len(hist.val_loss)} epochs (best {hist.best_epoch}), {secs:.1f} s; checkpoint {ck}")
    print(format_metrics(metrics))
    return 0


def cmd_evaluate(cfg: ExperimentConfig, args) -> int:
    model, meta = checkpoint.load(args.checkpoint)
    path = _dataset_path(cfg, args)
    ds = load_dataset(path)
    seed = meta.get("seed", cfg.seed)
    _, te = holdout_split(len(ds), meta.get("test_fraction", cfg.nn.test_fraction), seed)
    if meta.get("dataset_sha256") not in (None, _sha256(path)):
        log.warning("dataset differs from the one used for training; held-out rows may overlap training data")
    print(format_metrics(evaluate(model, ds.sensors[te], ds.displacements[te], args.space)))
    return 0


def comparison_table(rows: list[dict]) -> str:
    head = f"{'Model':<36} {'MSE':>11} {'RMSE':>11} {'R2':>9} {'NRMSE(range)':>13} {'NRMSE(std)':>11} {'train s':>8} {'infer ms':>9}"
    lines = [head, "-" * len(head)]
    for r in rows:
        name = TABLE_NAMES[r["variant"]]
        if r["note"]:
            lines.append(f"{name:<36} {'failed: ' + r['note']}")
            continue
        lines.append(
            f"{name:<36} {r['mse']:>11.4e} {r['rmse']:>11.4e} {r['r2']:>9.4f} {r['nrmse_range']:>13.4e} "
            f"{r['nrmse_std']:>11.4e} {r['train_s']:>8.1f} {r['infer_ms']:>9.3f}"
        )
    return "\n".join(lines)


def cmd_compare(cfg: ExperimentConfig, args) -> int:
    out = _out(args)
    ds = load_dataset(_dataset_path(cfg, args))
    tr, te = holdout_split(len(ds), cfg.nn.test_fraction, cfg.seed)
    variants = args.variants or list(cfg.nn.variants)
    for tag in variants:
        if tag not in VARIANTS:
            raise ConfigError(f"unknown variant {tag!r}; choose from {', '.join(VARIANTS)}")
    rows = []
    for tag in variants:
        row = {"variant": tag, "note": "", **{k: math.nan for k in METRIC_COLUMNS}, "train_s": math.nan,
               "infer_ms": math.nan}
        try:
            model, _, secs = _fit(cfg, tag, ds.sensors[tr], ds.displacements[tr], args.epochs)
            row.update(evaluate(model, ds.sensors[te], ds.displacements[te]).as_dict())
            t0 = time.perf_counter()
            model.predict(ds.sensors[te])
            row["train_s"] = secs
            row["infer_ms"] = 1e3 * (time.perf_counter() - t0) / len(te)
        except (ArithmeticError, ValueError) as exc:
            row["note"] = str(exc).replace("\n", " ")
            log.warning("%s failed: %s", tag, row["note"])
        rows.append(row)
    reports = _subdir(out, cfg.paths.reports)
    # Metrics and timings live in separate files so the metrics file is reproducible byte for byte.
    with (reports / "compare.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "model", *METRIC_COLUMNS, "note"])
        for r in rows:
            w.writerow([r["variant"], TABLE_NAMES[r["variant"]], *(repr(float(r[k])) for k in METRIC_COLUMNS), r["note"]])
    with (reports / "compare_timings.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "train_s", "infer_ms_per_sample"])
        for r in rows:
            w.writerow([r["variant"], f"{r['train_s']:.3f}", f"{r['infer_ms']:.4f}"])
    _write_effective_config(cfg, out)
    print(comparison_table(rows))
    return 0


def _follow_lines(path: Path, poll: float, idle_timeout: float | None):
    """Yield complete lines as they are appended to ``path``, in order."""
    with path.open() as fh:
        pending = ""
        idle_since = time.monotonic()
        while True:
            chunk = fh.readline()
            if chunk:
                pending += chunk
                if pending.endswith("\n"):
                    yield pending
                    pending = ""
                idle_since = time.monotonic()
                continue
            if idle_timeout is not None and time.monotonic() - idle_since >= idle_timeout:
                if pending:
                    yield pending
                return
            time.sleep(poll)


def parse_sensor_row(line: str, n_inputs: int) -> np.ndarray | None:
    """Sensor values from one delimited line, or ``None`` when the row is malformed."""
    fields = [f for f in line.replace(";", ",").replace("\t", ",").split(",")]
    if len(fields) == 1:
        fields = line.split()
    if len(fields) != n_inputs:
        return None
    try:
        x = np.array([float(f) for f in fields])
    except ValueError:
        return None
    return x if np.all(np.isfinite(x)) else None


def cmd_infer(cfg: ExperimentConfig, args) -> int:
    model, _ = checkpoint.load(args.checkpoint)
    n_in = model.arch.n_inputs
    if args.dump_state and not any(b["type"] == "quantum" for b in model.arch.blocks):
        raise ConfigError(f"--dump-state needs a quantum variant; {model.tag} is classical")
    if args.follow:
        if args.input == "-":
            raise ConfigError("follow mode needs a file path")
        lines = _follow_lines(Path(args.input), args.poll_interval, args.idle_timeout)
    elif args.input == "-":
        lines = sys.stdin
    else:
        p = Path(args.input)
        if not p.exists():
            raise DataError(f"input file not found: {p}")
        lines = p.open()
    sink = sys.stdout if args.output == "-" else open(args.output, "w")
    latencies, skipped, done = [], 0, 0
    try:
        for lineno, line in enumerate(lines, 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            t0 = time.perf_counter()
            x = parse_sensor_row(line.strip(), n_in)  # 1. acquire
            if x is None:
                skipped += 1
                log.warning("line %d: expected %d numeric sensor values; row skipped", lineno, n_in)
                continue
            F = model.featurize(x[None, :])  # 2. embed
            out = F
            for layer in model.layers:  # 3. quantum features, 4. classical mapping
                out = layer.forward(out)
            y = model.y_scaler.inverse(out) if model.y_scaler is not None else out
            sink.write(",".join(f"{v:.17g}" for v in y[0]) + "\n")  # 5. update twin
            sink.flush()
            latencies.append(time.perf_counter() - t0)
            if args.dump_state and done == args.dump_row:
                Path(args.dump_state).write_text(qsim.dump_state(model.quantum_output_state(x[None, :])[0]))
            done += 1
    except KeyboardInterrupt:
        pass
    finally:
        if sink is not sys.stdout:
            sink.close()
    if latencies:
        ms = 1e3 * np.array(latencies)
        print(f"processed {done} rows, skipped {skipped} malformed; latency median {np.median(ms):.3f} ms, "
              f"p95 {np.percentile(ms, 95):.3f} ms", file=sys.stderr)
    else:
        print(f"processed 0 rows, skipped {skipped} malformed", file=sys.stderr)
    return 0


def cmd_complexity(cfg: ExperimentConfig, args) -> int:
    try:
        dims = ComplexityDims(*args.dims) if args.dims else ComplexityDims()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rep = complexity(dims)
    print(rep.text())
    base = build_variant("BaselineMLP", dims.d_in, dims.d_out, hidden=(dims.h1, dims.h2))
    print(f"built BaselineMLP: {model_counts(base)}")
    embed = EmbedConfig(degree=2, terms="exact_degree_only")
    if embed.feature_dim(dims.d_in) == dims.d_prime:
        hc = build_variant("PolySPD_HC_Clustered", dims.d_in, dims.d_out, quantum=QuantumConfig(n_layers=dims.n_layers),
                           embed=embed, hidden=(dims.h3, cfg.nn.hidden[1]))
        print(f"built PolySPD_HC_Clustered (d'={dims.d_prime}): {model_counts(hc)}")
    if args.checkpoint:
        model, _ = checkpoint.load(args.checkpoint)
        print(f"checkpoint {model.tag}: {model_counts(model.arch)}")
    return 0


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsurrogate", description=__doc__)
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out-dir", default=".", help="directory for artifacts (default: current)")
    p.add_argument("--threads", type=int, help="cap BLAS threads")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-data", help="generate a synthetic sensor/displacement dataset")
    s.add_argument("--samples", type=int)
    s.add_argument("--output", help="dataset path (.csv or .npz)")
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("cluster-analyze", help="k-means diagnostics and ClusteredMLP k sweep")
    s.add_argument("--dataset")
    s.add_argument("--k-min", type=int)
    s.add_argument("--k-max", type=int)
    s.add_argument("--epochs", type=int, help="training budget per k")
    s.add_argument("--no-train", action="store_true", help="cluster metrics only")
    s.add_argument("--plot", help="write a PNG of the sweep (needs matplotlib)")
    s.set_defaults(func=cmd_cluster_analyze)

    s = sub.add_parser("train", help="train one variant")
    s.add_argument("--variant", required=True)
    s.add_argument("--dataset")
    s.add_argument("--epochs", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="evaluate a checkpoint on its held-out split")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--dataset")
    s.add_argument("--space", choices=("standardized", "raw"), default="standardized")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("compare", help="train and evaluate several variants under one split")
    s.add_argument("--variants", nargs="+")
    s.add_argument("--dataset")
    s.add_argument("--epochs", type=int)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("infer", help="stream sensor rows through a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--input", default="-", help="sensor rows file, or - for stdin")
    s.add_argument("--output", default="-", help="prediction file, or - for stdout")
    s.add_argument("--follow", action="store_true", help="keep reading rows appended to --input")
    s.add_argument("--poll-interval", type=float, default=0.1)
    s.add_argument("--idle-timeout", type=float, help="stop following after this many idle seconds")
    s.add_argument("--dump-state", help="write the quantum output state of one row as text")
    s.add_argument("--dump-row", type=int, default=0, help="which processed row to dump (default first)")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("complexity", help="operation-count report")
    s.add_argument("--dims", type=int, nargs=8, metavar=("D_IN", "H1", "H2", "D_OUT", "D_PRIME", "L", "N", "H3"))
    s.add_argument("--checkpoint", help="also count a trained model's operations")
    s.set_defaults(func=cmd_complexity)
    return p


EXIT_CODES = ((ConfigError, 2), (DataError, 3), (NumericalError, 4))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("seed must be non-negative")
        cfg = load_config(args.config).with_seed(args.seed)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be positive")
            from threadpoolctl import threadpool_limits

            with threadpool_limits(args.threads):
                return args.func(cfg, args)
        return args.func(cfg, args)
    except (ConfigError, DataError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        for cls, code in EXIT_CODES:
            if isinstance(exc, cls):
                return code
    return 1


if __name__ == "__main__":
    sys.exit(main())
