"""Sensor extraction, synthetic dataset sampling, dataset files, and the conditioning diagnostic."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..errors import DataError
from ..linalg import sym_eig
from ..seeding import stream
from .frame import DOF_NAMES, DOF_PER_NODE, TOP_LEFT, TOP_RIGHT, FrameModel, StaticSolver, node_index
from .loads import LoadAssembler, LoadConfig, sample_scenarios

AXIS_TO_DOF = {"x": "rx", "y": "ry", "z": "rz"}


@dataclass(frozen=True)
class SensorChannel:
    station: str  # e.g. "S1"
    node: int
    axis: str  # tilt axis: x, y or z

    @property
    def label(self) -> str:
        return f"{self.station}_t{self.axis}"


@dataclass(frozen=True)
class SensorSpec:
    channels: tuple[SensorChannel, ...]

    def dofs(self, model: FrameModel) -> np.ndarray:
        out = []
        for ch in self.channels:
            if ch.axis not in AXIS_TO_DOF:
                raise ValueError(f"sensor axis must be x, y or z, got {ch.axis!r}")
            if not 0 <= ch.node < model.n_nodes:
                raise ValueError(f"sensor {ch.label} references missing node {ch.node}")
            out.append(model.dof(ch.node, AXIS_TO_DOF[ch.axis]))
        return np.array(out, dtype=np.intp)

    def to_json(self) -> list[dict]:
        return [{"station": c.station, "node": c.node, "axis": c.axis} for c in self.channels]

    @classmethod
    def from_json(cls, data: list[dict]) -> "SensorSpec":
        return cls(tuple(SensorChannel(d["station"], int(d["node"]), d["axis"]) for d in data))


def default_sensor_spec(model: FrameModel) -> SensorSpec:
    """Three tilt stations on the top chords at roughly 1/4, 1/2 and 3/4 span.

    S1 reports x, y and z tilt; S2 and S3 report x and y, giving 7 channels.
    """
    nb = int(model.tags["station"].max())
    s1, s2, s3 = (min(nb, max(0, round(nb * f))) for f in (0.25, 0.5, 0.75))
    n1, n2, n3 = node_index(s1, TOP_LEFT), node_index(s2, TOP_RIGHT), node_index(s3, TOP_LEFT)
    return SensorSpec(
        (
            SensorChannel("S1", n1, "x"), SensorChannel("S1", n1, "y"), SensorChannel("S1", n1, "z"),
            SensorChannel("S2", n2, "x"), SensorChannel("S2", n2, "y"),
            SensorChannel("S3", n3, "x"), SensorChannel("S3", n3, "y"),
        )
    )


def extract_sensors(
    u: np.ndarray,
    spec: SensorSpec,
    model: FrameModel,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Read the spec's rotational DOFs from displacement vector(s) ``u`` (last axis = DOFs)."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != model.n_dof:
        raise ValueError(f"displacement vector has {u.shape[-1]} entries, model has {model.n_dof} DOFs")
    y = u[..., spec.dofs(model)]
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("sensor noise needs a random generator")
        y = y + rng.normal(0.0, noise_sigma, size=y.shape)
    return y


@dataclass
class Dataset:
    sensors: np.ndarray  # (n, n_channels), rad
    displacements: np.ndarray  # (n, 3 * n_nodes), m
    header: dict = field(default_factory=dict)
    scenarios: np.ndarray | None = None  # (n, 4): material kN/m, wind m/s, dir_x, dir_y

    def __len__(self) -> int:
        return self.sensors.shape[0]

    @property
    def columns(self) -> list[str]:
        sensor_cols = self.header.get("sensor_columns") or [f"s{i + 1}" for i in range(self.sensors.shape[1])]
        n_nodes = self.displacements.shape[1] // 3
        return list(sensor_cols) + [f"n{k}_{d}" for k in range(n_nodes) for d in DOF_NAMES[:3]]

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(
            self.sensors[idx], self.displacements[idx], dict(self.header),
            None if self.scenarios is None else self.scenarios[idx],
        )


def sample_dataset(
    model: FrameModel,
    n_samples: int,
    seed: int,
    spec: SensorSpec | None = None,
    load_cfg: LoadConfig = LoadConfig(),
    noise_sigma: float = 0.0,
    solver: StaticSolver | None = None,
) -> Dataset:
    """Solve ``n_samples`` random load cases; deterministic in ``seed``."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    spec = spec or default_sensor_spec(model)
    solver = solver or StaticSolver(model)
    scenarios = sample_scenarios(n_samples, stream(seed, "data"), load_cfg)
    loads = LoadAssembler(model, load_cfg)
    F = np.stack([loads(s) for s in scenarios], axis=1)
    U = solver.solve(F).T
    y = extract_sensors(U, spec, model, noise_sigma, stream(seed, "sensor-noise"))
    x = U[:, model.translational_dofs]
    header = {
        "format": "qsurrogate-dataset/1",
        "model_hash": model.fingerprint(),
        "n_nodes": model.n_nodes,
        "n_samples": n_samples,
        "seed": seed,
        "sensor_spec": spec.to_json(),
        "sensor_columns": [c.label for c in spec.channels],
        "noise_sigma": noise_sigma,
        "units": {"sensors": "rad", "displacements": "m", "material_load": "kN/m", "wind_speed": "m/s"},
    }
    sc = np.array(
        [(s.material_load, s.wind_speed, *s.wind_direction) for s in scenarios], dtype=float
    )
    return Dataset(y, x, header, sc)


def write_csv(ds: Dataset, path: str | Path) -> None:
    """Header record as a ``#``-prefixed JSON line, column names, then ``%.17g`` rows (exact round-trip)."""
    buf = io.StringIO()
    buf.write("# " + json.dumps(ds.header, sort_keys=True) + "\n")
    buf.write(",".join(ds.columns) + "\n")
    np.savetxt(buf, np.hstack([ds.sensors, ds.displacements]), fmt="%.17g", delimiter=",")
    Path(path).write_text(buf.getvalue())


def read_csv(path: str | Path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with path.open() as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise DataError(f"{path}: missing header record")
        try:
            header = json.loads(first[2:])
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: unreadable header record") from exc
        fh.readline()
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise DataError(f"{path}: malformed data rows ({exc})") from exc
    n_sensors = len(header.get("sensor_columns", [])) or 7
    n_out = 3 * int(header["n_nodes"])
    if data.shape[1] != n_sensors + n_out:
        raise DataError(f"{path}: expected {n_sensors + n_out} fields per row, got {data.shape[1]}")
    return Dataset(data[:, :n_sensors].copy(), data[:, n_sensors:].copy(), header)


def write_npz(ds: Dataset, path: str | Path) -> None:
    arrays = {"sensors": ds.sensors, "displacements": ds.displacements,
              "header": np.array(json.dumps(ds.header, sort_keys=True))}
    if ds.scenarios is not None:
        arrays["scenarios"] = ds.scenarios
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def read_npz(path: str | Path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with np.load(path, allow_pickle=False) as z:
        return Dataset(
            z["sensors"], z["displacements"], json.loads(str(z["header"])),
            z["scenarios"] if "scenarios" in z else None,
        )


def load_dataset(path: str | Path) -> Dataset:
    return read_npz(path) if str(path).endswith(".npz") else read_csv(path)


@dataclass
class ConditioningReport:
    rank: int
    condition_number: float
    null_space_dim: int
    eigenvalues: np.ndarray
    n_outputs: int

    def summary(self) -> str:
        return (
            f"sensor map A: {self.rank} x {self.n_outputs} effective rank {self.rank}; "
            f"kappa(A^T A) over the nonzero spectrum = {self.condition_number:.3e}; "
            f"null-space dimension {self.null_space_dim}. With rank {self.rank} << "
            f"{self.n_outputs} outputs, direct inversion of y = A x is ill-posed: any null-space "
            f"component of x is invisible to the sensors."
        )


def conditioning_from_matrix(A: np.ndarray, rel_tol: float = 1e-12) -> ConditioningReport:
    """Rank, kappa(A^T A) and null-space dimension from the spectrum of ``A^T A``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or not np.any(A):
        raise ValueError("sensor map must be a non-zero 2-D matrix")
    AtA = A.T @ A
    w = sym_eig(0.5 * (AtA + AtA.T)).eigenvalues
    lam_max = w[0]
    nonzero = w[w > rel_tol * lam_max]
    return ConditioningReport(
        rank=int(nonzero.size),
        condition_number=float(lam_max / nonzero[-1]),
        null_space_dim=int(A.shape[1] - nonzero.size),
        eigenvalues=w,
        n_outputs=A.shape[1],
    )


def sensor_map(model: FrameModel, spec: SensorSpec, K: np.ndarray | None = None) -> np.ndarray:
    """Linear map from all nodal translations to the sensor tilts when no nodal moments act.

    Free rotations satisfy ``K_rr r + K_rt t = 0``, so ``r = -K_rr^{-1} K_rt t``;
    the sensor rows of that operator form ``A`` (n_channels x 3N).
    """
    K = StaticSolver(model).K if K is None else K
    rot = np.array([d for d in model.free_dofs if d % DOF_PER_NODE >= 3])
    trans = model.translational_dofs
    fac = cho_factor(K[np.ix_(rot, rot)], lower=True)
    R = -cho_solve(fac, K[np.ix_(rot, trans)])
    pos = {d: i for i, d in enumerate(rot)}
    try:
        rows = [pos[d] for d in spec.dofs(model)]
    except KeyError as exc:
        raise ValueError("sensor channel sits on a constrained rotation") from exc
    return R[rows]


def conditioning_diagnostic(model: FrameModel, spec: SensorSpec | None = None) -> ConditioningReport:
    return conditioning_from_matrix(sensor_map(model, spec or default_sensor_spec(model)))
