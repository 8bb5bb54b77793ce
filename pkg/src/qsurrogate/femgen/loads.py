"""Load scenarios (bulk material + wind) and their nodal force vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frame import (
    BOTTOM_LEFT, DOF_PER_NODE, TOP_LEFT, TOP_RIGHT,
    FrameModel, element_dofs, uniform_load_vector,
)


@dataclass(frozen=True)
class LoadConfig:
    material_min: float = 1.2  # kN/m
    material_max: float = 6.5  # kN/m
    wind_max: float = 54.0  # m/s
    wind_material_cutoff: float = 19.0  # m/s; above this no material is carried
    air_density: float = 1.225  # kg/m^3
    drag_coefficient: float = 1.2
    solidity: float = 0.3  # exposed fraction of each truss face

    def __post_init__(self):
        if not 0 <= self.material_min <= self.material_max:
            raise ValueError("need 0 <= material_min <= material_max")
        if not 0 <= self.wind_material_cutoff <= self.wind_max:
            raise ValueError("need 0 <= wind_material_cutoff <= wind_max")
        if min(self.air_density, self.drag_coefficient, self.solidity) <= 0:
            raise ValueError("air density, drag coefficient and solidity must be positive")


@dataclass(frozen=True)
class LoadScenario:
    material_load: float  # kN/m on the top frame
    wind_speed: float  # m/s
    wind_direction: tuple[float, float]  # unit vector in the horizontal plane

    def check(self, cfg: LoadConfig = LoadConfig()) -> None:
        if self.wind_speed > cfg.wind_material_cutoff and self.material_load != 0:
            raise ValueError("material load must be zero above the wind cutoff")
        if not 0 <= self.wind_speed <= cfg.wind_max:
            raise ValueError("wind speed out of range")
        if self.material_load != 0 and not cfg.material_min <= self.material_load <= cfg.material_max:
            raise ValueError("material load out of range")


def sample_scenarios(n: int, rng: np.random.Generator, cfg: LoadConfig = LoadConfig()) -> list[LoadScenario]:
    """Uniform scenarios; material load is forced to zero whenever the wind exceeds the cutoff."""
    wind = rng.uniform(0.0, cfg.wind_max, size=n)
    material = rng.uniform(cfg.material_min, cfg.material_max, size=n)
    phi = rng.uniform(0.0, 2 * np.pi, size=n)
    material = np.where(wind > cfg.wind_material_cutoff, 0.0, material)
    return [
        LoadScenario(float(q), float(v), (float(np.cos(a)), float(np.sin(a))))
        for q, v, a in zip(material, wind, phi)
    ]


def _top_chord_elements(model: FrameModel) -> list[int]:
    corner = model.tags["corner"]
    out = []
    for e, (i, j) in enumerate(model.elements):
        if corner[i] == corner[j] and corner[i] in (TOP_LEFT, TOP_RIGHT):
            if model.tags["station"][i] != model.tags["station"][j]:
                out.append(e)
    return out


def _trapezoid_weights(stations: np.ndarray, n_stations: int) -> np.ndarray:
    w = np.ones_like(stations, dtype=float)
    w[(stations == 0) | (stations == n_stations - 1)] = 0.5
    return w / w.sum()


def _wind_face_vectors(model: FrameModel, cfg: LoadConfig) -> dict[str, np.ndarray]:
    # Nodal loads per unit (signed) drag pressure component on each candidate windward face.
    station, corner = model.tags["station"], model.tags["corner"]
    n_st = int(station.max()) + 1
    x, y, z = model.nodes.T
    length, width, height = np.ptp(x), np.ptp(y), np.ptp(z)
    out = {}
    left = np.isin(corner, (BOTTOM_LEFT, TOP_LEFT))
    for name, face in (("y+", np.flatnonzero(left)), ("y-", np.flatnonzero(~left))):
        f = np.zeros(model.n_dof)
        f[DOF_PER_NODE * face + 1] = cfg.solidity * length * height * _trapezoid_weights(station[face], n_st)
        out[name] = f
    for name, st in (("x+", 0), ("x-", n_st - 1)):
        face = np.flatnonzero(station == st)
        f = np.zeros(model.n_dof)
        f[DOF_PER_NODE * face] = cfg.solidity * width * height / len(face)
        out[name] = f
    return out


class LoadAssembler:
    """Global load vectors for scenarios on one model.

    Wind is a drag pressure 0.5 rho Cd v^2 acting on the windward faces: the
    transverse component on the side face (length x height) at the upwind
    edge, the longitudinal component on the upwind end frame (width x
    height), lumped at the face nodes. Material load is a downward line load
    shared by the two top chords, converted to consistent nodal loads.
    """

    def __init__(self, model: FrameModel, cfg: LoadConfig = LoadConfig()):
        self.model = model
        self.cfg = cfg
        self.material_unit = np.zeros(model.n_dof)
        w = np.array([0.0, 0.0, -0.5 * 1e3])
        for e in _top_chord_elements(model):
            self.material_unit[element_dofs(model, e)] += uniform_load_vector(model, e, w)
        self.wind_faces = _wind_face_vectors(model, cfg)

    def pressure(self, speed: float) -> float:
        return 0.5 * self.cfg.air_density * self.cfg.drag_coefficient * speed**2

    def wind(self, speed: float, direction) -> np.ndarray:
        q = self.pressure(speed)
        dx, dy = float(direction[0]), float(direction[1])
        f = np.zeros(self.model.n_dof)
        if dy != 0.0:
            f += q * dy * self.wind_faces["y+" if dy > 0 else "y-"]
        if dx != 0.0:
            f += q * dx * self.wind_faces["x+" if dx > 0 else "x-"]
        return f

    def __call__(self, scenario: LoadScenario) -> np.ndarray:
        return scenario.material_load * self.material_unit + self.wind(
            scenario.wind_speed, scenario.wind_direction
        )


def material_load_vector(model: FrameModel, q_kn_per_m: float) -> np.ndarray:
    return q_kn_per_m * LoadAssembler(model).material_unit


def wind_load_vector(model: FrameModel, speed: float, direction, cfg: LoadConfig = LoadConfig()) -> np.ndarray:
    return LoadAssembler(model, cfg).wind(speed, direction)


def load_vector(model: FrameModel, scenario: LoadScenario, cfg: LoadConfig = LoadConfig()) -> np.ndarray:
    return LoadAssembler(model, cfg)(scenario)
