"""3D Euler-Bernoulli frame model: geometry, element stiffness, assembly, static solve."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..errors import SingularStiffnessError

DOF_PER_NODE = 6
DOF_NAMES = ("ux", "uy", "uz", "rx", "ry", "rz")


@dataclass(frozen=True)
class Section:
    """Beam cross-section and material (SI units: Pa, m^2, m^4)."""

    E: float
    G: float
    A: float
    Iy: float
    Iz: float
    J: float

    @classmethod
    def hollow_square(cls, outer: float, wall: float, E: float = 200e9, nu: float = 0.3) -> "Section":
        if not 0 < 2 * wall < outer:
            raise ValueError("hollow square needs 0 < 2*wall < outer")
        inner = outer - 2 * wall
        A = outer**2 - inner**2
        I = (outer**4 - inner**4) / 12.0
        mean = outer - wall
        # Bredt thin-walled torsion constant 4 A_m^2 t / perimeter.
        J = mean**3 * wall
        return cls(E=E, G=E / (2 * (1 + nu)), A=A, Iy=I, Iz=I, J=J)


@dataclass
class FrameModel:
    nodes: np.ndarray  # (N, 3) coordinates, m
    elements: np.ndarray  # (M, 2) node indices
    sections: list[Section]
    element_section: np.ndarray  # (M,) index into sections
    supports: frozenset[int]  # constrained global DOF indices
    tags: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 3)
        self.elements = np.asarray(self.elements, dtype=np.intp).reshape(-1, 2)
        self.element_section = np.asarray(self.element_section, dtype=np.intp)
        self.supports = frozenset(int(d) for d in self.supports)
        if len(self.element_section) != len(self.elements):
            raise ValueError("one section index per element required")
        if np.any(self.elements < 0) or np.any(self.elements >= self.n_nodes):
            raise ValueError("element references a missing node")
        if np.any(self.element_lengths() <= 0):
            raise ValueError("zero-length element")
        if any(not 0 <= d < self.n_dof for d in self.supports):
            raise ValueError("support DOF out of range")

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_dof(self) -> int:
        return DOF_PER_NODE * self.n_nodes

    def dof(self, node: int, name: str) -> int:
        return DOF_PER_NODE * node + DOF_NAMES.index(name)

    @property
    def translational_dofs(self) -> np.ndarray:
        base = DOF_PER_NODE * np.arange(self.n_nodes)[:, None]
        return (base + np.arange(3)[None, :]).ravel()

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dof, dtype=bool)
        mask[list(self.supports)] = False
        return np.flatnonzero(mask)

    def element_lengths(self) -> np.ndarray:
        d = self.nodes[self.elements[:, 1]] - self.nodes[self.elements[:, 0]]
        return np.linalg.norm(d, axis=1)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.nodes, self.elements, self.element_section,
                    np.array(sorted(self.supports), dtype=np.int64)):
            h.update(np.ascontiguousarray(arr).tobytes())
        for s in self.sections:
            h.update(np.array([s.E, s.G, s.A, s.Iy, s.Iz, s.J]).tobytes())
        return h.hexdigest()[:16]


def fixed_node_dofs(node: int) -> list[int]:
    return [DOF_PER_NODE * node + k for k in range(DOF_PER_NODE)]


@dataclass(frozen=True)
class FrameConfig:
    """Parametric box-truss frame; defaults are desk-scale (10 bays, 44 nodes)."""

    n_bays: int = 10
    length: float = 23.65
    width: float = 3.6
    height: float = 2.6
    chord: Section = field(default_factory=lambda: Section.hollow_square(0.25, 0.012))
    web: Section = field(default_factory=lambda: Section.hollow_square(0.15, 0.008))

    def __post_init__(self):
        if self.n_bays < 1:
            raise ValueError("frame needs at least one bay")
        if min(self.length, self.width, self.height) <= 0:
            raise ValueError("frame dimensions must be positive")


# Corner order within a station.
BOTTOM_LEFT, BOTTOM_RIGHT, TOP_LEFT, TOP_RIGHT = range(4)
_CORNER_YZ = {BOTTOM_LEFT: (0, 0), BOTTOM_RIGHT: (1, 0), TOP_LEFT: (0, 1), TOP_RIGHT: (1, 1)}


def node_index(station: int, corner: int) -> int:
    return 4 * station + corner


def build_frame(config: FrameConfig = FrameConfig()) -> FrameModel:
    """Rectangular-prism truss frame along x with four chords, verticals, cross members and diagonals.

    Stations sit at ``x = i * length / n_bays``; each has four corner nodes
    (left/right at y = 0 / width, bottom/top at z = 0 / height). The four
    bottom corners of the end stations are fully fixed.
    """
    nb = config.n_bays
    xs = np.linspace(0.0, config.length, nb + 1)
    nodes = np.array(
        [
            (x, _CORNER_YZ[c][0] * config.width, _CORNER_YZ[c][1] * config.height)
            for x in xs
            for c in range(4)
        ]
    )
    chord, web = 0, 1
    elements, sec = [], []

    def add(a, b, s):
        elements.append((a, b))
        sec.append(s)

    for i in range(nb + 1):
        n = lambda c: node_index(i, c)
        add(n(BOTTOM_LEFT), n(TOP_LEFT), web)
        add(n(BOTTOM_RIGHT), n(TOP_RIGHT), web)
        add(n(BOTTOM_LEFT), n(BOTTOM_RIGHT), web)
        add(n(TOP_LEFT), n(TOP_RIGHT), web)
        if i == nb:
            continue
        m = lambda c: node_index(i + 1, c)
        for c in range(4):
            add(n(c), m(c), chord)
        # Alternating (Warren-style) diagonals in the two side panels and top/bottom planes.
        if i % 2 == 0:
            add(n(BOTTOM_LEFT), m(TOP_LEFT), web)
            add(n(BOTTOM_RIGHT), m(TOP_RIGHT), web)
            add(n(TOP_LEFT), m(TOP_RIGHT), web)
            add(n(BOTTOM_LEFT), m(BOTTOM_RIGHT), web)
        else:
            add(n(TOP_LEFT), m(BOTTOM_LEFT), web)
            add(n(TOP_RIGHT), m(BOTTOM_RIGHT), web)
            add(n(TOP_RIGHT), m(TOP_LEFT), web)
            add(n(BOTTOM_RIGHT), m(BOTTOM_LEFT), web)

    supports = []
    for station in (0, nb):
        for c in (BOTTOM_LEFT, BOTTOM_RIGHT):
            supports += fixed_node_dofs(node_index(station, c))

    station = np.repeat(np.arange(nb + 1), 4)
    corner = np.tile(np.arange(4), nb + 1)
    return FrameModel(
        nodes=nodes,
        elements=np.array(elements),
        sections=[config.chord, config.web],
        element_section=np.array(sec),
        supports=frozenset(supports),
        tags={"station": station, "corner": corner},
    )


def local_stiffness(sec: Section, L: float) -> np.ndarray:
    """12x12 Euler-Bernoulli beam stiffness in local axes, DOFs (u, v, w, rx, ry, rz) per end."""
    E, G = sec.E, sec.G
    k = np.zeros((12, 12))
    ea, gj = E * sec.A / L, G * sec.J / L
    k[0, 0] = k[6, 6] = ea
    k[0, 6] = -ea
    k[3, 3] = k[9, 9] = gj
    k[3, 9] = -gj

    a, b, c, d = 12 * E * sec.Iz / L**3, 6 * E * sec.Iz / L**2, 4 * E * sec.Iz / L, 2 * E * sec.Iz / L
    k[1, 1] = k[7, 7] = a
    k[1, 7] = -a
    k[1, 5] = k[1, 11] = b
    k[5, 7] = k[7, 11] = -b
    k[5, 5] = k[11, 11] = c
    k[5, 11] = d

    a, b, c, d = 12 * E * sec.Iy / L**3, 6 * E * sec.Iy / L**2, 4 * E * sec.Iy / L, 2 * E * sec.Iy / L
    k[2, 2] = k[8, 8] = a
    k[2, 8] = -a
    k[2, 4] = k[2, 10] = -b
    k[4, 8] = k[8, 10] = b
    k[4, 4] = k[10, 10] = c
    k[4, 10] = d
    return np.triu(k) + np.triu(k, 1).T


def direction_cosines(xi: np.ndarray, xj: np.ndarray) -> np.ndarray:
    """Rows are the element's local x, y, z axes in global coordinates."""
    ex = (xj - xi) / np.linalg.norm(xj - xi)
    ref = np.array([0.0, 0.0, 1.0])
    if abs(ex @ ref) > 1 - 1e-9:
        ref = np.array([1.0, 0.0, 0.0])
    ey = np.cross(ref, ex)
    ey /= np.linalg.norm(ey)
    ez = np.cross(ex, ey)
    return np.vstack([ex, ey, ez])


def element_transform(R: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(4), R)


def element_dofs(model: FrameModel, e: int) -> np.ndarray:
    i, j = model.elements[e]
    return np.concatenate([fixed_node_dofs(i), fixed_node_dofs(j)])


def assemble_stiffness(model: FrameModel) -> np.ndarray:
    """Global (unconstrained) stiffness matrix, ``n_dof x n_dof``."""
    K = np.zeros((model.n_dof, model.n_dof))
    for e, (i, j) in enumerate(model.elements):
        xi, xj = model.nodes[i], model.nodes[j]
        T = element_transform(direction_cosines(xi, xj))
        k = T.T @ local_stiffness(model.sections[model.element_section[e]], np.linalg.norm(xj - xi)) @ T
        dofs = element_dofs(model, e)
        K[np.ix_(dofs, dofs)] += k
    return 0.5 * (K + K.T)


def uniform_load_vector(model: FrameModel, e: int, w: np.ndarray) -> np.ndarray:
    """Consistent global nodal loads (12,) for a uniform line load ``w`` (N/m, global axes)."""
    i, j = model.elements[e]
    xi, xj = model.nodes[i], model.nodes[j]
    L = np.linalg.norm(xj - xi)
    R = direction_cosines(xi, xj)
    wx, wy, wz = R @ np.asarray(w, dtype=float)
    f = np.zeros(12)
    f[[0, 6]] = wx * L / 2
    f[[1, 7]] = wy * L / 2
    f[[2, 8]] = wz * L / 2
    f[5], f[11] = wy * L**2 / 12, -wy * L**2 / 12
    f[4], f[10] = -wz * L**2 / 12, wz * L**2 / 12
    return element_transform(R).T @ f


class StaticSolver:
    """Cholesky-factorized constrained stiffness; solves many load cases against one factorization.

    Raises:
        SingularStiffnessError: constrained stiffness not positive definite
            (missing supports or a mechanism).
    """

    def __init__(self, model: FrameModel, K: np.ndarray | None = None):
        self.model = model
        self.K = assemble_stiffness(model) if K is None else K
        self.free = model.free_dofs
        Kff = self.K[np.ix_(self.free, self.free)]
        try:
            self._factor = cho_factor(Kff, lower=True, check_finite=True)
        except np.linalg.LinAlgError as exc:
            raise SingularStiffnessError(
                "constrained stiffness is not positive definite: the structure has a "
                "rigid-body mode (check supports)"
            ) from exc
        diag = np.diag(self._factor[0])
        if diag.min() <= 1e-10 * diag.max():
            raise SingularStiffnessError(
                "constrained stiffness is numerically singular: the structure has a "
                "rigid-body mode (check supports)"
            )

    @property
    def constrained_stiffness(self) -> np.ndarray:
        return self.K[np.ix_(self.free, self.free)]

    def solve(self, f: np.ndarray) -> np.ndarray:
        """Displacements for load vector(s) ``f`` of shape ``(n_dof,)`` or ``(n_dof, k)``."""
        f = np.asarray(f, dtype=float)
        u = np.zeros_like(f)
        u[self.free] = cho_solve(self._factor, f[self.free], check_finite=False)
        return u


def solve_static(model: FrameModel, f: np.ndarray) -> np.ndarray:
    return StaticSolver(model).solve(f)
