"""Initial two-phase domain, its graded mesh and the interface chart.

Conventions: A0 = (0, 0) and A1 = (0, a). The interface is the graph
y1 = g(y2), 0 <= y2 <= a, leaving the y2-axis with contact angles delta0 at
A0 and delta1 at A1. Omega2 lies between the axis segment Gamma2 and the
interface; Omega1 lies between the interface and the outer boundary Gamma1,
which is the rest of the axis from (0, -a2) to (0, a1) closed by a half circle.
"""

# Standard library imports
import logging
import math
from dataclasses import dataclass, field, replace

# Related third-party imports
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

# Local application/library specific imports
from .errors import GeometryError, TubeViolation


logger = logging.getLogger(__name__)

ARC_SEGMENTS = 4096
CHART_SAMPLES = 2048

TAG_INTERIOR = 0
TAG_GAMMA1 = 1
TAG_GAMMA2 = 2
TAG_INTERFACE = 3
TAG_CORNER = 4


@dataclass(frozen=True)
class DomainSpec:
    """Geometric description of the initial configuration.

    Attributes:
        a (float): Distance between the contact points A0 and A1.
        a1 (float): Upper end of the straight boundary on the y2-axis.
        a2_len (float): Lower end of the straight boundary is (0, -a2_len).
        delta0 (float): Contact angle at A0, in (0, pi/4).
        delta1 (float): Contact angle at A1, in (0, pi/4).
        eps (float): Radius of the corner neighborhoods.
        profile (str): "arc", "sine", "hermite" or "auto" (arc when the angles agree).
    """

    a: float = 1.0
    a1: float = 1.5
    a2_len: float = 0.5
    delta0: float = math.pi / 6
    delta1: float = math.pi / 6
    eps: float = 0.05
    profile: str = "auto"

    @property
    def corners(self) -> np.ndarray:
        return np.array([[0.0, 0.0], [0.0, self.a]])

    @property
    def resolved_profile(self) -> str:
        if self.profile == "auto":
            return "arc" if self.delta0 == self.delta1 else "hermite"
        return self.profile


@dataclass(frozen=True)
class MeshSpec:
    """Resolution of the structured strip mesh.

    Attributes:
        rows (int): Rows in each of the four y2 segments.
        inner_columns (int): Columns across Omega2.
        outer_columns (int): Columns across Omega1.
        grading (float): Row grading exponent toward A0 and A1.
    """

    rows: int = 40
    inner_columns: int = 8
    outer_columns: int = 16
    grading: float = 3.0

    def refined(self, factor: int = 2) -> "MeshSpec":
        return replace(
            self,
            rows=self.rows * factor,
            inner_columns=self.inner_columns * factor,
            outer_columns=self.outer_columns * factor,
        )


def validate_domain(spec: DomainSpec) -> list:
    """Return every violated geometric constraint as a message."""
    problems = []
    if not 0 < spec.a < spec.a1:
        problems.append(f"need 0 < a < a1, got a={spec.a}, a1={spec.a1}")
    if not spec.a2_len > 0:
        problems.append(f"a2_len must be positive, got {spec.a2_len}")
    for name, delta in (("delta0", spec.delta0), ("delta1", spec.delta1)):
        if not 0 < delta < 0.25 * math.pi:
            problems.append(f"{name} must lie in (0, pi/4), got {delta}")
    limit = min((spec.a1 - spec.a) / 6.0, spec.a / 6.0, spec.a2_len / 6.0)
    if not 0 < spec.eps < limit:
        problems.append(f"eps must lie in (0, {limit:.6g}), got {spec.eps}")
    if spec.profile not in ("auto", "arc", "sine", "hermite"):
        problems.append(f"unknown interface profile {spec.profile!r}")
    elif spec.resolved_profile in ("arc", "sine") and spec.delta0 != spec.delta1:
        problems.append(f"the {spec.resolved_profile} profile needs delta0 == delta1")
    if problems:
        return problems

    profile = InterfaceProfile(spec)
    t = np.linspace(0.0, spec.a, 2001)[1:-1]
    inner = profile.value(t)
    if np.any(inner <= 0):
        problems.append("interface touches the axis between the contact points")
    if np.any(inner >= 0.95 * outer_boundary(spec, t)):
        problems.append("interface leaves the outer boundary")
    return problems


# ==========================
# Boundary curves
# ==========================


class InterfaceProfile:
    """The interface as y1 = g(y2) with g'(0) = tan(delta0) and g'(a) = -tan(delta1)."""

    def __init__(self, spec: DomainSpec):
        self.spec = spec
        self.kind = spec.resolved_profile
        # circular arc through A0 and A1 meeting the axis at delta0
        self.radius = 0.5 * spec.a / math.sin(spec.delta0)
        self.centre = -self.radius * math.cos(spec.delta0)

    def _tau(self, t):
        return np.asarray(t, dtype=float) / self.spec.a

    def _inside(self, t):
        t = np.asarray(t, dtype=float)
        return (t > 0.0) & (t < self.spec.a)

    def _chord(self, t):
        offset = np.asarray(t, dtype=float) - 0.5 * self.spec.a
        return offset, np.sqrt(np.clip(self.radius**2 - offset**2, 0.0, None))

    def value(self, t):
        tau = self._tau(t)
        a, t0, t1 = self.spec.a, math.tan(self.spec.delta0), math.tan(self.spec.delta1)
        if self.kind == "arc":
            g = self.centre + self._chord(t)[1]
        elif self.kind == "sine":
            g = a * t0 / math.pi * np.sin(math.pi * tau)
        else:
            g = a * tau * (1.0 - tau) * ((1.0 - tau) * t0 + tau * t1)
        return np.where(self._inside(t), g, 0.0)

    def slope(self, t):
        tau = self._tau(t)
        t0, t1 = math.tan(self.spec.delta0), math.tan(self.spec.delta1)
        if self.kind == "arc":
            offset, root = self._chord(t)
            return -offset / root
        if self.kind == "sine":
            return t0 * np.cos(math.pi * tau)
        # d/dtau of tau(1-tau)h(tau), h linear
        h = (1.0 - tau) * t0 + tau * t1
        return (1.0 - 2.0 * tau) * h + tau * (1.0 - tau) * (t1 - t0)

    def curvature(self, t):
        tau = self._tau(t)
        a, t0, t1 = self.spec.a, math.tan(self.spec.delta0), math.tan(self.spec.delta1)
        if self.kind == "arc":
            return -self.radius**2 / self._chord(t)[1] ** 3
        if self.kind == "sine":
            return -t0 * math.pi / a * np.sin(math.pi * tau)
        h = (1.0 - tau) * t0 + tau * t1
        return (-2.0 * h + 2.0 * (1.0 - 2.0 * tau) * (t1 - t0)) / a


def outer_boundary(spec: DomainSpec, t):
    """y1 on the half circle through (0, -a2_len) and (0, a1)."""
    t = np.asarray(t, dtype=float)
    centre = 0.5 * (spec.a1 - spec.a2_len)
    radius = 0.5 * (spec.a1 + spec.a2_len)
    values = np.sqrt(np.clip(radius**2 - (t - centre) ** 2, 0.0, None))
    return np.where((t <= -spec.a2_len) | (t >= spec.a1), 0.0, values)


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


def smoothstep_derivative(x):
    inside = (x > 0.0) & (x < 1.0)
    return np.where(inside, 30.0 * x**2 * (1.0 - x) ** 2, 0.0)


# ==========================
# Mesh
# ==========================


@dataclass
class Mesh:
    """Conforming triangulation of Omega1 and Omega2 sharing the interface nodes.

    Attributes:
        nodes (np.ndarray): (n, 2) coordinates.
        triangles (np.ndarray): (m, 3) counter-clockwise node indices.
        phase (np.ndarray): (m,) phase 1 or 2 of each triangle.
        tags (np.ndarray): (n,) boundary tag of each node.
        interface (np.ndarray): Interface nodes ordered from A0 to A1.
        corners (tuple): Node indices of A0 and A1.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    phase: np.ndarray
    tags: np.ndarray
    interface: np.ndarray
    corners: tuple
    spec: MeshSpec = field(default_factory=MeshSpec)

    @property
    def gamma1(self) -> np.ndarray:
        return np.nonzero(self.tags == TAG_GAMMA1)[0]

    @property
    def gamma2(self) -> np.ndarray:
        return np.nonzero(self.tags == TAG_GAMMA2)[0]

    @property
    def dirichlet(self) -> np.ndarray:
        return np.nonzero(np.isin(self.tags, (TAG_GAMMA1, TAG_GAMMA2, TAG_CORNER)))[0]

    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def max_diameter(self) -> float:
        p = self.nodes[self.triangles]
        edges = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        return float(np.max(np.linalg.norm(edges, axis=2)))

    def phase_nodes(self, phase: int) -> np.ndarray:
        return np.unique(self.triangles[self.phase == phase])


def _graded(n, gamma):
    return (np.arange(n + 1) / n) ** gamma


def mesh_rows(spec: DomainSpec, mesh_spec: MeshSpec) -> np.ndarray:
    """Row heights graded toward y2 = 0 and y2 = a; both are rows.

    The two axis segments outside [0, a] are also graded quadratically toward
    their far ends, where the half circle meets the axis, so the fans of
    triangles at (0, -a2_len) and (0, a1) keep a bounded aspect ratio.
    """
    u = _graded(mesh_spec.rows, mesh_spec.grading)
    ends = 1.0 - (1.0 - u) ** 2
    half = 0.5 * spec.a
    pieces = [
        -spec.a2_len * ends[::-1],
        half * u[1:],
        (spec.a - half * u[::-1])[1:],
        (spec.a + (spec.a1 - spec.a) * ends)[1:],
    ]
    rows = np.concatenate(pieces)
    rows[np.argmin(np.abs(rows))] = 0.0
    rows[np.argmin(np.abs(rows - spec.a))] = spec.a
    return rows


def build_mesh(spec: DomainSpec, mesh_spec: MeshSpec, profile: InterfaceProfile) -> Mesh:
    rows = mesh_rows(spec, mesh_spec)
    m2, m1 = mesh_spec.inner_columns, mesh_spec.outer_columns
    outer_grading = min(mesh_spec.grading, 2.0)
    inner = profile.value(rows)
    outer = outer_boundary(spec, rows)
    outer[0] = outer[-1] = 0.0

    ids = np.empty((rows.size, m2 + m1 + 1), dtype=int)
    index = {}
    coords = []
    for j, t in enumerate(rows):
        xs = np.concatenate(
            [
                inner[j] * np.arange(m2 + 1) / m2,
                inner[j] + (outer[j] - inner[j]) * (np.arange(1, m1 + 1) / m1) ** outer_grading,
            ]
        )
        for c, x in enumerate(xs):
            key = (float(x), float(t))
            if key not in index:
                index[key] = len(coords)
                coords.append(key)
            ids[j, c] = index[key]
    nodes = np.array(coords, dtype=float)

    triangles, phase = [], []
    for j in range(rows.size - 1):
        for c in range(m2 + m1):
            a, b, cc, d = ids[j, c], ids[j, c + 1], ids[j + 1, c + 1], ids[j + 1, c]
            for tri in ((a, b, cc), (a, cc, d)):
                if len(set(tri)) < 3:
                    continue
                p = nodes[list(tri)]
                e1, e2 = p[1] - p[0], p[2] - p[0]
                area = 0.5 * (e1[0] * e2[1] - e1[1] * e2[0])
                if abs(area) < 1e-14 * spec.a1**2:
                    continue
                triangles.append(tri if area > 0 else (tri[0], tri[2], tri[1]))
                phase.append(2 if c < m2 else 1)

    tags = np.full(nodes.shape[0], TAG_INTERIOR, dtype=int)
    tags[ids[:, -1]] = TAG_GAMMA1
    on_axis = (rows < 0.0) | (rows > spec.a)
    tags[ids[on_axis, 0]] = TAG_GAMMA1
    between = (rows > 0.0) & (rows < spec.a)
    tags[ids[between, 0]] = TAG_GAMMA2
    interface_rows = (rows >= 0.0) & (rows <= spec.a)
    interface = ids[interface_rows, m2]
    tags[interface] = TAG_INTERFACE
    corners = (int(interface[0]), int(interface[-1]))
    tags[list(corners)] = TAG_CORNER

    mesh = Mesh(
        nodes=nodes,
        triangles=np.array(triangles, dtype=int),
        phase=np.array(phase, dtype=int),
        tags=tags,
        interface=np.asarray(interface, dtype=int),
        corners=corners,
        spec=mesh_spec,
    )
    logger.info(
        "Mesh with %d nodes, %d triangles, %d interface nodes, max diameter %.4g.",
        nodes.shape[0],
        mesh.triangles.shape[0],
        interface.size,
        mesh.max_diameter(),
    )
    return mesh


def interface_angles(mesh: Mesh) -> tuple:
    """Angles between the axis and the first interface segments at A0 and A1."""
    pts = mesh.nodes[mesh.interface]
    start = pts[1] - pts[0]
    end = pts[-2] - pts[-1]
    return math.atan2(start[0], start[1]), math.atan2(end[0], -end[1])


# ==========================
# Interface chart
# ==========================


class InterfaceChart:
    """Arc-length chart of the interface with the transversal field and the cut-off.

    A point near the interface is written x = m(omega) + lambda * l(omega),
    omega in [0, length] running from A0 to A1.
    """

    def __init__(self, spec: DomainSpec, profile: InterfaceProfile):
        self.spec = spec
        self.profile = profile
        self.logger = logging.getLogger(__name__)
        self._build_arc_length()
        self.b0 = self._tube_half_width()
        self.eps1 = min(spec.eps / (4.0 * self.b0), 0.5)
        self.c0 = 1.875 / self.eps1
        if not self.eps1 * self.b0 < 0.5 * spec.eps:
            raise GeometryError("cut-off support exceeds half of the corner radius")
        self._table_omega = np.linspace(0.0, self.length, CHART_SAMPLES)
        self._table_m = self.m(self._table_omega)
        self._table_l = self.transversal(self._table_omega)

    def _speed(self, t):
        return np.sqrt(1.0 + self.profile.slope(t) ** 2)

    def _build_arc_length(self):
        knots = np.linspace(0.0, self.spec.a, ARC_SEGMENTS + 1)
        x, w = leggauss(5)
        left, right = knots[:-1, None], knots[1:, None]
        mid, half = 0.5 * (left + right), 0.5 * (right - left)
        pieces = np.sum(w * self._speed(mid + half * x), axis=1) * half[:, 0]
        arc = np.concatenate([[0.0], np.cumsum(pieces)])
        self.length = float(arc[-1])
        check, _ = quad(self._speed, 0.0, self.spec.a, epsabs=1e-12, limit=200)
        if abs(check - self.length) > 1e-10 * self.length:
            self.logger.warning(
                "Arc length tables disagree: %.15g vs %.15g.", self.length, check
            )
        self._t_of_omega = PchipInterpolator(arc, knots)
        self._omega_of_t = PchipInterpolator(knots, arc)

    def omega_of_t(self, t):
        return self._omega_of_t(np.clip(t, 0.0, self.spec.a))

    def t_of_omega(self, omega):
        return self._t_of_omega(np.clip(omega, 0.0, self.length))

    def m(self, omega) -> np.ndarray:
        t = self.t_of_omega(np.atleast_1d(omega))
        return np.column_stack([self.profile.value(t), t])

    def tangent(self, omega) -> np.ndarray:
        t = self.t_of_omega(np.atleast_1d(omega))
        slope = self.profile.slope(t)
        return np.column_stack([slope, np.ones_like(slope)]) / self._speed(t)[:, None]

    def normal(self, omega) -> np.ndarray:
        """Unit normal pointing into Omega1."""
        tangent = self.tangent(omega)
        return np.column_stack([tangent[:, 1], -tangent[:, 0]])

    def corner_distances(self, omega) -> tuple:
        points = self.m(omega)
        r0 = np.linalg.norm(points, axis=1)
        r1 = np.linalg.norm(points - np.array([0.0, self.spec.a]), axis=1)
        return r0, r1

    def transversal(self, omega) -> np.ndarray:
        """Unit field l: (0, -1) near A0, (0, 1) near A1, the normal beyond 2*eps."""
        eps = self.spec.eps
        r0, r1 = self.corner_distances(omega)
        w0 = smoothstep((r0 - eps) / eps)[:, None]
        w1 = smoothstep((r1 - eps) / eps)[:, None]
        field = (
            w0 * w1 * self.normal(omega)
            + (1.0 - w0) * np.array([0.0, -1.0])
            + (1.0 - w1) * np.array([0.0, 1.0])
        )
        return field / np.linalg.norm(field, axis=1)[:, None]

    def transversal_derivative(self, omega) -> np.ndarray:
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        h = 1e-6 * self.length
        upper = np.clip(omega + h, 0.0, self.length)
        lower = np.clip(omega - h, 0.0, self.length)
        return (self.transversal(upper) - self.transversal(lower)) / (upper - lower)[:, None]

    def cutoff(self, lam):
        width = self.eps1 * self.b0
        return 1.0 - smoothstep((np.abs(lam) - width) / width)

    def cutoff_derivative(self, lam):
        width = self.eps1 * self.b0
        lam = np.asarray(lam, dtype=float)
        return -np.sign(lam) * smoothstep_derivative((np.abs(lam) - width) / width) / width

    def _tube_half_width(self) -> float:
        spec = self.spec
        omega = np.linspace(0.0, self.length, 512)
        r0, r1 = self.corner_distances(omega)
        keep = (r0 > 2.0 * spec.eps) & (r1 > 2.0 * spec.eps)
        points = self.m(omega[keep])
        axis_y = np.linspace(-spec.a2_len, spec.a1, 4001)
        axis = np.column_stack([np.zeros_like(axis_y), axis_y])
        outer_y = np.linspace(-spec.a2_len, spec.a1, 4001)
        outer = np.column_stack([outer_boundary(spec, outer_y), outer_y])
        boundary = np.vstack([axis, outer])
        distances = np.linalg.norm(points[:, None, :] - boundary[None, :, :], axis=2)
        nearest = float(np.min(distances))
        b0 = min(0.4 * nearest, 0.5 * spec.eps)
        self.logger.debug("Tube half-width b0=%.6g (boundary distance %.6g).", b0, nearest)
        return b0

    def frame_gradients(self, omega, lam) -> tuple:
        """Gradients of the chart coordinates omega and lambda in x."""
        omega = np.atleast_1d(omega)
        lam = np.atleast_1d(lam)
        column_omega = self.tangent(omega) + lam[:, None] * self.transversal_derivative(omega)
        column_lam = self.transversal(omega)
        matrix = np.stack([column_omega, column_lam], axis=2)
        inverse = np.linalg.inv(matrix)
        return inverse[:, 0, :], inverse[:, 1, :]

    def _cross(self, omega, point):
        m = self.m(omega)[0]
        l = self.transversal(omega)[0]
        d = point - m
        return l[0] * d[1] - l[1] * d[0]

    def chart_coordinates(self, points) -> tuple:
        """Invert x = m(omega) + lambda l(omega) inside the tube |lambda| < b0.

        Returns:
            tuple: (omega, lambda, inside) arrays; omega and lambda are nan outside.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        omega = np.full(points.shape[0], np.nan)
        lam = np.full(points.shape[0], np.nan)
        reach = 1.5 * self.b0 + 2.0 * self.length / CHART_SAMPLES
        for start in range(0, points.shape[0], 256):
            chunk = points[start : start + 256]
            d = chunk[:, None, :] - self._table_m[None, :, :]
            near = np.min(np.linalg.norm(d, axis=2), axis=1) < reach
            cross = self._table_l[None, :, 0] * d[:, :, 1] - self._table_l[None, :, 1] * d[:, :, 0]
            for row in np.nonzero(near)[0]:
                point = chunk[row]
                best = None
                values = cross[row]
                candidates = list(np.nonzero(values[:-1] * values[1:] < 0)[0])
                candidates += [j for j in np.nonzero(values == 0.0)[0]]
                for j in candidates:
                    if values[j] == 0.0:
                        root = self._table_omega[j]
                    else:
                        root = brentq(
                            self._cross,
                            self._table_omega[j],
                            self._table_omega[j + 1],
                            args=(point,),
                            xtol=1e-14,
                        )
                    offset = float(np.dot(self.transversal(root)[0], point - self.m(root)[0]))
                    if best is None or abs(offset) < abs(best[1]):
                        best = (root, offset)
                if best is not None and abs(best[1]) < self.b0:
                    omega[start + row], lam[start + row] = best
        return omega, lam, ~np.isnan(omega)


@dataclass
class Domain:
    spec: DomainSpec
    mesh: Mesh
    profile: InterfaceProfile
    chart: InterfaceChart

    @property
    def interface_omega(self) -> np.ndarray:
        """Arc-length parameter of the interface nodes."""
        return self.chart.omega_of_t(self.mesh.nodes[self.mesh.interface, 1])


def build_domain(spec: DomainSpec, mesh_spec: MeshSpec | None = None) -> Domain:
    """Check the specification and build the mesh and the interface chart.

    Raises:
        GeometryError: If the specification violates the geometric constraints.
    """
    problems = validate_domain(spec)
    if problems:
        raise GeometryError("; ".join(problems))
    mesh_spec = mesh_spec or MeshSpec()
    profile = InterfaceProfile(spec)
    mesh = build_mesh(spec, mesh_spec, profile)
    chart = InterfaceChart(spec, profile)
    angle0, angle1 = interface_angles(mesh)
    logger.info(
        "Measured contact angles %.6f and %.6f (prescribed %.6f and %.6f).",
        angle0,
        angle1,
        spec.delta0,
        spec.delta1,
    )
    return Domain(spec=spec, mesh=mesh, profile=profile, chart=chart)


# ==========================
# Hanzawa transform
# ==========================


class DisplacementField:
    """Interface displacement s(omega) with its omega-derivative."""

    def __init__(self, omega, values):
        self.omega = np.asarray(omega, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self._interp = PchipInterpolator(self.omega, self.values)
        self._deriv = self._interp.derivative()

    @classmethod
    def zero(cls, chart: InterfaceChart) -> "DisplacementField":
        return cls([0.0, chart.length], [0.0, 0.0])

    def __call__(self, omega):
        return self._interp(omega)

    def derivative(self, omega):
        return self._deriv(omega)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def check_tube(s_field: DisplacementField, chart: InterfaceChart) -> float:
    """Return the margin b0/4 - max|s|.

    Raises:
        TubeViolation: If the displacement reaches b0/4.
    """
    margin = 0.25 * chart.b0 - s_field.sup()
    if margin <= 0:
        raise TubeViolation(
            f"tube violation: max|s| = {s_field.sup():.6g} reaches b0/4 = {0.25 * chart.b0:.6g}"
        )
    return margin


class ChartPoints:
    """Chart coordinates of fixed points, computed once."""

    def __init__(self, points, chart: InterfaceChart):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.chart = chart
        self.omega, self.lam, self.inside = chart.chart_coordinates(self.points)
        self.grad_omega = np.zeros_like(self.points)
        self.grad_lam = np.zeros_like(self.points)
        if np.any(self.inside):
            go, gl = chart.frame_gradients(self.omega[self.inside], self.lam[self.inside])
            self.grad_omega[self.inside] = go
            self.grad_lam[self.inside] = gl


def hanzawa_forward(x, s_field: DisplacementField, chart: InterfaceChart, frame=None):
    """y = x + chi(lambda) s(omega) l(omega) inside the tube, y = x outside."""
    check_tube(s_field, chart)
    frame = frame or ChartPoints(x, chart)
    y = frame.points.copy()
    inside = frame.inside
    if np.any(inside):
        omega, lam = frame.omega[inside], frame.lam[inside]
        shift = chart.cutoff(lam) * s_field(omega)
        y[inside] += shift[:, None] * chart.transversal(omega)
    return y


def jacobian(x, s_field: DisplacementField, chart: InterfaceChart, frame=None) -> np.ndarray:
    """(n, 2, 2) Jacobi matrices of the Hanzawa map at the points x."""
    frame = frame or ChartPoints(x, chart)
    count = frame.points.shape[0]
    matrices = np.tile(np.eye(2), (count, 1, 1))
    inside = frame.inside
    if not np.any(inside):
        return matrices
    omega, lam = frame.omega[inside], frame.lam[inside]
    grad_omega, grad_lam = frame.grad_omega[inside], frame.grad_lam[inside]
    s_val, s_deriv = s_field(omega), s_field.derivative(omega)
    chi, chi_deriv = chart.cutoff(lam), chart.cutoff_derivative(lam)
    l_vec = chart.transversal(omega)
    l_deriv = chart.transversal_derivative(omega)
    row = (chi_deriv * s_val)[:, None] * grad_lam + (chi * s_deriv)[:, None] * grad_omega
    matrices[inside] += np.einsum("ni,nj->nij", l_vec, row)
    matrices[inside] += np.einsum("ni,nj->nij", (chi * s_val)[:, None] * l_deriv, grad_omega)
    return matrices


def hanzawa_inverse(
    y, s_field: DisplacementField, chart: InterfaceChart, tol: float = 1e-13, max_iter: int = 50
):
    """Newton iteration for x with hanzawa_forward(x) = y, started at x = y."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    x = y.copy()
    for _ in range(max_iter):
        frame = ChartPoints(x, chart)
        residual = hanzawa_forward(x, s_field, chart, frame) - y
        if np.max(np.abs(residual)) < tol:
            break
        step = np.linalg.solve(jacobian(x, s_field, chart, frame), residual[:, :, None])[:, :, 0]
        x = x - step
    else:
        logger.warning("Hanzawa inverse stopped after %d iterations.", max_iter)
    return x


def metric_coeffs(omega, s_val, s_deriv, chart: InterfaceChart) -> tuple:
    """Coefficients S = |grad_s lambda|^2 and S1 = <grad_s omega, grad_s lambda> on the interface.

    grad_s is the gradient transported by the inverse transposed Jacobian,
    evaluated at lambda = 0 where chi = 1 and chi' = 0.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    s_val = np.broadcast_to(np.asarray(s_val, dtype=float), omega.shape)
    s_deriv = np.broadcast_to(np.asarray(s_deriv, dtype=float), omega.shape)
    grad_omega, grad_lam = chart.frame_gradients(omega, np.zeros_like(omega))
    l_vec = chart.transversal(omega)
    l_deriv = chart.transversal_derivative(omega)
    matrices = np.tile(np.eye(2), (omega.size, 1, 1))
    matrices += np.einsum("ni,nj->nij", l_vec, s_deriv[:, None] * grad_omega)
    matrices += np.einsum("ni,nj->nij", s_val[:, None] * l_deriv, grad_omega)
    inverse_t = np.transpose(np.linalg.inv(matrices), (0, 2, 1))
    g_lam = np.einsum("nij,nj->ni", inverse_t, grad_lam)
    g_omega = np.einsum("nij,nj->ni", inverse_t, grad_omega)
    return np.sum(g_lam * g_lam, axis=1), np.sum(g_omega * g_lam, axis=1)


# ==========================
# Diagnostics
# ==========================


def log_polar(y) -> np.ndarray:
    """x1 = ln|y|, x2 = arctan(y2/y1); maps a plane corner onto a strip."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    radius = np.linalg.norm(y, axis=1)
    if np.any(radius == 0):
        raise GeometryError("log-polar map is undefined at the origin")
    return np.column_stack([np.log(radius), np.arctan2(y[:, 1], y[:, 0])])


def log_polar_inverse(x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    radius = np.exp(x[:, 0])
    return np.column_stack([radius * np.cos(x[:, 1]), radius * np.sin(x[:, 1])])


def corner_distance(points, spec: DomainSpec) -> np.ndarray:
    """Distance to the nearer contact point."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    distances = np.linalg.norm(points[:, None, :] - spec.corners[None, :, :], axis=2)
    return np.min(distances, axis=1)


def weighted_sup_norm(values, points, s: float, spec: DomainSpec) -> float:
    """Discrete weighted sup-norm max |v| / r^s over points off the corners."""
    values = np.abs(np.asarray(values, dtype=float))
    r = corner_distance(points, spec)
    keep = r > 0
    return float(np.max(values[keep] / r[keep] ** s))
