"""Piecewise-linear solver for the two-phase transmission problem and its interface data.

The problem reads k_i Laplace(W_i) = k_i phi0_i in Omega_i, W1 - W2 = phi1 and
k1 dW1/dn - k2 dW2/dn = phi2 on the interface, W1 = phi3 on Gamma1 and
W2 = phi4 on Gamma2, with n the interface normal pointing into Omega1.
The jump is lifted onto the Omega1 side, so the unknown is a single
continuous P1 field u with W2 = u and W1 = u + G. A field may carry an
analytic background pressure; u then holds the finite element correction.
"""

# Standard library imports
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

# Related third-party imports
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import sparse
from scipy.optimize import brentq
from scipy.sparse.linalg import bicgstab, spsolve

# Local application/library specific imports
from .errors import ConfigurationError, DerivativeUnresolved, InsufficientDecayData, SolverError
from .geometry import Domain, DomainSpec, Mesh, metric_coeffs, smoothstep


logger = logging.getLogger(__name__)

SOLVER_RTOL = 1e-12
MIN_FIT_SAMPLES = 8
GAUSS_NODES = 48
STRIP_FILL = 0.45
RICHARDSON_BASES = (1.0, math.sqrt(2.0), 2.0)
RESOLVED_SKIP = 2


@dataclass(frozen=True)
class PhysicsSpec:
    """Mobilities and the near-corner size of the default pressures.

    Attributes:
        k1 (float): Mobility in Omega1.
        k2 (float): Mobility in Omega2.
        c1 (float): Pressure on Gamma1 behaves like c1 (r/a)**s_star at the contact points.
        c2 (float): Pressure on Gamma2 behaves like c2 (r/a)**s_star at the contact points.
    """

    k1: float = 1.0
    k2: float = 0.5
    c1: float = 0.05
    c2: float = 1.0

    @property
    def k(self) -> float:
        return self.k2 / self.k1


@dataclass
class TransmissionProblem:
    """Data of the transmission problem; None stands for zero data.

    Every callable takes an (n, 2) point array; flux_jump also receives the
    (n, 2) unit normals at those points. With data_on_curve the interface
    data are sampled on the interface curve with its normals, otherwise on
    the polygon of interface nodes with the segment normals.
    """

    k1: float
    k2: float
    source1: Optional[Callable] = None
    source2: Optional[Callable] = None
    jump: Optional[Callable] = None
    flux_jump: Optional[Callable] = None
    dirichlet1: Optional[Callable] = None
    dirichlet2: Optional[Callable] = None
    data_on_curve: bool = False

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError(f"mobilities must be positive, got k1={self.k1}, k2={self.k2}")


def _evaluate(function, points, *extra):
    if function is None:
        return np.zeros(points.shape[0])
    values = np.asarray(function(points, *extra), dtype=float)
    return np.broadcast_to(values, (points.shape[0],)).copy()


# ==========================
# Closed-form pressure
# ==========================


@dataclass(frozen=True)
class ClosedFormPressure:
    """Harmonic phase pressures of the circular lens between A0 = 0 and A1 = i a.

    In Z = log(z / (z - i a)) - i alpha, alpha = pi - delta, Omega2 is the strip
    0 < Im Z < delta, Omega1 is -alpha < Im Z < 0 and the circular interface
    meeting the axis at angle delta is Im Z = 0. With E = cosh(beta Z)**(-s/beta)
    and P' = E the pressures W_i = Re[c_w E - (i / k_i) c_q P] satisfy both
    transmission conditions on Im Z = 0, have dW_i/dn < 0 there when c_q > 0
    and vanish like r**s at both contact points.
    """

    a: float
    delta: float
    k1: float
    k2: float
    s: float
    c_w: float
    c_q: float

    @property
    def alpha(self) -> float:
        return math.pi - self.delta

    @property
    def beta(self) -> float:
        return STRIP_FILL * math.pi / max(self.alpha, self.delta)

    @property
    def power(self) -> float:
        return self.s / self.beta

    @property
    def alpha_limit(self) -> float:
        """Limit of (dW1/dr) / (dW1/dn) along the interface at both contact points."""
        return -self.s * self.k1 * self.c_w / self.c_q

    @classmethod
    def from_corner_data(
        cls, a: float, delta: float, k1: float, k2: float, s: float, c1: float, c2: float
    ) -> "ClosedFormPressure":
        """Pick c_w, c_q so that W1 ~ c1 (r/a)**s on Gamma1 and W2 ~ c2 (r/a)**s on Gamma2.

        Raises:
            ConfigurationError: If the two corner conditions are degenerate for s.
        """
        alpha = math.pi - delta
        power = s * max(alpha, delta) / (STRIP_FILL * math.pi)
        matrix = np.array(
            [
                [math.cos(s * delta), math.sin(s * delta) / (s * k2)],
                [math.cos(s * alpha), -math.sin(s * alpha) / (s * k1)],
            ]
        )
        if abs(np.linalg.det(matrix)) < 1e-12:
            raise ConfigurationError(f"corner data are degenerate for s = {s}")
        c_w, c_q = np.linalg.solve(matrix, np.array([c2, c1]) / 2.0**power)
        logger.debug("Closed-form pressure: c_w = %.6g, c_q = %.6g.", c_w, c_q)
        return cls(a=a, delta=delta, k1=k1, k2=k2, s=s, c_w=float(c_w), c_q=float(c_q))

    def _mobility(self, phase: int) -> float:
        return self.k1 if phase == 1 else self.k2

    def coordinates(self, points) -> tuple:
        """Strip coordinate Z, dZ/dz and the mask of points off both contact points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        z = points[:, 0] + 1j * points[:, 1]
        ia = 1j * self.a
        regular = (np.abs(z) > 1e-12 * self.a) & (np.abs(z - ia) > 1e-12 * self.a)
        z = np.where(regular, z, 0.5 * ia + self.a)
        zeta = z / (z - ia)
        # arg zeta in (-pi/2, 3pi/2]: the axis between A0 and A1 has arg pi
        log_zeta = np.log(-1j * zeta) + 0.5j * math.pi
        return log_zeta - 1j * self.alpha, 1.0 / z - 1.0 / (z - ia), regular

    def _E(self, Z):
        return np.exp(-self.power * np.log(np.cosh(self.beta * Z)))

    def _strip_integral(self, Z):
        """Integral of E from Re Z to Z along the vertical segment."""
        x, w = leggauss(GAUSS_NODES)
        tau = Z.imag
        sigma = 0.5 * tau[:, None] * (1.0 + x[None, :])
        values = self._E(Z.real[:, None] + 1j * sigma)
        return 0.5 * tau * np.sum(w[None, :] * values, axis=1)

    def value(self, phase: int, points) -> np.ndarray:
        Z, _, regular = self.coordinates(points)
        k = self._mobility(phase)
        values = self.c_w * self._E(Z).real + self.c_q / k * self._strip_integral(Z).real
        return np.where(regular, values, 0.0)

    def gradient(self, phase: int, points) -> np.ndarray:
        Z, dZ, regular = self.coordinates(points)
        k = self._mobility(phase)
        E = self._E(Z)
        derivative = -self.s * np.tanh(self.beta * Z) * E * self.c_w - 1j * self.c_q * E / k
        G = derivative * dZ
        grad = np.column_stack([G.real, -G.imag])
        grad[~regular] = 0.0
        return grad

    def flux_vector(self, phase: int, points) -> np.ndarray:
        return self.gradient(phase, points)

    def traces(self) -> tuple:
        """Boundary data (p1, p2) equal to the phase pressures."""
        return partial(self.value, 1), partial(self.value, 2)


def default_pressure_data(spec: DomainSpec, physics: PhysicsSpec, s_star: float) -> ClosedFormPressure:
    """Closed-form pressures with the mean contact angle of the domain."""
    delta = 0.5 * (spec.delta0 + spec.delta1)
    return ClosedFormPressure.from_corner_data(
        spec.a, delta, physics.k1, physics.k2, s_star, physics.c1, physics.c2
    )


def correction_problem(background, p1, p2, k1: float, k2: float) -> TransmissionProblem:
    """Problem for V = W - background with the boundary data p1, p2.

    background provides value, gradient and flux_vector per phase; its
    flux_vector is the conormal flux divided by the mobility.
    """

    def dirichlet(p, phase):
        return lambda points: _evaluate(p, points) - background.value(phase, points)

    def jump(points):
        return background.value(2, points) - background.value(1, points)

    def flux_jump(points, normals):
        balance = k1 * background.flux_vector(1, points) - k2 * background.flux_vector(2, points)
        return -np.sum(balance * normals, axis=1)

    return TransmissionProblem(
        k1=k1,
        k2=k2,
        jump=jump,
        flux_jump=flux_jump,
        dirichlet1=dirichlet(p1, 1),
        dirichlet2=dirichlet(p2, 2),
        data_on_curve=True,
    )


# ==========================
# Assembly
# ==========================


def shape_gradients(mesh: Mesh) -> tuple:
    """Gradients of the barycentric coordinates, shape (m, 2, 3), and element areas."""
    p = mesh.nodes[mesh.triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    area = mesh.areas()
    grads = np.empty((mesh.triangles.shape[0], 2, 3))
    for i in range(3):
        j, l = (i + 1) % 3, (i + 2) % 3
        grads[:, 0, i] = y[:, j] - y[:, l]
        grads[:, 1, i] = x[:, l] - x[:, j]
    grads /= (2.0 * area)[:, None, None]
    return grads, area


def _tensors(coefficients, count: int) -> np.ndarray:
    coeff = np.asarray(coefficients, dtype=float)
    if coeff.ndim == 0:
        coeff = np.full(count, float(coeff))
    if coeff.ndim == 1:
        coeff = coeff[:, None, None] * np.eye(2)[None, :, :]
    return coeff


def assemble_stiffness(mesh: Mesh, coefficients, elements=None) -> sparse.csr_matrix:
    """Stiffness matrix of div(C grad u) over the selected elements.

    Args:
        mesh (Mesh): The triangulation.
        coefficients: Per-element scalars (m,) or tensors (m, 2, 2), or a scalar.
        elements (np.ndarray, optional): Boolean element mask; all elements by default.
    """
    grads, area = shape_gradients(mesh)
    count = mesh.triangles.shape[0]
    coeff = _tensors(coefficients, count)
    mask = np.ones(count, dtype=bool) if elements is None else np.asarray(elements, dtype=bool)
    local = np.einsum("mai,mab,mbj->mij", grads[mask], coeff[mask], grads[mask])
    local *= area[mask][:, None, None]
    tris = mesh.triangles[mask]
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    size = mesh.nodes.shape[0]
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(size, size)).tocsr()


def assemble_load(mesh: Mesh, values_at, elements) -> np.ndarray:
    """Load vector of a volume density by the edge-midpoint rule.

    values_at receives the (k, 2) midpoints and returns the density there.
    """
    tris = mesh.triangles[elements]
    area = mesh.areas()[elements]
    p = mesh.nodes[tris]
    load = np.zeros(mesh.nodes.shape[0])
    if tris.shape[0] == 0:
        return load
    mids = {}
    for a, b in ((0, 1), (1, 2), (0, 2)):
        mids[(a, b)] = values_at(0.5 * (p[:, a] + p[:, b]))
    for i in range(3):
        pair = [key for key in mids if i in key]
        contribution = area / 6.0 * (mids[pair[0]] + mids[pair[1]])
        np.add.at(load, tris[:, i], contribution)
    return load


def interface_normals(domain: Domain, nodes) -> np.ndarray:
    """Unit normals (1, -g')/sqrt(1 + g'^2) at interface nodes."""
    return curve_normals(domain, domain.mesh.nodes[nodes, 1])


def curve_normals(domain: Domain, heights) -> np.ndarray:
    slope = domain.profile.slope(heights)
    normals = np.column_stack([np.ones_like(slope), -slope])
    return normals / np.linalg.norm(normals, axis=1)[:, None]


def segment_normals(points) -> np.ndarray:
    """Unit normals of the interface polygon segments, pointing into Omega1."""
    edges = np.diff(points, axis=0)
    normals = np.column_stack([edges[:, 1], -edges[:, 0]])
    return normals / np.linalg.norm(normals, axis=1)[:, None]


def interface_midpoints(domain: Domain, on_curve: bool = False) -> np.ndarray:
    """Midpoints of the interface segments, or the curve points at the same heights."""
    pts = domain.mesh.nodes[domain.mesh.interface]
    mids = 0.5 * (pts[:-1] + pts[1:])
    if on_curve:
        mids[:, 0] = domain.profile.value(mids[:, 1])
    return mids


def assemble_interface_load(domain: Domain, flux_jump, on_curve: bool = False) -> np.ndarray:
    """Simpson rule for the interface integral of phi2 against the hat functions."""
    mesh = domain.mesh
    load = np.zeros(mesh.nodes.shape[0])
    if flux_jump is None:
        return load
    ids = mesh.interface
    pts = mesh.nodes[ids]
    mids = interface_midpoints(domain, on_curve)
    if on_curve:
        at_nodes = _evaluate(flux_jump, pts, interface_normals(domain, ids))
        at_left, at_right = at_nodes[:-1], at_nodes[1:]
        at_mids = _evaluate(flux_jump, mids, curve_normals(domain, mids[:, 1]))
    else:
        normals = segment_normals(pts)
        at_left = _evaluate(flux_jump, pts[:-1], normals)
        at_right = _evaluate(flux_jump, pts[1:], normals)
        at_mids = _evaluate(flux_jump, mids, normals)
    lengths = np.linalg.norm(pts[1:] - pts[:-1], axis=1)
    np.add.at(load, ids[:-1], lengths * (at_left + 2.0 * at_mids) / 6.0)
    np.add.at(load, ids[1:], lengths * (at_right + 2.0 * at_mids) / 6.0)
    return load


def _solve(matrix, rhs, label):
    if matrix.shape[0] == 0:
        return np.zeros(0)
    try:
        solution = spsolve(matrix.tocsc(), rhs)
    except RuntimeError as e:
        logger.warning("Direct solve failed for %s: %s.", label, e)
        solution = np.full(rhs.shape, np.nan)
    if np.all(np.isfinite(solution)):
        return np.atleast_1d(solution)
    logger.warning("Falling back to BiCGSTAB for %s.", label)
    solution, info = bicgstab(matrix, rhs, rtol=SOLVER_RTOL, maxiter=20 * matrix.shape[0])
    if info != 0 or not np.all(np.isfinite(solution)):
        raise SolverError(f"linear solve for {label} did not converge (info={info})")
    return solution


# ==========================
# Pressure fields
# ==========================


@dataclass
class InterfaceTrace:
    """Values and one-sided gradients of both phases at the interface nodes.

    background1 and background2 hold the part of grad1 and grad2 coming from
    an analytic background, or None.
    """

    omega: np.ndarray
    points: np.ndarray
    value1: np.ndarray
    value2: np.ndarray
    grad1: np.ndarray
    grad2: np.ndarray
    normal: np.ndarray
    background1: Optional[np.ndarray] = None
    background2: Optional[np.ndarray] = None

    @property
    def tangent(self) -> np.ndarray:
        return np.column_stack([-self.normal[:, 1], self.normal[:, 0]])

    @property
    def dn1(self) -> np.ndarray:
        return np.sum(self.grad1 * self.normal, axis=1)

    @property
    def dn2(self) -> np.ndarray:
        return np.sum(self.grad2 * self.normal, axis=1)

    @property
    def dt1(self) -> np.ndarray:
        return np.sum(self.grad1 * self.tangent, axis=1)

    @property
    def dt2(self) -> np.ndarray:
        return np.sum(self.grad2 * self.tangent, axis=1)

    def correction(self, phase: int) -> np.ndarray:
        """Gradient of the finite element part alone."""
        grad, background = (self.grad1, self.background1) if phase == 1 else (self.grad2, self.background2)
        return grad if background is None else grad - background


@dataclass
class PressureField:
    """Discrete solution: W2 = u and W1 = u + lift on the Omega1 elements, plus the background.

    Attributes:
        domain (Domain): Domain and mesh the field lives on.
        u (np.ndarray): Continuous nodal unknown.
        lift (np.ndarray): Interface jump, nonzero only on interface nodes.
        k1 (float): Mobility in Omega1.
        k2 (float): Mobility in Omega2.
        coefficients (np.ndarray, optional): Per-element tensors when the operator is transformed.
        background (optional): Analytic part with value(phase, points) and gradient(phase, points).
        loads (tuple, optional): Volume load vectors of the two phases.
    """

    domain: Domain
    u: np.ndarray
    lift: np.ndarray
    k1: float
    k2: float
    coefficients: Optional[np.ndarray] = None
    background: Optional[object] = None
    loads: Optional[tuple] = None
    _trace: Optional[InterfaceTrace] = field(default=None, repr=False)
    _background_values: dict = field(default_factory=dict, repr=False)

    @property
    def mesh(self) -> Mesh:
        return self.domain.mesh

    def correction_values(self, phase: int) -> np.ndarray:
        """Nodal values of the finite element part of W_phase."""
        return self.u + self.lift if phase == 1 else self.u.copy()

    def values(self, phase: int) -> np.ndarray:
        """Nodal values of W_phase; meaningful on the nodes of that phase."""
        values = self.correction_values(phase)
        if self.background is not None:
            if phase not in self._background_values:
                self._background_values[phase] = self.background.value(phase, self.mesh.nodes)
            values = values + self._background_values[phase]
        return values

    def _correction_element_gradients(self, phase: int) -> tuple:
        grads, _ = shape_gradients(self.mesh)
        mask = self.mesh.phase == phase
        nodal = self.correction_values(phase)[self.mesh.triangles[mask]]
        return mask, np.einsum("mai,mi->ma", grads[mask], nodal)

    def element_gradients(self, phase: int) -> tuple:
        """(mask, gradients) of W_phase on the elements of that phase."""
        mask, element = self._correction_element_gradients(phase)
        if self.background is not None:
            centroids = self.mesh.nodes[self.mesh.triangles[mask]].mean(axis=1)
            element = element + self.background.gradient(phase, centroids)
        return mask, element

    def _averaged(self, mask, element) -> np.ndarray:
        tris = self.mesh.triangles[mask]
        area = self.mesh.areas()[mask]
        total = np.zeros((self.mesh.nodes.shape[0],) + element.shape[1:])
        weight = np.zeros(self.mesh.nodes.shape[0])
        expand = (slice(None),) + (None,) * (element.ndim - 1)
        for i in range(3):
            np.add.at(total, tris[:, i], area[expand] * element)
            np.add.at(weight, tris[:, i], area)
        with np.errstate(invalid="ignore", divide="ignore"):
            return total / weight[expand]

    def node_gradients(self, phase: int) -> np.ndarray:
        """Area-weighted average of the element gradients of one phase at each node."""
        averaged = self._averaged(*self._correction_element_gradients(phase))
        if self.background is not None:
            averaged = averaged + self.background.gradient(phase, self.mesh.nodes)
        return averaged

    def _recovered_gradients(self, phase: int) -> np.ndarray:
        """Correction gradients at the interface nodes from the lumped conormal flux.

        At a free interface node j the phase residual of the stiffness rows
        equals the flux (C grad U) . N_j times the lumped length l_j, with N_j
        the length-weighted mean of the adjacent segment normals; together
        with the polygon derivative of the trace this fixes grad U.
        """
        mesh = self.mesh
        ids = mesh.interface
        pts = mesh.nodes[ids]
        mobility = self.k1 if phase == 1 else self.k2
        coeff = element_coefficients(mesh, self.k1, self.k2) if self.coefficients is None else self.coefficients
        mask = mesh.phase == phase
        stiff = assemble_stiffness(mesh, coeff, mask)
        values = self.correction_values(phase)
        residual = (stiff @ values)[ids]
        if self.loads is not None:
            residual = residual - self.loads[phase - 1][ids]
        # Omega1 lies on the side of n, so its outward normal is -n
        flux = -residual if phase == 1 else residual

        lengths = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        normals = segment_normals(pts)
        tangents = np.column_stack([-normals[:, 1], normals[:, 0]])
        slopes = np.diff(values[ids]) / lengths
        grad = self._averaged(*self._correction_element_gradients(phase))[ids]
        inner = slice(1, -1)
        left, right = lengths[:-1], lengths[1:]
        share = 0.5 * (left + right)
        lumped = (left[:, None] * normals[:-1] + right[:, None] * normals[1:]) / (2.0 * share)[:, None]
        chord = (left[:, None] * tangents[1:] + right[:, None] * tangents[:-1]) / (2.0 * share)[:, None]
        d_chord = (left * slopes[1:] + right * slopes[:-1]) / (2.0 * share)

        metric = self._averaged(mask, _tensors(coeff, mesh.triangles.shape[0])[mask])[ids][inner] / mobility
        system = np.stack([np.einsum("nij,nj->ni", metric, lumped), chord], axis=1)
        rhs = np.column_stack([flux[inner] / (share * mobility), d_chord])
        grad[inner] = np.linalg.solve(system, rhs[:, :, None])[:, :, 0]
        return grad

    def interface_trace(self) -> InterfaceTrace:
        if self._trace is None:
            ids = self.mesh.interface
            points = self.mesh.nodes[ids]
            grads, backgrounds = [], []
            for phase in (1, 2):
                grad = self._recovered_gradients(phase)
                background = None
                if self.background is not None:
                    background = self.background.gradient(phase, points)
                    grad = grad + background
                grads.append(grad)
                backgrounds.append(background)
            self._trace = InterfaceTrace(
                omega=self.domain.interface_omega,
                points=points,
                value1=self.values(1)[ids],
                value2=self.values(2)[ids],
                grad1=grads[0],
                grad2=grads[1],
                normal=interface_normals(self.domain, ids),
                background1=backgrounds[0],
                background2=backgrounds[1],
            )
        return self._trace


def element_coefficients(mesh: Mesh, k1: float, k2: float) -> np.ndarray:
    return np.where(mesh.phase == 1, k1, k2).astype(float)


def solve_transmission(
    problem: TransmissionProblem, domain: Domain, coefficients=None, background=None
) -> PressureField:
    """Assemble and solve the transmission problem on the domain mesh.

    Args:
        problem (TransmissionProblem): The data.
        domain (Domain): Mesh and interface description.
        coefficients (np.ndarray, optional): Per-element coefficient tensors replacing
            k_i; used for the transformed operator on the fixed domain.
        background (optional): Analytic pressure added to the solution; the
            problem data are then those of the correction.

    Returns:
        PressureField: The discrete solution.

    Raises:
        SolverError: If the linear solve fails.
    """
    mesh = domain.mesh
    nodes = mesh.nodes
    phase1 = mesh.phase == 1
    phase2 = ~phase1
    coeff = element_coefficients(mesh, problem.k1, problem.k2) if coefficients is None else coefficients
    stiff1 = assemble_stiffness(mesh, coeff, phase1)
    stiff2 = assemble_stiffness(mesh, coeff, phase2)

    lift = np.zeros(nodes.shape[0])
    lift[mesh.interface] = _evaluate(problem.jump, nodes[mesh.interface])

    # k_i times the source enters with a minus sign in the weak form
    loads = (
        -problem.k1 * assemble_load(mesh, lambda x: _evaluate(problem.source1, x), phase1),
        -problem.k2 * assemble_load(mesh, lambda x: _evaluate(problem.source2, x), phase2),
    )
    load = loads[0] + loads[1]
    load -= assemble_interface_load(domain, problem.flux_jump, problem.data_on_curve)
    load -= stiff1 @ lift

    fixed = np.zeros(nodes.shape[0])
    gamma1, gamma2 = mesh.gamma1, mesh.gamma2
    corner_ids = np.array(mesh.corners)
    fixed[gamma1] = _evaluate(problem.dirichlet1, nodes[gamma1]) - lift[gamma1]
    fixed[gamma2] = _evaluate(problem.dirichlet2, nodes[gamma2])
    fixed[corner_ids] = _evaluate(problem.dirichlet2, nodes[corner_ids])

    is_fixed = np.zeros(nodes.shape[0], dtype=bool)
    is_fixed[mesh.dirichlet] = True
    free = ~is_fixed
    matrix = (stiff1 + stiff2).tocsr()
    rhs = load - matrix[:, is_fixed] @ fixed[is_fixed]
    reduced = matrix[free][:, free]

    u = fixed.copy()
    u[free] = _solve(reduced, rhs[free], f"{int(free.sum())} unknowns")
    residual = np.linalg.norm(reduced @ u[free] - rhs[free])
    scale = max(np.linalg.norm(rhs[free]), 1.0)
    logger.debug("Transmission solve residual %.3e (scale %.3e).", residual, scale)
    if not residual <= 1e-8 * scale:
        raise SolverError(
            f"transmission solve residual {residual:.3e} on mesh with {nodes.shape[0]} nodes, "
            f"h={mesh.max_diameter():.3e}"
        )
    return PressureField(
        domain=domain,
        u=u,
        lift=lift,
        k1=problem.k1,
        k2=problem.k2,
        coefficients=coefficients,
        background=background,
        loads=loads,
    )


def solve_initial_pressure(domain: Domain, p1, p2, k1: float, k2: float, background=None) -> PressureField:
    """Initial pressures: no sources, no jumps, p1 on Gamma1 and p2 on Gamma2.

    With a background only the correction is solved for; it vanishes when the
    background itself meets the data.
    """
    if background is None:
        problem = TransmissionProblem(k1=k1, k2=k2, dirichlet1=p1, dirichlet2=p2)
    else:
        problem = correction_problem(background, p1, p2, k1, k2)
    field_ = solve_transmission(problem, domain, background=background)
    values = np.concatenate([field_.values(1), field_.values(2)])
    logger.info(
        "Initial pressure solved on %d nodes: range [%.6g, %.6g], correction size %.3g.",
        domain.mesh.nodes.shape[0],
        float(np.min(values)),
        float(np.max(values)),
        float(np.max(np.abs(field_.correction_values(1)))),
    )
    return field_


# ==========================
# Well-posedness checks
# ==========================


def check_k_ratio(k1: float, k2: float) -> bool:
    return 0.0 < k2 / k1 < 1.0


@dataclass
class H4Report:
    """Outcome of the sign condition on the interface normal derivatives."""

    passed: bool
    k: float
    k_in_range: bool
    max_dn1: float = math.nan
    max_dn2: float = math.nan
    samples: int = 0
    corner_violations: int = 0
    reason: str = ""

    @property
    def margin(self) -> float:
        return -max(self.max_dn1, self.max_dn2)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "k": self.k,
            "k_in_range": self.k_in_range,
            "max_dn1": self.max_dn1,
            "max_dn2": self.max_dn2,
            "margin": self.margin,
            "samples": self.samples,
            "corner_violations": self.corner_violations,
            "reason": self.reason,
        }


def check_h4(field_: PressureField, corner_radius: float = 0.05) -> H4Report:
    """Check k in (0, 1) and dW1/dn < 0, dW2/dn < 0 at every interface node but A0 and A1.

    Wrong signs within corner_radius of a contact point are also counted as
    corner violations.
    """
    k = field_.k2 / field_.k1
    if not check_k_ratio(field_.k1, field_.k2):
        return H4Report(False, k, False, reason=f"k = {k:.6g} is not in (0, 1)")
    trace = field_.interface_trace()
    interior = slice(1, -1)
    dn1, dn2 = trace.dn1[interior], trace.dn2[interior]
    if dn1.size == 0:
        return H4Report(False, k, True, reason="no interface samples between the corners")
    corners = field_.domain.spec.corners
    points = trace.points[interior]
    r = np.min(np.linalg.norm(points[:, None, :] - corners[None], axis=2), axis=1)
    wrong = (dn1 >= 0) | (dn2 >= 0)
    corner_violations = int(np.sum(wrong & (r <= corner_radius)))
    max_dn1, max_dn2 = float(np.max(dn1)), float(np.max(dn2))
    passed = not np.any(wrong)
    reason = "" if passed else f"normal derivative is not strictly negative at {int(np.sum(wrong))} interface samples"
    if corner_violations:
        logger.warning("%d interface samples near the corners violate the sign condition.", corner_violations)
    return H4Report(passed, k, True, max_dn1, max_dn2, int(dn1.size), corner_violations, reason)


# ==========================
# Corner data
# ==========================


def _corner_samples(field_: PressureField, corner: str) -> tuple:
    """Interface samples ordered away from the chosen corner, the corner node excluded."""
    trace = field_.interface_trace()
    index = {"A0": 0, "A1": 1}[corner]
    centre = field_.domain.spec.corners[index]
    order = np.arange(trace.points.shape[0])
    if index == 1:
        order = order[::-1]
    order = order[1:]
    offset = trace.points[order] - centre
    r = np.linalg.norm(offset, axis=1)
    radial = offset / r[:, None]
    return order, r, radial, trace


def richardson_limit(r, values, base: float) -> float:
    """Value at r = 0 of the quadratic through the samples at base, 2 base and 4 base."""
    log_r = np.log(r)
    f1, f2, f4 = (np.interp(math.log(scale * base), log_r, values) for scale in (1.0, 2.0, 4.0))
    return 8.0 / 3.0 * f1 - 2.0 * f2 + f4 / 3.0


def extract_alpha(field_: PressureField, corner: str, spread_tol: float = 0.10) -> float:
    """alpha_i = (dW1/dr_i) / (dW1/dn) at the contact point, r_i the outward radius.

    The ratio along the interface is extrapolated to the corner by Richardson
    steps over the ladders (rho, 2 rho, 4 rho), rho running over three base
    radii of the resolved band, which starts at the third interface sample;
    the middle estimate is returned.

    Raises:
        DerivativeUnresolved: If the normal derivative vanishes, the band is too
            short or the estimates disagree by more than spread_tol.
    """
    order, r, radial, trace = _corner_samples(field_, corner)
    grad = trace.grad1[order]
    dn = np.sum(grad * trace.normal[order], axis=1)
    dr = np.sum(grad * radial, axis=1)
    band = slice(RESOLVED_SKIP, None)
    r, dn, dr = r[band], dn[band], dr[band]
    keep = r <= 4.0 * field_.domain.spec.eps
    r, dn, dr = r[keep], dn[keep], dr[keep]
    if r.size < 4 or 4.0 * RICHARDSON_BASES[-1] * r[0] > r[-1]:
        raise DerivativeUnresolved(f"only {r.size} resolved interface samples near {corner}")
    if np.any(np.abs(dn) < 1e-14 * max(np.max(np.abs(grad)), 1e-300)):
        raise DerivativeUnresolved(f"normal derivative vanishes near {corner}")
    ratio = dr / dn
    estimates = [richardson_limit(r, ratio, factor * r[0]) for factor in RICHARDSON_BASES]
    alpha = float(estimates[1])
    spread = (max(estimates) - min(estimates)) / max(1.0, abs(alpha))
    logger.info("alpha at %s = %.6g (Richardson spread %.3g).", corner, alpha, spread)
    if spread > spread_tol:
        raise DerivativeUnresolved(
            f"alpha at {corner} unresolved: Richardson values {estimates} spread {spread:.3g}"
        )
    return alpha


@dataclass
class CornerFit:
    """Power law |v| ~ prefactor * r**exponent fitted over a window of radii."""

    exponent: float
    prefactor: float
    fit_window: tuple
    quality: float
    samples: int = 0

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "fit_window": list(self.fit_window),
            "quality": self.quality,
            "samples": self.samples,
        }


def corner_exponent_fit(
    r, values, decade: tuple, min_samples: int = MIN_FIT_SAMPLES, noise_floor: float = 1e-13
) -> CornerFit:
    """Least-squares slope of log|v| against log r over the window decade.

    Raises:
        InsufficientDecayData: With fewer than min_samples radii in the window,
            or when the values reach the noise floor.
    """
    r = np.asarray(r, dtype=float)
    values = np.asarray(values, dtype=float)
    r_min, r_max = decade
    keep = (r >= r_min) & (r <= r_max) & np.isfinite(values)
    r, values = r[keep], values[keep]
    if r.size < min_samples or np.unique(r).size < min_samples:
        raise InsufficientDecayData(
            f"{r.size} samples in [{r_min:.3g}, {r_max:.3g}], need {min_samples}"
        )
    magnitude = np.abs(values)
    if np.any(magnitude <= noise_floor * max(np.max(magnitude), 1e-300)) or np.max(magnitude) == 0:
        raise InsufficientDecayData("values reach the solver noise floor")
    x, y = np.log(r), np.log(magnitude)
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    total = np.sum((y - np.mean(y)) ** 2)
    quality = 1.0 if total == 0 else float(max(0.0, 1.0 - np.sum((y - fitted) ** 2) / total))
    sign = 1.0 if np.median(values) >= 0 else -1.0
    return CornerFit(float(slope), sign * math.exp(intercept), (r_min, r_max), quality, int(r.size))


def field_corner_fit(
    field_: PressureField, corner: str, decade: tuple, phase: int = 1, bins: int = 10
) -> CornerFit:
    """Corner exponent of a nodal field from the maximum of |W| in log-spaced radial bins."""
    centre = field_.domain.spec.corners[{"A0": 0, "A1": 1}[corner]]
    nodes = field_.mesh.phase_nodes(phase)
    r = np.linalg.norm(field_.mesh.nodes[nodes] - centre, axis=1)
    values = np.abs(field_.values(phase)[nodes])
    edges = np.geomspace(decade[0], decade[1], bins + 1)
    radii, peaks = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        inside = (r >= lo) & (r < hi)
        if np.any(inside):
            best = np.argmax(values[inside])
            radii.append(r[inside][best])
            peaks.append(values[inside][best])
    return corner_exponent_fit(radii, peaks, decade, min_samples=min(MIN_FIT_SAMPLES, bins))


# ==========================
# Linearized coefficients
# ==========================


@dataclass
class LinearizedCoefficients:
    """Samples of A0..A3 on the interior interface nodes."""

    omega: np.ndarray
    points: np.ndarray
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    seam_mismatch: dict
    seam_ok: bool
    corner_fit: Optional[CornerFit] = None
    corner_fit_error: str = ""

    def to_dict(self) -> dict:
        return {
            "A0_max": float(np.max(self.A0)),
            "A1_min": float(np.min(self.A1)),
            "seam_mismatch": self.seam_mismatch,
            "seam_ok": self.seam_ok,
            "corner_fit": None if self.corner_fit is None else self.corner_fit.to_dict(),
            "corner_fit_error": self.corner_fit_error,
        }


def _coefficient_forms(domain: Domain, k1: float, k2: float, omega, grad, normal) -> dict:
    """(general, near, away) forms of A0..A3 at interface points given by omega.

    The general forms of A0..A2 come from the metric coefficients S and S1 of
    the chart; near a contact point they reduce to the expressions in the
    slope phi' = 1/g' of the interface seen as a graph over the axis, and
    beyond 2 eps to the flat-chart ones. A3 is the blend of its two branches
    between eps and 2 eps. A2 and A3 are written in the orientation of the
    nearer contact point.
    """
    spec, chart = domain.spec, domain.chart
    k = k2 / k1
    ratio = k2 / (1.0 - k)
    dn = np.sum(grad * normal, axis=1)
    points = chart.m(omega)
    r0 = np.linalg.norm(points - spec.corners[0], axis=1)
    r1 = np.linalg.norm(points - spec.corners[1], axis=1)
    near0 = r0 <= r1
    side = np.where(near0, 1.0, -1.0)
    weight = smoothstep((np.minimum(r0, r1) - spec.eps) / spec.eps)

    S, S1 = metric_coeffs(omega, 0.0, 0.0, chart)
    # the near-corner branch only matters where weight < 1, away from g' = 0
    slope = np.where(weight < 1.0, domain.profile.slope(points[:, 1]), 1.0)
    phi_slope = 1.0 / slope
    root = np.sqrt(1.0 + phi_slope**2)

    e_r0 = (points - spec.corners[0]) / r0[:, None]
    e_r1 = (points - spec.corners[1]) / r1[:, None]
    h = 1e-6
    _, s1_plus = metric_coeffs(omega, 0.0, h, chart)
    _, s1_minus = metric_coeffs(omega, 0.0, -h, chart)
    ds1 = (s1_plus - s1_minus) / (2.0 * h)
    tangent = np.column_stack([-normal[:, 1], normal[:, 0]])
    d_omega = np.sum(grad * tangent, axis=1)
    a3_near = np.where(near0, np.sum(grad * e_r0, axis=1), -np.sum(grad * e_r1, axis=1)) / dn
    a3_away = ds1 * d_omega / ((k - 1.0) * dn)

    return {
        "A0": ((1.0 - k) / k * dn / np.sqrt(S), (1.0 - k) / k * dn / root, (1.0 - k) / k * dn),
        "A1": (ratio * np.sqrt(S), ratio * root, np.full_like(dn, ratio)),
        "A2": (ratio * S1 * side, ratio * phi_slope * root * side, np.zeros_like(dn)),
        "A3": ((1.0 - weight) * a3_near + weight * a3_away, a3_near, a3_away),
    }


def _seam_omega(chart, corner: int, radius: float) -> float:
    """omega of the interface point at the given distance from A0 or A1."""
    centre = chart.spec.corners[corner]

    def distance(omega):
        return float(np.linalg.norm(chart.m(omega)[0] - centre)) - radius

    half = 0.5 * chart.length
    lo, hi = (0.0, half) if corner == 0 else (half, chart.length)
    return brentq(distance, lo, hi, xtol=1e-14 * chart.length)


def seam_mismatch(field_: PressureField, omega, grad, normal) -> dict:
    """Largest gap between the general forms and the branch forms at r = eps and 2 eps.

    Gaps are relative to the largest magnitude of the coefficient over the
    samples within 2 eps of the contact point.
    """
    domain = field_.domain
    spec, chart = domain.spec, domain.chart
    samples = _coefficient_forms(domain, field_.k1, field_.k2, omega, grad, normal)
    points = chart.m(omega)
    seams = []
    for corner in (0, 1):
        near = np.linalg.norm(points - spec.corners[corner], axis=1) <= 2.0 * spec.eps
        for radius, branch in ((spec.eps, 1), (2.0 * spec.eps, 2)):
            seam = _seam_omega(chart, corner, radius)
            seams.append((near, np.array([seam]), branch))
    mismatch = {}
    for name in samples:
        worst = 0.0
        for near, seam, branch in seams:
            seam_grad = np.column_stack([np.interp(seam, omega, grad[:, i]) for i in range(2)])
            seam_normal = chart.normal(seam)
            forms = _coefficient_forms(domain, field_.k1, field_.k2, seam, seam_grad, seam_normal)[name]
            scale = max(float(np.max(np.abs(samples[name][0][near]), initial=0.0)), 1e-300)
            worst = max(worst, float(abs(forms[0][0] - forms[branch][0])) / scale)
        mismatch[name] = worst
    return mismatch


def linearized_coeffs(
    field_: PressureField, seam_tol: float = 0.05, decade: Optional[tuple] = None
) -> LinearizedCoefficients:
    """Coefficients A0..A3 of the linearized kinematic condition along the interface.

    The samples are the general forms; the seam check compares them with the
    near-corner closed forms at r = eps and with the flat-chart forms at
    r = 2 eps.
    """
    domain = field_.domain
    spec = domain.spec
    trace = field_.interface_trace()
    interior = slice(1, -1)
    omega = trace.omega[interior]
    points = trace.points[interior]
    grad = trace.grad1[interior]
    normal = trace.normal[interior]
    if np.any(np.sum(grad * normal, axis=1) == 0):
        raise DerivativeUnresolved("normal derivative vanishes on the interface")

    forms = _coefficient_forms(domain, field_.k1, field_.k2, omega, grad, normal)
    general = {name: values[0] for name, values in forms.items()}
    mismatch = seam_mismatch(field_, omega, grad, normal)
    seam_ok = all(value <= seam_tol for value in mismatch.values())
    if not seam_ok:
        logger.warning("Seam mismatch of the linearized coefficients: %s.", mismatch)

    r0 = np.linalg.norm(points - spec.corners[0], axis=1)
    r1 = np.linalg.norm(points - spec.corners[1], axis=1)
    near0 = r0 <= r1
    decade = decade or (0.1 * spec.eps, spec.eps)
    corner_fit, error = None, ""
    try:
        corner_fit = corner_exponent_fit(r0[near0], general["A0"][near0], decade)
    except InsufficientDecayData as e:
        error = str(e)
        logger.info("No corner fit of A0: %s.", error)

    if np.any(general["A0"] >= 0) or np.any(general["A1"] <= 0):
        logger.warning("A0 < 0 < A1 fails at some interface samples.")
    return LinearizedCoefficients(
        omega=omega,
        points=points,
        seam_mismatch=mismatch,
        seam_ok=seam_ok,
        corner_fit=corner_fit,
        corner_fit_error=error,
        **general,
    )


# ==========================
# Verification helpers
# ==========================


def flux_jump_residual(field_: PressureField, flux_jump=None) -> float:
    """Trapezoidal integral of |k1 dW1/dn - k2 dW2/dn - phi2| along the interface."""
    trace = field_.interface_trace()
    target = _evaluate(flux_jump, trace.points, trace.normal)
    mismatch = np.abs(field_.k1 * trace.dn1 - field_.k2 * trace.dn2 - target)
    lengths = np.linalg.norm(np.diff(trace.points, axis=0), axis=1)
    return float(np.sum(0.5 * lengths * (mismatch[:-1] + mismatch[1:])))


def l2_error(field_: PressureField, exact1, exact2) -> float:
    """L2 distance to the exact phase solutions by the edge-midpoint rule."""
    mesh = field_.mesh
    total = 0.0
    for phase, exact in ((1, exact1), (2, exact2)):
        mask = mesh.phase == phase
        tris = mesh.triangles[mask]
        area = mesh.areas()[mask]
        nodal = field_.values(phase)[tris]
        p = mesh.nodes[tris]
        for a, b in ((0, 1), (1, 2), (0, 2)):
            mid = 0.5 * (p[:, a] + p[:, b])
            discrete = 0.5 * (nodal[:, a] + nodal[:, b])
            total += float(np.sum(area / 3.0 * (discrete - exact(mid)) ** 2))
    return math.sqrt(total)


def max_principle_check(field_: PressureField, data_values, tol: float = 1e-10) -> tuple:
    """Return (passed, min, max) for the nodal values against the range of the data."""
    data_values = np.asarray(data_values, dtype=float)
    low, high = float(np.min(data_values)), float(np.max(data_values))
    mesh = field_.mesh
    values = np.concatenate(
        [field_.values(1)[mesh.phase_nodes(1)], field_.values(2)[mesh.phase_nodes(2)]]
    )
    scale = tol * max(1.0, abs(low), abs(high))
    vmin, vmax = float(np.min(values)), float(np.max(values))
    return (low - scale <= vmin and vmax <= high + scale), vmin, vmax
