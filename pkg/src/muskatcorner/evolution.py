"""Time stepping of the interface displacement on the fixed initial domain.

The interface at time t is y = m(omega) + s(omega, t) l(omega). The pressures
are re-solved on the initial mesh with the operator pulled back through the
Hanzawa map; an analytic background is carried along as W o H and only its
finite element correction is solved for. s moves by the kinematic law

    ds/dt = -k1 [S dU1/dlambda + S1 dU1/domega],

which equals the same expression with k2 and U2.
"""

# Standard library imports
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Optional

# Related third-party imports
import numpy as np

# Local application/library specific imports
from .elliptic import (
    PressureField,
    PhysicsSpec,
    TransmissionProblem,
    corner_exponent_fit,
    correction_problem,
    element_coefficients,
    solve_transmission,
)
from .errors import InsufficientDecayData, TubeViolation
from .geometry import (
    ChartPoints,
    DisplacementField,
    Domain,
    check_tube,
    hanzawa_forward,
    jacobian,
    metric_coeffs,
)
from .weights import WeightWindow


logger = logging.getLogger(__name__)

SCHEMES = {"euler": 1, "heun": 2}
EXPONENT_SLACK = 0.3
ANGLE_TOL = 1e-2
NOISE_FACTOR = 10.0


@dataclass(frozen=True)
class TimeSpec:
    """Controls of the time loop.

    Attributes:
        t_end (float): Final time.
        dt (float): Requested step; capped by the tube-safety limit.
        scheme (str): "euler" or "heun".
        output_every (int): Keep every n-th state in the trajectory.
        max_steps (int): Hard limit on the number of steps.
    """

    t_end: float = 0.01
    dt: float = 0.002
    scheme: str = "euler"
    output_every: int = 1
    max_steps: int = 200

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown time scheme {self.scheme!r}")


@dataclass(frozen=True)
class InterfaceState:
    """Snapshot of the displacement on the omega grid of the interface nodes."""

    t: float
    omega: np.ndarray
    s_values: np.ndarray
    s_deriv: np.ndarray
    tube_margin: float
    s_t: Optional[np.ndarray] = None

    @property
    def displacement(self) -> DisplacementField:
        return DisplacementField(self.omega, self.s_values)


@dataclass(frozen=True)
class StepDiagnostics:
    branch_residual: float
    corner_velocity: tuple
    dt_used: float
    error_estimate: float = 0.0
    tube_margin: float = math.inf
    roughness: float = 0.0
    noise: float = 0.0

    def to_dict(self) -> dict:
        return {
            "branch_residual": self.branch_residual,
            "corner_velocity": list(self.corner_velocity),
            "dt_used": self.dt_used,
            "error_estimate": self.error_estimate,
            "tube_margin": self.tube_margin,
            "roughness": self.roughness,
            "noise": self.noise,
        }


@dataclass
class Velocity:
    """Both branches of ds/dt on the omega grid and the share of the finite element correction."""

    omega: np.ndarray
    k1_branch: np.ndarray
    k2_branch: np.ndarray
    correction: Optional[np.ndarray] = None

    @property
    def correction_sup(self) -> float:
        source = self.k1_branch if self.correction is None else self.correction
        return float(np.max(np.abs(source))) if source.size else 0.0

    @property
    def branch_residual(self) -> float:
        diff = np.abs(self.k1_branch - self.k2_branch)[1:-1]
        return float(np.max(diff)) if diff.size else 0.0

    @property
    def corner_velocity(self) -> tuple:
        return float(self.k1_branch[0]), float(self.k1_branch[-1])


def _branches(field_: PressureField, s_field: DisplacementField) -> Velocity:
    domain = field_.domain
    chart = domain.chart
    trace = field_.interface_trace()
    omega = trace.omega
    S, S1 = metric_coeffs(omega, s_field(omega), s_field.derivative(omega), chart)
    l_vec = chart.transversal(omega)
    tangent = chart.tangent(omega)

    def branch(k_i, grad):
        return -k_i * (S * np.sum(grad * l_vec, axis=1) + S1 * np.sum(grad * tangent, axis=1))

    correction = None
    if trace.background1 is not None:
        correction = branch(field_.k1, trace.correction(1))
    return Velocity(
        omega=omega,
        k1_branch=branch(field_.k1, trace.grad1),
        k2_branch=branch(field_.k2, trace.grad2),
        correction=correction,
    )


def initial_velocity(field_: PressureField) -> Velocity:
    """ds/dt at t = 0 from the initial pressures, both branches."""
    velocity = _branches(field_, DisplacementField.zero(field_.domain.chart))
    scale = float(np.max(np.abs(velocity.k1_branch)))
    logger.info(
        "Initial velocity: sup %.6g, branch residual %.3g.", scale, velocity.branch_residual
    )
    return velocity


def rho(omega, t: float, v0: Velocity) -> np.ndarray:
    """First-order displacement t * ds/dt(omega, 0)."""
    return t * np.interp(omega, v0.omega, v0.k1_branch)


def roughness(s_values) -> float:
    """Second-difference energy of s over 16 times its energy, in [0, 1]."""
    s_values = np.asarray(s_values, dtype=float)
    if s_values.size < 3:
        return 0.0
    energy = float(np.sum(s_values**2))
    if energy == 0:
        return 0.0
    second = s_values[2:] - 2.0 * s_values[1:-1] + s_values[:-2]
    return float(np.sum(second**2) / (16.0 * energy))


# ==========================
# Moving-interface solver
# ==========================


def _moved(p, forward):
    return lambda points: p(forward(points))


class TransportedBackground:
    """Analytic pressure carried along the Hanzawa map, W o H, on the fixed mesh.

    Args:
        base: Pressure with value(phase, points) and gradient(phase, points).
        s_field (DisplacementField): The displacement defining H.
        chart (InterfaceChart): Chart of the initial interface.
        frames (dict, optional): Shared cache of ChartPoints keyed by the point bytes.
    """

    def __init__(self, base, s_field: DisplacementField, chart, frames: Optional[dict] = None):
        self.base = base
        self.s_field = s_field
        self.chart = chart
        self.frames = {} if frames is None else frames
        self._maps = {}

    def _map(self, points) -> tuple:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        key = points.tobytes()
        if key not in self._maps:
            frame = self.frames.get(key)
            if frame is None:
                frame = self.frames[key] = ChartPoints(points, self.chart)
            self._maps[key] = (
                hanzawa_forward(points, self.s_field, self.chart, frame),
                jacobian(points, self.s_field, self.chart, frame),
            )
        return self._maps[key]

    def forward(self, points) -> np.ndarray:
        return self._map(points)[0]

    def value(self, phase: int, points) -> np.ndarray:
        return self.base.value(phase, self.forward(points))

    def gradient(self, phase: int, points) -> np.ndarray:
        moved, matrices = self._map(points)
        return np.einsum("nji,nj->ni", matrices, self.base.gradient(phase, moved))

    def flux_vector(self, phase: int, points) -> np.ndarray:
        """det(J) J^-1 grad W(H), the pulled-back flux over the mobility."""
        moved, matrices = self._map(points)
        grad = self.base.gradient(phase, moved)
        det = np.linalg.det(matrices)
        return det[:, None] * np.linalg.solve(matrices, grad[:, :, None])[:, :, 0]


class InterfaceEvolution:
    """Pressure solves and kinematic velocities for a given displacement.

    Chart coordinates of the mesh centroids are computed once; the mesh
    itself never moves. With a background only its finite element
    correction is solved for, and correction_peak holds the largest
    correction share of the velocity since the last reset.
    """

    def __init__(self, domain: Domain, physics: PhysicsSpec, p1, p2, background=None):
        self.domain = domain
        self.physics = physics
        self.p1 = p1
        self.p2 = p2
        self.background = background
        self.frames = {}
        self.correction_peak = 0.0
        self.logger = logging.getLogger(__name__)
        mesh = domain.mesh
        centroids = mesh.nodes[mesh.triangles].mean(axis=1)
        self.centroid_frame = ChartPoints(centroids, domain.chart)
        self.base_coefficients = element_coefficients(mesh, physics.k1, physics.k2)
        self.omega = domain.interface_omega
        self.solves = 0

    def coefficients(self, s_field: DisplacementField) -> np.ndarray:
        """Per-element tensors k det(J) J^-1 J^-T of the pulled-back operator."""
        frame = self.centroid_frame
        matrices = jacobian(frame.points, s_field, self.domain.chart, frame)
        inverse = np.linalg.inv(matrices)
        det = np.linalg.det(matrices)
        if np.any(det <= 0):
            raise TubeViolation("Hanzawa map is not orientation preserving")
        tensors = np.einsum("nij,nkj->nik", inverse, inverse) * det[:, None, None]
        return tensors * self.base_coefficients[:, None, None]

    def pressure(self, s_field: DisplacementField) -> PressureField:
        physics = self.physics
        coefficients = None if s_field.sup() == 0 else self.coefficients(s_field)
        self.solves += 1
        if self.background is None:
            if coefficients is None:
                problem = TransmissionProblem(
                    k1=physics.k1, k2=physics.k2, dirichlet1=self.p1, dirichlet2=self.p2
                )
                return solve_transmission(problem, self.domain)
            chart = self.domain.chart
            forward = partial(hanzawa_forward, s_field=s_field, chart=chart)
            problem = TransmissionProblem(
                k1=physics.k1,
                k2=physics.k2,
                dirichlet1=_moved(self.p1, forward),
                dirichlet2=_moved(self.p2, forward),
            )
            return solve_transmission(problem, self.domain, coefficients=coefficients)

        background = self.background
        p1, p2 = self.p1, self.p2
        if coefficients is not None:
            background = TransportedBackground(self.background, s_field, self.domain.chart, self.frames)
            p1, p2 = _moved(p1, background.forward), _moved(p2, background.forward)
        problem = correction_problem(background, p1, p2, physics.k1, physics.k2)
        return solve_transmission(problem, self.domain, coefficients=coefficients, background=background)

    def velocity(self, s_values) -> Velocity:
        s_field = DisplacementField(self.omega, s_values)
        check_tube(s_field, self.domain.chart)
        velocity = _branches(self.pressure(s_field), s_field)
        self.correction_peak = max(self.correction_peak, velocity.correction_sup)
        return velocity

    def state(self, t: float, s_values, s_t=None) -> InterfaceState:
        s_field = DisplacementField(self.omega, s_values)
        margin = check_tube(s_field, self.domain.chart)
        return InterfaceState(
            t=t,
            omega=self.omega,
            s_values=np.asarray(s_values, dtype=float),
            s_deriv=s_field.derivative(self.omega),
            tube_margin=margin,
            s_t=s_t,
        )

    def initial_state(self) -> InterfaceState:
        return self.state(0.0, np.zeros_like(self.omega))


def _advance(evolution: InterfaceEvolution, s_values, dt, scheme, start: Velocity):
    first = start.k1_branch
    if scheme == "euler":
        return s_values + dt * first
    second = evolution.velocity(s_values + dt * first).k1_branch
    return s_values + 0.5 * dt * (first + second)


def step(
    state: InterfaceState, evolution: InterfaceEvolution, dt: float, scheme: str = "euler"
) -> tuple:
    """Advance the displacement by one step with step-doubling error control.

    The returned state is the result of two half steps; the difference to the
    single full step, divided by 2**order - 1, is the local error estimate.

    Raises:
        TubeViolation: If the new displacement reaches b0/4.
    """
    order = SCHEMES[scheme]
    evolution.correction_peak = 0.0
    start = evolution.velocity(state.s_values)
    sup = float(np.max(np.abs(start.k1_branch)))
    dt_max = 0.25 * evolution.domain.chart.b0 / sup if sup > 0 else math.inf
    dt_used = min(dt, dt_max)
    if sup == 0:
        new_state = evolution.state(state.t + dt_used, state.s_values, start.k1_branch)
        return new_state, StepDiagnostics(
            start.branch_residual,
            start.corner_velocity,
            dt_used,
            tube_margin=new_state.tube_margin,
            noise=dt_used * evolution.correction_peak,
        )

    full = _advance(evolution, state.s_values, dt_used, scheme, start)
    half = _advance(evolution, state.s_values, 0.5 * dt_used, scheme, start)
    half = _advance(evolution, half, 0.5 * dt_used, scheme, evolution.velocity(half))
    error = float(np.max(np.abs(half - full))) / (2**order - 1)
    new_state = evolution.state(state.t + dt_used, half, start.k1_branch)
    diagnostics = StepDiagnostics(
        branch_residual=start.branch_residual,
        corner_velocity=start.corner_velocity,
        dt_used=dt_used,
        error_estimate=error,
        tube_margin=new_state.tube_margin,
        roughness=roughness(half),
        noise=dt_used * evolution.correction_peak,
    )
    return new_state, diagnostics


@dataclass
class Trajectory:
    """Emitted states, per-step diagnostics and the reason the loop stopped."""

    states: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    halted: str = ""
    ill_posed: bool = False

    @property
    def horizon(self) -> float:
        return self.states[-1].t if self.states else 0.0

    @property
    def noise_floor(self) -> float:
        """Bound on the corner displacement carried by the finite element correction."""
        return float(sum(d.noise for d in self.diagnostics))

    def to_dict(self) -> dict:
        residuals = [d.branch_residual for d in self.diagnostics]
        return {
            "states": len(self.states),
            "steps": len(self.diagnostics),
            "horizon": self.horizon,
            "halted": self.halted,
            "ill_posed": self.ill_posed,
            "max_branch_residual": max(residuals) if residuals else 0.0,
            "min_tube_margin": min((s.tube_margin for s in self.states), default=math.inf),
            "max_roughness": max((d.roughness for d in self.diagnostics), default=0.0),
            "noise_floor": self.noise_floor,
        }


def run(evolution: InterfaceEvolution, time_spec: TimeSpec, ill_posed: bool = False) -> Trajectory:
    """Step from s = 0 up to t_end, stopping early on a tube violation."""
    trajectory = Trajectory(ill_posed=ill_posed)
    state = evolution.initial_state()
    trajectory.states.append(state)
    steps = 0
    while state.t < time_spec.t_end - 1e-15 * max(1.0, time_spec.t_end):
        if steps >= time_spec.max_steps:
            trajectory.halted = f"step limit {time_spec.max_steps} reached"
            break
        dt = min(time_spec.dt, time_spec.t_end - state.t)
        try:
            state, diagnostics = step(state, evolution, dt, time_spec.scheme)
        except TubeViolation as e:
            trajectory.halted = str(e)
            logger.warning("Run halted at t=%.6g: %s.", trajectory.horizon, e)
            break
        steps += 1
        trajectory.diagnostics.append(diagnostics)
        if steps % time_spec.output_every == 0 or state.t >= time_spec.t_end:
            trajectory.states.append(state)
        logger.info(
            "Step %d: t=%.6g dt=%.3g error %.3g branch residual %.3g margin %.3g.",
            steps,
            state.t,
            diagnostics.dt_used,
            diagnostics.error_estimate,
            diagnostics.branch_residual,
            diagnostics.tube_margin,
        )
        if ill_posed and diagnostics.roughness > 0.1:
            logger.warning("Grid-scale oscillation of the interface, roughness %.3g.", diagnostics.roughness)
    if trajectory.states[-1] is not state:
        trajectory.states.append(state)
    return trajectory


# ==========================
# Waiting-time diagnostics
# ==========================


def _fit_or_reason(r, values, decade):
    try:
        return corner_exponent_fit(r, values, decade), ""
    except InsufficientDecayData as e:
        return None, str(e)


def _contact_angles(state: InterfaceState, domain: Domain) -> tuple:
    chart = domain.chart
    points = chart.m(state.omega) + state.s_values[:, None] * chart.transversal(state.omega)
    start = points[1] - points[0]
    end = points[-2] - points[-1]
    return math.atan2(start[0], start[1]), math.atan2(end[0], -end[1])


@dataclass
class WaitingTimeReport:
    corner_displacement: tuple
    fits: dict
    fit_errors: dict
    contact_angles: list
    angles_preserved: bool
    noise_floor: float = 0.0
    window: Optional[dict] = None
    s_low: Optional[float] = None
    verdicts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "corner_displacement": list(self.corner_displacement),
            "fits": {key: fit.to_dict() for key, fit in self.fits.items()},
            "fit_errors": self.fit_errors,
            "contact_angles": [list(angles) for angles in self.contact_angles],
            "angles_preserved": self.angles_preserved,
            "noise_floor": self.noise_floor,
            "window": self.window,
            "s_low": self.s_low,
            "verdicts": self.verdicts,
        }


def waiting_time_report(
    trajectory: Trajectory,
    domain: Domain,
    window: Optional[WeightWindow] = None,
    decade: Optional[tuple] = None,
    angle_tol: float = ANGLE_TOL,
) -> WaitingTimeReport:
    """Corner displacement, corner decay exponents and contact angles of a run.

    The decay exponents of |s| and |ds/dt| at the last state are compared with
    s_low + 1, s_low the lower end of the weight window; an empty window gives
    the exponents without a verdict. The corner displacement passes when it
    stays within NOISE_FACTOR times the noise floor of the run.
    """
    states = trajectory.states
    if len(states) < 3:
        raise ValueError(f"waiting-time report needs at least 3 states, got {len(states)}")
    spec = domain.spec
    last = states[-1]
    displacement = (
        max(abs(float(s.s_values[0])) for s in states),
        max(abs(float(s.s_values[-1])) for s in states),
    )
    decade = decade or (0.1 * spec.eps, spec.eps)
    points = domain.chart.m(last.omega)
    distances = {
        "A0": np.linalg.norm(points - spec.corners[0], axis=1),
        "A1": np.linalg.norm(points - spec.corners[1], axis=1),
    }
    fits, errors = {}, {}
    series = {"s": last.s_values}
    if last.s_t is not None:
        series["s_t"] = last.s_t
    for corner, r in distances.items():
        for name, values in series.items():
            fit, reason = _fit_or_reason(r, values, decade)
            key = f"{name}_{corner}"
            if fit is None:
                errors[key] = reason
            else:
                fits[key] = fit

    angles = [_contact_angles(state, domain) for state in states]
    preserved = all(
        abs(a0 - spec.delta0) <= angle_tol and abs(a1 - spec.delta1) <= angle_tol for a0, a1 in angles
    )

    report = WaitingTimeReport(
        corner_displacement=displacement,
        fits=fits,
        fit_errors=errors,
        contact_angles=angles,
        angles_preserved=preserved,
        noise_floor=trajectory.noise_floor,
    )
    report.verdicts["corner_displacement"] = bool(max(displacement) <= NOISE_FACTOR * report.noise_floor)
    if window is not None:
        report.window = window.to_dict()
        if window.empty:
            report.verdicts["window"] = "window empty"
        else:
            low = float(window.lower)
            report.s_low = low - 2.0 if window.variable == "s+2" else low
            for key, fit in fits.items():
                report.verdicts[key] = bool(fit.exponent >= report.s_low + 1.0 - EXPONENT_SLACK)
    logger.info(
        "Waiting time: corner displacement %s (noise floor %.3g), angles preserved %s.",
        displacement,
        report.noise_floor,
        preserved,
    )
    return report
