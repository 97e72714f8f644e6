# Standard library imports
import math

# Related third-party imports
import numpy as np
import pytest

# Local application/library specific imports
from muskatcorner.elliptic import PhysicsSpec, default_pressure_data, solve_initial_pressure
from muskatcorner.errors import TubeViolation
from muskatcorner.evolution import (
    InterfaceEvolution,
    InterfaceState,
    TimeSpec,
    Trajectory,
    initial_velocity,
    rho,
    roughness,
    run,
    step,
    waiting_time_report,
)
from muskatcorner.geometry import DomainSpec, MeshSpec, build_domain
from muskatcorner.weights import h7_window


@pytest.fixture(scope="module")
def domain():
    return build_domain(DomainSpec(), MeshSpec(rows=8, inner_columns=4, outer_columns=8))


@pytest.fixture(scope="module")
def physics():
    return PhysicsSpec()


@pytest.fixture(scope="module")
def background(physics):
    return default_pressure_data(DomainSpec(), physics, s_star=3.5)


@pytest.fixture(scope="module")
def evolution(domain, physics, background):
    return InterfaceEvolution(domain, physics, *background.traces(), background=background)


@pytest.fixture(scope="module")
def v0(domain, physics, background):
    p1, p2 = background.traces()
    return initial_velocity(
        solve_initial_pressure(domain, p1, p2, physics.k1, physics.k2, background=background)
    )


@pytest.fixture(scope="module")
def safe_dt(domain, v0):
    """A tenth of the tube-safety step at t = 0."""
    return 0.025 * domain.chart.b0 / float(np.max(np.abs(v0.k1_branch)))


def test_unknown_scheme():
    with pytest.raises(ValueError, match="unknown time scheme"):
        TimeSpec(scheme="rk4")


@pytest.mark.parametrize(
    "values, expected",
    [
        (np.zeros(10), 0.0),
        (np.full(10, 2.5), 0.0),
        (np.array([1.0, -1.0] * 5), 0.8),
        (np.array([1.0, 2.0]), 0.0),
    ],
)
def test_roughness(values, expected):
    assert roughness(values) == pytest.approx(expected)


def test_rho_is_linear_in_time(v0):
    omega = v0.omega
    assert np.allclose(rho(omega, 0.0, v0), 0.0)
    assert np.allclose(rho(omega, 2e-3, v0), 2.0 * rho(omega, 1e-3, v0))
    assert np.allclose(rho(omega, 1e-3, v0), 1e-3 * v0.k1_branch)


def test_initial_velocity_branches_agree(v0):
    scale = float(np.max(np.abs(v0.k1_branch)))
    assert scale > 0
    assert v0.branch_residual < 0.02 * scale
    assert np.allclose(v0.corner_velocity, 0.0, atol=1e-8 * scale)
    assert v0.correction_sup < 1e-8 * scale


def test_branch_residual_shrinks_under_refinement(physics):
    spec = DomainSpec(delta1=math.pi / 8)
    background = default_pressure_data(spec, physics, s_star=3.5)
    p1, p2 = background.traces()
    ratios = []
    for factor in (1, 2):
        mesh_spec = MeshSpec(rows=8 * factor, inner_columns=4 * factor, outer_columns=8 * factor)
        field_ = solve_initial_pressure(
            build_domain(spec, mesh_spec), p1, p2, physics.k1, physics.k2, background=background
        )
        velocity = initial_velocity(field_)
        assert velocity.correction_sup > 0.0
        ratios.append(velocity.branch_residual / float(np.max(np.abs(velocity.k1_branch))))
    assert ratios[1] < 0.75 * ratios[0]


def test_constant_pressures_do_not_move_interface(domain, physics):
    constant = InterfaceEvolution(domain, physics, lambda p: 1.0, lambda p: 1.0)
    velocity = constant.velocity(np.zeros_like(constant.omega))
    assert np.max(np.abs(velocity.k1_branch)) < 1e-10
    state, diagnostics = step(constant.initial_state(), constant, 1e-3)
    assert np.allclose(state.s_values, 0.0, atol=1e-12)
    assert state.t == pytest.approx(1e-3)
    assert diagnostics.error_estimate < 1e-12


def test_first_step_follows_rho(evolution, v0, safe_dt):
    gaps = []
    for dt in (safe_dt, 0.5 * safe_dt):
        state, diagnostics = step(evolution.initial_state(), evolution, dt, "euler")
        assert diagnostics.dt_used == pytest.approx(dt)
        gaps.append(float(np.max(np.abs(state.s_values - rho(state.omega, dt, v0)))))
    assert gaps[1] <= 0.35 * gaps[0]


def test_step_reports_diagnostics(evolution, safe_dt):
    state, diagnostics = step(evolution.initial_state(), evolution, safe_dt, "heun")
    assert state.t == pytest.approx(diagnostics.dt_used)
    assert diagnostics.tube_margin == pytest.approx(state.tube_margin)
    assert state.s_t is not None
    assert set(diagnostics.to_dict()) == {
        "branch_residual",
        "corner_velocity",
        "dt_used",
        "error_estimate",
        "tube_margin",
        "roughness",
        "noise",
    }


def test_run_reaches_end_time(evolution, safe_dt):
    trajectory = run(evolution, TimeSpec(t_end=2.0 * safe_dt, dt=safe_dt))
    assert trajectory.halted == ""
    assert trajectory.horizon == pytest.approx(2.0 * safe_dt)
    assert len(trajectory.states) == 3
    assert trajectory.to_dict()["steps"] == 2


def test_run_halts_on_tube_violation(evolution, mocker):
    mocker.patch("muskatcorner.evolution.step", side_effect=TubeViolation("tube violation: test"))
    trajectory = run(evolution, TimeSpec(t_end=1e-3, dt=1e-4), ill_posed=True)
    assert "tube violation" in trajectory.halted
    assert len(trajectory.states) == 1
    assert trajectory.ill_posed


def test_run_respects_step_limit(evolution, safe_dt):
    trajectory = run(evolution, TimeSpec(t_end=1.0, dt=safe_dt, max_steps=1))
    assert trajectory.halted == "step limit 1 reached"


def _synthetic_trajectory(domain, exponent):
    chart = domain.chart
    omega = np.linspace(0.0, chart.length, 2001)
    r0 = np.linalg.norm(chart.m(omega), axis=1)
    states = [
        InterfaceState(
            t=t,
            omega=omega,
            s_values=t * 1e-6 * r0**exponent,
            s_deriv=np.zeros_like(omega),
            tube_margin=1.0,
        )
        for t in (0.0, 0.5, 1.0)
    ]
    return Trajectory(states=states)


def test_waiting_time_exponent(domain):
    trajectory = _synthetic_trajectory(domain, 3.2)
    window = h7_window(math.pi / 6, math.pi / 6, -math.inf, -math.inf)
    report = waiting_time_report(trajectory, domain, window)
    assert report.fits["s_A0"].exponent == pytest.approx(3.2, abs=1e-6)
    assert report.s_low == pytest.approx(0.0)
    assert report.verdicts["s_A0"] is True
    assert report.corner_displacement[0] == 0.0
    assert report.angles_preserved
    assert report.to_dict()["window"]["case_tag"] == window.case_tag


def test_waiting_time_empty_window(domain):
    trajectory = _synthetic_trajectory(domain, 3.2)
    window = h7_window(math.pi / 6, math.pi / 6, 3.5, 2.0)
    report = waiting_time_report(trajectory, domain, window)
    assert report.verdicts["window"] == "window empty"
    assert set(report.verdicts) == {"window", "corner_displacement"}
    assert "s_A0" in report.fits


def test_waiting_time_needs_three_states(domain):
    trajectory = _synthetic_trajectory(domain, 3.2)
    trajectory.states = trajectory.states[:2]
    with pytest.raises(ValueError, match="at least 3 states"):
        waiting_time_report(trajectory, domain)


def test_short_run_on_default_mesh_keeps_corners(physics, background):
    domain = build_domain(DomainSpec(), MeshSpec())
    evolution = InterfaceEvolution(domain, physics, *background.traces(), background=background)
    trajectory = run(evolution, TimeSpec(t_end=2e-10, dt=1e-10, scheme="euler"))
    assert trajectory.halted == ""
    assert len(trajectory.states) == 3
    assert trajectory.noise_floor == pytest.approx(sum(d.noise for d in trajectory.diagnostics))
    assert trajectory.to_dict()["noise_floor"] == trajectory.noise_floor

    report = waiting_time_report(trajectory, domain)
    assert report.verdicts["corner_displacement"] is True
    assert max(report.corner_displacement) <= 10.0 * report.noise_floor
    assert report.angles_preserved
    assert "s_t_A0" in report.fits, report.fit_errors
    assert report.fits["s_t_A0"].exponent >= 2.2
    assert report.fits["s_A0"].exponent >= 2.2

    last = trajectory.diagnostics[-1]
    scale = float(np.max(np.abs(trajectory.states[-1].s_t)))
    assert last.branch_residual < 0.02 * scale
    assert last.noise >= 0.0
