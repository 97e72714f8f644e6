# Standard library imports
import math

# Related third-party imports
import numpy as np
import pytest
from scipy.integrate import quad

# Local application/library specific imports
from muskatcorner.errors import GeometryError, TubeViolation
from muskatcorner.geometry import (
    TAG_CORNER,
    TAG_GAMMA1,
    TAG_GAMMA2,
    TAG_INTERFACE,
    DisplacementField,
    DomainSpec,
    InterfaceProfile,
    MeshSpec,
    build_domain,
    check_tube,
    corner_distance,
    hanzawa_forward,
    hanzawa_inverse,
    interface_angles,
    jacobian,
    log_polar,
    log_polar_inverse,
    metric_coeffs,
    outer_boundary,
    validate_domain,
    weighted_sup_norm,
)


@pytest.fixture(scope="module")
def domain():
    return build_domain(DomainSpec(), MeshSpec())


@pytest.fixture(scope="module")
def skewed_domain():
    spec = DomainSpec(delta0=math.pi / 6, delta1=math.pi / 8)
    return build_domain(spec, MeshSpec(rows=8, inner_columns=4, outer_columns=8))


def test_default_domain_is_valid():
    assert validate_domain(DomainSpec()) == []


@pytest.mark.parametrize(
    "overrides, message",
    [
        (dict(delta0=math.pi / 3), "delta0 must lie"),
        (dict(eps=0.2), "eps must lie"),
        (dict(a1=0.8), "need 0 < a < a1"),
        (dict(delta1=math.pi / 8, profile="sine"), "sine profile needs"),
        (dict(profile="spline"), "unknown interface profile"),
    ],
)
def test_invalid_domain(overrides, message):
    spec = DomainSpec(**overrides)
    assert any(message in problem for problem in validate_domain(spec))
    with pytest.raises(GeometryError, match=message):
        build_domain(spec, MeshSpec(rows=4, inner_columns=2, outer_columns=4))


@pytest.mark.parametrize("profile", ["arc", "sine", "hermite"])
def test_profile_contact_slopes(profile):
    spec = DomainSpec(delta0=math.pi / 6, delta1=math.pi / 6, profile=profile)
    curve = InterfaceProfile(spec)
    assert curve.slope(0.0) == pytest.approx(math.tan(spec.delta0))
    assert curve.slope(spec.a) == pytest.approx(-math.tan(spec.delta1))
    assert curve.value(0.0) == 0.0
    assert curve.value(spec.a) == 0.0


def test_auto_profile_switches_to_hermite():
    assert DomainSpec(delta1=math.pi / 8).resolved_profile == "hermite"
    assert DomainSpec().resolved_profile == "arc"


def test_arc_profile_is_circular():
    spec = DomainSpec()
    curve = InterfaceProfile(spec)
    t = np.linspace(0.0, spec.a, 41)
    distance = np.hypot(curve.value(t) - curve.centre, t - 0.5 * spec.a)
    assert np.allclose(distance, curve.radius, atol=1e-12)
    assert float(curve.value(0.5 * spec.a)) == pytest.approx(0.5 * spec.a * math.tan(0.5 * spec.delta0))
    assert np.allclose(curve.curvature(t), -1.0 / curve.radius * (1.0 + curve.slope(t) ** 2) ** 1.5)


def test_outer_boundary_meets_axis_far_from_contact_points():
    spec = DomainSpec()
    t = np.array([-spec.a2_len, -0.5 * spec.a2_len, 0.0, spec.a, spec.a1])
    outer = outer_boundary(spec, t)
    assert outer[0] == 0.0 and outer[-1] == 0.0
    assert np.all(outer[1:-1] > 0.0)
    assert min(spec.a2_len, spec.a1 - spec.a) >= 6.0 * spec.eps
    assert any("eps must lie" in p for p in validate_domain(DomainSpec(a1=1.2)))


def test_mesh_refined():
    refined = MeshSpec(rows=4, inner_columns=2, outer_columns=4).refined(2)
    assert (refined.rows, refined.inner_columns, refined.outer_columns) == (8, 4, 8)


def test_mesh_is_positively_oriented(domain):
    assert np.all(domain.mesh.areas() > 0)


def test_mesh_tags(domain):
    mesh, spec = domain.mesh, domain.spec
    corners = mesh.nodes[list(mesh.corners)]
    assert np.allclose(corners, spec.corners)
    assert np.all(mesh.tags[list(mesh.corners)] == TAG_CORNER)
    assert mesh.interface.size == 2 * mesh.spec.rows + 1
    assert np.all(mesh.tags[mesh.interface[1:-1]] == TAG_INTERFACE)
    gamma2 = mesh.nodes[mesh.gamma2]
    assert np.allclose(gamma2[:, 0], 0.0)
    assert np.all((gamma2[:, 1] > 0) & (gamma2[:, 1] < spec.a))
    assert set(mesh.corners) <= set(mesh.dirichlet)
    assert mesh.gamma1.size > 0
    assert not np.any(mesh.tags[mesh.gamma1] == TAG_GAMMA2)
    assert np.all(mesh.tags[mesh.gamma1] == TAG_GAMMA1)


def test_interface_nodes_lie_on_profile(domain):
    points = domain.mesh.nodes[domain.mesh.interface]
    assert np.allclose(points[:, 0], domain.profile.value(points[:, 1]), atol=1e-14)


def test_inner_phase_area(domain):
    mesh, spec = domain.mesh, domain.spec
    expected, _ = quad(lambda t: float(domain.profile.value(t)), 0.0, spec.a)
    area = float(np.sum(mesh.areas()[mesh.phase == 2]))
    assert area == pytest.approx(expected, rel=1e-2)


def test_measured_contact_angles(skewed_domain):
    angle0, angle1 = interface_angles(skewed_domain.mesh)
    assert angle0 == pytest.approx(math.pi / 6, abs=1e-2)
    assert angle1 == pytest.approx(math.pi / 8, abs=1e-2)


def test_chart_end_points(domain):
    chart = domain.chart
    assert np.allclose(chart.m(0.0), [[0.0, 0.0]])
    assert np.allclose(chart.m(chart.length), [[0.0, domain.spec.a]])
    assert chart.eps1 * chart.b0 < 0.5 * domain.spec.eps


def test_chart_arc_length(domain):
    speed = lambda t: math.sqrt(1.0 + float(domain.profile.slope(t)) ** 2)
    expected, _ = quad(speed, 0.0, domain.spec.a)
    assert domain.chart.length == pytest.approx(expected, rel=1e-10)


def test_transversal_field(domain):
    chart = domain.chart
    assert np.allclose(chart.transversal(0.0), [[0.0, -1.0]])
    assert np.allclose(chart.transversal(chart.length), [[0.0, 1.0]])
    middle = 0.5 * chart.length
    assert np.allclose(chart.transversal(middle), chart.normal(middle))
    assert chart.normal(middle)[0, 0] > 0


def test_cutoff_plateau(domain):
    chart = domain.chart
    width = chart.eps1 * chart.b0
    assert chart.cutoff(0.0) == pytest.approx(1.0)
    assert chart.cutoff(0.5 * width) == pytest.approx(1.0)
    assert np.allclose(chart.cutoff(np.array([-3.0, 3.0]) * width), 0.0)
    lam = np.linspace(-3.0, 3.0, 601) * width
    assert np.max(np.abs(chart.cutoff_derivative(lam))) * chart.b0 < 10.0 / chart.eps1


def test_chart_coordinates_round_trip(domain):
    chart = domain.chart
    omega = np.linspace(0.3, 0.7, 5) * chart.length
    lam = 0.3 * chart.b0 * np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
    points = chart.m(omega) + lam[:, None] * chart.transversal(omega)
    found_omega, found_lam, inside = chart.chart_coordinates(points)
    assert np.all(inside)
    assert np.allclose(found_omega, omega, atol=1e-9)
    assert np.allclose(found_lam, lam, atol=1e-9)


def test_points_far_from_interface_are_outside(domain):
    _, _, inside = domain.chart.chart_coordinates([[1.2, 0.5], [0.0, -0.4]])
    assert not np.any(inside)


def test_zero_displacement_is_identity(domain):
    chart = domain.chart
    points = domain.mesh.nodes[::7]
    s_field = DisplacementField.zero(chart)
    assert np.allclose(hanzawa_forward(points, s_field, chart), points)
    assert np.allclose(jacobian(points, s_field, chart), np.eye(2))


def _bump(chart, scale):
    omega = np.linspace(0.0, chart.length, 201)
    return DisplacementField(omega, scale * chart.b0 * np.sin(math.pi * omega / chart.length) ** 2)


def test_hanzawa_inverse_round_trip(domain):
    chart = domain.chart
    s_field = _bump(chart, 0.1)
    omega = np.linspace(0.35, 0.65, 4) * chart.length
    points = chart.m(omega) + 0.2 * chart.b0 * chart.transversal(omega)
    moved = hanzawa_forward(points, s_field, chart)
    assert not np.allclose(moved, points)
    assert np.allclose(hanzawa_inverse(moved, s_field, chart), points, atol=1e-10)


def test_interface_moves_by_displacement(domain):
    chart = domain.chart
    s_field = _bump(chart, 0.1)
    omega = np.array([0.5 * chart.length])
    moved = hanzawa_forward(chart.m(omega), s_field, chart)
    expected = chart.m(omega) + s_field(omega)[:, None] * chart.transversal(omega)
    assert np.allclose(moved, expected, atol=1e-12)


def test_check_tube(domain):
    chart = domain.chart
    assert check_tube(_bump(chart, 0.1), chart) == pytest.approx(0.15 * chart.b0)
    with pytest.raises(TubeViolation, match="tube violation"):
        check_tube(_bump(chart, 0.3), chart)


def test_metric_coeffs_away_from_corners(domain):
    chart = domain.chart
    omega = np.array([0.5 * chart.length])
    S, S1 = metric_coeffs(omega, 0.0, 0.0, chart)
    assert S[0] == pytest.approx(1.0, abs=1e-10)
    assert S1[0] == pytest.approx(0.0, abs=1e-10)


def test_metric_coeffs_near_corner(domain):
    chart = domain.chart
    omega = np.array([0.2 * domain.spec.eps])
    slope = domain.profile.slope(chart.t_of_omega(omega))
    S, S1 = metric_coeffs(omega, 0.0, 0.0, chart)
    assert S[0] == pytest.approx(1.0 + 1.0 / slope[0] ** 2, rel=1e-8)
    assert S1[0] == pytest.approx(math.sqrt(1.0 + slope[0] ** 2) / slope[0] ** 2, rel=1e-8)


def test_log_polar():
    mapped = log_polar([[1.0, 1.0]])
    assert np.allclose(mapped, [[0.5 * math.log(2.0), math.pi / 4]])
    assert np.allclose(log_polar_inverse(mapped), [[1.0, 1.0]])
    with pytest.raises(GeometryError, match="undefined at the origin"):
        log_polar([[0.0, 0.0]])


def test_weighted_sup_norm():
    spec = DomainSpec()
    points = np.array([[0.1, 0.0], [0.0, 0.8], [0.2, 0.1]])
    r = corner_distance(points, spec)
    assert weighted_sup_norm(r**2, points, 2.0, spec) == pytest.approx(1.0)
