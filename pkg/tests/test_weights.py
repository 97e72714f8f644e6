# Standard library imports
import math
from fractions import Fraction

# Related third-party imports
import numpy as np
import pytest

# Local application/library specific imports
from muskatcorner.errors import ValidationError
from muskatcorner.spectral import CornerParams, corner_spectrum
from muskatcorner.weights import (
    CORNER,
    H7_GENERIC,
    H7_Q0_EQ1,
    H8,
    SINGLE_CORNER,
    WindowInputs,
    build_index_sets,
    corner_params_from_interface,
    corner_weights,
    global_weights,
    h7_window,
    h8_window,
    h9_window,
    limsup_weights,
    pi_fraction,
    rational_angle,
    s_star_window,
    weight_window,
)


def test_s_star_window_for_sixth_angles():
    window = s_star_window(math.pi / 6, math.pi / 6)
    assert window.lower == Fraction(13, 4)
    assert window.upper == Fraction(4)
    assert window.excluded == ()
    assert window.variable == "s_star"
    assert window.admits(3.5)
    assert not window.admits(3.25)
    assert window.pick() == pytest.approx(3.625)


def test_s_star_window_rejects_bad_angle():
    with pytest.raises(ValidationError, match="outside"):
        s_star_window(math.pi / 2, math.pi / 6)


def test_h7_generic_window():
    window = h7_window(math.pi / 6, math.pi / 6, -math.inf, -math.inf)
    assert window.case_tag == H7_GENERIC
    assert (window.lower, window.upper) == (Fraction(2), Fraction(3))
    assert window.admits(0.5)
    assert window.pick_weight() == pytest.approx(0.5)


def test_h7_window_excludes_interior_point():
    window = h7_window(math.pi / 5, math.pi / 5, -math.inf, -math.inf)
    assert window.excluded == (Fraction(5, 2),)
    assert not window.admits(0.5)
    assert window.admits(0.4)


def test_h7_window_ignores_h_star_when_q0_is_one():
    window = h7_window(math.pi / 6, math.pi / 6, 2.9, 2.2, q0_is_one=True)
    assert window.case_tag == H7_Q0_EQ1
    assert window.lower == pytest.approx(2.2)


def test_empty_window_is_a_valid_answer():
    window = h7_window(math.pi / 6, math.pi / 6, 3.5, 2.0)
    assert window.empty
    assert "not below" in window.reason
    assert window.pick() is None
    assert not window.admits(0.9)
    assert window.to_dict()["empty"] is True


def test_h8_window():
    window = h8_window(2.4)
    assert window.case_tag == H8
    assert window.lower == pytest.approx(2.4)
    assert window.upper == 3


def test_h9_window_needs_wide_corner():
    window = h9_window(math.pi / 4, 2.0)
    assert window.empty
    assert "outside" in window.reason


def test_weight_window_dispatch():
    inputs = WindowInputs(delta=math.pi / 4, s_star=3.5, z_minus_1=1.0)
    window = weight_window(inputs, SINGLE_CORNER)
    assert window.case_tag == SINGLE_CORNER
    assert window.upper == 3
    with pytest.raises(ValueError, match="unknown window mode"):
        weight_window(inputs, "h10")


def test_window_to_dict_keeps_exact_ends():
    record = s_star_window(math.pi / 6, math.pi / 6).to_dict()
    assert record["lower"] == 3.25
    assert record["exact"] == {"lower": "13/4", "upper": "4"}


@pytest.mark.parametrize(
    "angle, expected",
    [(math.pi / 6, Fraction(1, 6)), (math.pi / 4, Fraction(1, 4)), (0.5, None)],
)
def test_pi_fraction(angle, expected):
    assert pi_fraction(angle) == expected


@pytest.mark.parametrize(
    "delta, encoding, expected",
    [
        (math.pi / 6, "interface", (1, 3)),
        (math.pi / 10, "interface", (2, 5)),
        (math.pi / 4, CORNER, (1, 4)),
    ],
)
def test_rational_angle_exact(delta, encoding, expected):
    assert rational_angle(delta, 1e-10, encoding) == expected


def test_rational_angle_irrational_within_tolerance():
    q, p = rational_angle(0.5, 1e-3)
    assert p > 2 * q >= 2
    assert math.gcd(p, q) == 1
    assert abs(math.pi * (0.5 - q / p) - 0.5) <= 1e-3


def test_rational_angle_rejects_out_of_range():
    with pytest.raises(ValidationError, match="outside"):
        rational_angle(2.0, 1e-6)


def test_corner_params_from_interface():
    params = corner_params_from_interface(math.pi / 6, 0.2, 0.5)
    assert params.a2 == pytest.approx(math.sqrt(3.0))
    assert (params.q, params.p) == (1, 3)
    assert params.a3 == 0.2


def test_index_sets_require_s_star_above_two():
    with pytest.raises(ValidationError, match="s_star must exceed 2"):
        build_index_sets((None, None), None, 2.0, math.pi / 4)


def test_symmetric_global_weights():
    weights = global_weights(math.pi / 6, math.pi / 6, 0.0, 0.0, 0.5, 3.5)
    assert weights.h_star == weights.f_star
    assert weights.window.upper == 3
    record = weights.to_dict()
    assert record["window"]["case_tag"] == weights.window.case_tag
    assert record["h_star"] == record["f_star"]


def test_corner_weights_for_quarter_corner():
    spectrum = corner_spectrum(CornerParams(a2=1.0, a3=0.0, k=0.5, q=1, p=4))
    weights = corner_weights(spectrum, 3.5)
    assert weights.h9.empty
    assert (weights.single_corner.lower, weights.single_corner.upper) == (2, 3)
    assert weights.h8.upper == 3
    assert set(weights.to_dict()) >= {"j1", "j2", "h8", "h9", "single_corner"}


def test_limsup_weights_constant_for_rational_angles():
    reference = global_weights(math.pi / 6, math.pi / 6, 0.0, 0.0, 0.5, 3.5, tol=1e-12, verify=False)
    result = limsup_weights(math.pi / 6, math.pi / 6, m_max=3)
    assert result.converged
    assert result.spread_h == 0.0
    assert len(result.per_m) == 3
    assert all(record[1] == (1, 3) for record in result.per_m)
    assert result.as_tuple() == pytest.approx((reference.h_star, reference.f_star))


@pytest.mark.parametrize(
    "kwargs, message",
    [
        (dict(m_max=2), "at least 3"),
        (dict(m_max=3, tol_ladder=[1e-2, 1e-2, 1e-3]), "strictly decreasing"),
        (dict(m_max=4, tol_ladder=[1e-2, 1e-3]), "one tolerance per approximant"),
    ],
)
def test_limsup_weights_argument_checks(kwargs, message):
    with pytest.raises(ValueError, match=message):
        limsup_weights(math.pi / 6, math.pi / 6, **kwargs)


D0_GRID = np.append(np.arange(0.0, 1.0, 1e-4), 1.0)


def enumerate_threshold(zeros_plus, denominator, bound):
    scaled = [float(x) / denominator for x in zeros_plus.expanded_locations()]
    hits = [i for i in range(1, len(scaled)) if scaled[i - 1] < bound <= scaled[i]]
    return hits[0]


def enumerate_bound_analysis(spectrum, denominator, bound, s_star):
    """Thresholds, caps, sets and z values by direct enumeration over m, i and the d0 grid."""
    zeros_plus, zeros_minus = spectrum.zeros_plus, spectrum.zeros_minus
    slope = s_star - 2.0
    index = enumerate_threshold(zeros_plus, denominator, bound)
    z_plus = [zeros_plus.location(i) / denominator for i in range(index)]
    z_minus = [zeros_minus.location(i) / denominator for i in range(1, index + 3)]

    cap_minus_value = 1.0 + (zeros_plus.location(index) + zeros_minus.location(index + 2)) / (denominator * slope)
    cap_plus_value = 1.0 + (zeros_plus.location(index - 1) - zeros_minus.location(1)) / (denominator * slope)
    cap_minus = max(m for m in range(1000) if m < cap_minus_value)
    cap_plus = max(m for m in range(1000) if m < cap_plus_value)

    members_minus = tuple(
        m
        for m in range(cap_minus + 1)
        if any(np.any(-z + slope * (m - D0_GRID) < bound) for z in z_minus)
    )
    members_universal = tuple(
        m
        for m in range(cap_minus + 1)
        if any(np.all(-z + slope * (m - D0_GRID) < bound) for z in z_minus)
    )
    members_plus = tuple(
        m for m in range(cap_plus + 1) if any(z - slope * (m - 1) < bound for z in z_plus)
    )

    z_under = max(
        (float(np.max(-z + slope * (m - D0_GRID))) for m in members_minus for z in z_minus),
        default=-math.inf,
    )
    z_over = max((z - slope * (m - 1) for m in members_plus for z in z_plus), default=-math.inf)
    return {
        "threshold": index,
        "M_minus_cap": cap_minus,
        "M_plus_cap": cap_plus,
        "members_minus": members_minus,
        "members_minus_universal": members_universal,
        "members_plus": members_plus,
        "z_under": z_under,
        "z_over": z_over,
        "z_star": max(z_under, z_over),
    }


def assert_matches_enumeration(analysis, expected):
    assert analysis.threshold.index == expected["threshold"]
    assert analysis.index_sets.M_minus_cap == expected["M_minus_cap"]
    assert analysis.index_sets.M_plus_cap == expected["M_plus_cap"]
    assert analysis.index_sets.members_minus == expected["members_minus"]
    assert analysis.index_sets.members_minus_universal == expected["members_minus_universal"]
    assert analysis.index_sets.members_plus == expected["members_plus"]
    for name in ("z_under", "z_over", "z_star"):
        value = getattr(analysis, name)
        if expected[name] == -math.inf:
            assert value == -math.inf
        else:
            assert value == pytest.approx(expected[name], abs=1e-10)


@pytest.fixture
def worked_global_weights():
    return global_weights(math.pi / 6, math.pi / 6, 0.0, 0.0, 0.5, 3.5)


def test_global_weights_match_enumeration(worked_global_weights):
    weights = worked_global_weights
    bound = min(3.0, *(2.0 * math.pi / (math.pi - 2.0 * delta) for delta in (weights.delta0, weights.delta1)))
    expected = {}
    corners = (("h", weights.spectrum0, weights.delta0), ("f", weights.spectrum1, weights.delta1))
    for name, spectrum, delta in corners:
        analysis = getattr(weights, name)
        if analysis is None:
            assert weights.q0_is_one if name == "h" else weights.q1_is_one
            expected[name] = {"z_star": -math.inf}
            continue
        expected[name] = enumerate_bound_analysis(spectrum, math.pi - 2.0 * delta, bound, 3.5)
        assert_matches_enumeration(analysis, expected[name])

    candidates = [2.0]
    if not weights.q0_is_one:
        candidates.append(expected["h"]["z_star"])
    if not weights.q1_is_one:
        candidates.append(expected["f"]["z_star"])
    window = weights.window
    assert float(window.lower) == pytest.approx(max(candidates), abs=1e-10)
    assert float(window.upper) == pytest.approx(bound, abs=1e-10)
    inside = [x for x in (math.pi / (2.0 * weights.delta0),) if max(candidates) < x < bound]
    assert [float(x) for x in window.excluded] == pytest.approx(inside, abs=1e-10)


@pytest.mark.parametrize("bound_name", ["first", "second"])
def test_corner_weights_match_enumeration(bound_name):
    spectrum = corner_spectrum(CornerParams(a2=math.sqrt(3.0), a3=0.0, k=0.5, q=1, p=3))
    weights = corner_weights(spectrum, 3.5)
    delta = spectrum.params.delta
    bound = 3.0 if bound_name == "first" else min(3.0, math.pi / delta)
    expected = enumerate_bound_analysis(spectrum, 2.0 * delta, bound, 3.5)
    assert_matches_enumeration(getattr(weights, bound_name), expected)


def test_s_star_window_ends_are_exact():
    window = s_star_window(math.pi / 6, math.pi / 6)
    assert (window.lower, window.upper) == (Fraction(13, 4), Fraction(4))
