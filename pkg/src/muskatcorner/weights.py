"""Thresholds, index sets and admissible weight windows.

Windows are open intervals for s + 2 (or for s_star) minus finitely many
points. Bounds that are rational multiples of pi in disguise, such as
2*pi/(pi - 2*delta) for delta = r*pi, are kept as exact Fractions until the
final comparison.
"""

# Standard library imports
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

# Related third-party imports
import numpy as np

# Local application/library specific imports
from .errors import NoThreshold, ValidationError
from .spectral import (
    EQ_TOL,
    CornerParams,
    CornerSpectrum,
    Q2Regime,
    ZeroSet,
    corner_spectrum,
)


logger = logging.getLogger(__name__)

INTERFACE = "interface"
CORNER = "corner"

THREE = "three"
MIN_THREE_PI_OVER_DELTA = "min_three_pi_over_delta"

H7_GENERIC = "h7_Q0Q1_generic"
H7_Q0_EQ1 = "h7_Q0_eq1"
H7_Q1_EQ1 = "h7_Q1_eq1"
H7_BOTH_EQ1 = "h7_both_eq1"
H8 = "h8"
H9 = "h9"
SINGLE_CORNER = "single_corner"
S_STAR = "s_star"

Q_UNIT_TOL = 1e-10


class GlobalBound(NamedTuple):
    """Bound min{3, 2pi/(pi-2delta0), 2pi/(pi-2delta1)} of the global problem."""

    delta0: float
    delta1: float


# ==========================
# Exact angle arithmetic
# ==========================


def pi_fraction(angle: float, max_denominator: int = 10_000) -> Fraction | None:
    """Return r with angle = r*pi when the angle is a small-denominator rational multiple of pi."""
    ratio = Fraction(angle / math.pi).limit_denominator(max_denominator)
    if abs(float(ratio) * math.pi - angle) <= 1e-12 * max(1.0, abs(angle)):
        return ratio
    return None


def two_pi_over_complement(delta: float):
    """2*pi/(pi - 2*delta), exact when possible."""
    ratio = pi_fraction(delta)
    if ratio is not None:
        return Fraction(2) / (1 - 2 * ratio)
    return 2.0 * math.pi / (math.pi - 2.0 * delta)


def pi_over(delta: float, factor: int = 1):
    """pi/(factor*delta), exact when possible."""
    ratio = pi_fraction(delta)
    if ratio is not None:
        return 1 / (factor * ratio)
    return math.pi / (factor * delta)


def _convergents(value: Fraction):
    h_prev, h = 0, 1
    k_prev, k = 1, 0
    while True:
        a = math.floor(value)
        h_prev, h = h, a * h + h_prev
        k_prev, k = k, a * k + k_prev
        yield Fraction(h, k)
        rest = value - a
        if rest == 0:
            return
        value = 1 / rest


def rational_angle(delta: float, tol: float, encoding: str = INTERFACE) -> tuple:
    """Rational encoding (q, p) of an angle through continued fractions.

    The interface encoding approximates delta = pi*(1/2 - q/p), the corner
    encoding delta = q*pi/p. The first convergent with q >= 1, p > 2q and
    error at most tol is returned, so p is minimal among admissible
    convergents.

    Args:
        delta (float): Angle in radians, inside (0, pi/2).
        tol (float): Admissible angle error in radians.
        encoding (str): "interface" or "corner".

    Returns:
        tuple: Irreducible (q, p).
    """
    if not 0.0 < delta < 0.5 * math.pi:
        raise ValidationError(f"angle {delta} outside (0, pi/2)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if encoding == INTERFACE:
        target = Fraction(0.5) - Fraction(delta) / Fraction(math.pi)
    elif encoding == CORNER:
        target = Fraction(delta) / Fraction(math.pi)
    else:
        raise ValueError(f"unknown encoding {encoding!r}")

    for convergent in _convergents(target):
        q, p = convergent.numerator, convergent.denominator
        if q < 1 or p <= 2 * q:
            continue
        if math.pi * abs(float(target - convergent)) <= tol:
            return q, p
    raise ValidationError(f"no admissible convergent of {delta} within {tol}")


def corner_params_from_interface(
    delta_i: float, alpha_i: float, k: float, tol: float = 1e-10
) -> CornerParams:
    """Corner coefficients of the global problem at an interface contact point.

    The contact angle delta_i gives a2 = cot(delta_i) and the corner opening
    pi/2 - delta_i = q*pi/p; the tangential coefficient is alpha_i.
    """
    q, p = rational_angle(delta_i, tol, INTERFACE)
    return CornerParams(a2=1.0 / math.tan(delta_i), a3=alpha_i, k=k, q=q, p=p)


# ==========================
# WeightWindow
# ==========================


def _as_json_number(value):
    if isinstance(value, Fraction):
        return float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


@dataclass(frozen=True)
class WeightWindow:
    """Open interval (lower, upper) minus the excluded points.

    Attributes:
        lower: Lower end, a Fraction when exact.
        upper: Upper end, a Fraction when exact.
        excluded (tuple): Excluded points strictly inside the interval.
        case_tag (str): Which condition produced the window.
        empty (bool): True when lower >= upper.
        reason (str): Why the window is empty.
        variable (str): "s+2" for weight windows, "s_star" for the s_star window.
    """

    lower: object
    upper: object
    excluded: tuple
    case_tag: str
    empty: bool
    reason: str | None = None
    variable: str = "s+2"

    def contains(self, value) -> bool:
        if self.empty:
            return False
        return self.lower < value < self.upper and all(value != point for point in self.excluded)

    def admits(self, s) -> bool:
        """Exact membership test for a weight s (or for s_star itself)."""
        return self.contains(s + 2 if self.variable == "s+2" else s)

    def pick(self) -> float | None:
        """Midpoint of the widest open piece, expressed in the window variable."""
        if self.empty:
            return None
        points = sorted(float(x) for x in (self.lower, *self.excluded, self.upper))
        gaps = [(b - a, 0.5 * (a + b)) for a, b in zip(points[:-1], points[1:])]
        return max(gaps)[1]

    def pick_weight(self) -> float | None:
        centre = self.pick()
        if centre is None or self.variable != "s+2":
            return centre
        return centre - 2.0

    def to_dict(self) -> dict:
        record = {
            "variable": self.variable,
            "lower": _as_json_number(self.lower),
            "upper": _as_json_number(self.upper),
            "excluded": [_as_json_number(x) for x in self.excluded],
            "case_tag": self.case_tag,
            "empty": self.empty,
            "reason": self.reason,
        }
        exact = {
            name: str(value)
            for name, value in (("lower", self.lower), ("upper", self.upper))
            if isinstance(value, Fraction)
        }
        if exact:
            record["exact"] = exact
        return record


def make_window(lower, upper, excluded, case_tag, variable="s+2") -> WeightWindow:
    """Build a window, dropping exclusions outside the open interval."""
    inside = []
    for point in excluded:
        if lower < point < upper and all(point != kept for kept in inside):
            inside.append(point)
    empty = not lower < upper
    reason = None
    if empty:
        reason = f"lower end {float(lower):.6g} is not below upper end {float(upper):.6g}"
    return WeightWindow(
        lower=lower,
        upper=upper,
        excluded=tuple(sorted(inside, key=float)),
        case_tag=case_tag,
        empty=empty,
        reason=reason,
        variable=variable,
    )


def s_star_window(delta0: float, delta1: float) -> WeightWindow:
    """Admissible decay exponent s_star for the boundary pressures."""
    for delta in (delta0, delta1):
        if not 0.0 < delta < 0.5 * math.pi:
            raise ValidationError(f"angle {delta} outside (0, pi/2)")
    lower = max(Fraction(13, 4), two_pi_over_complement(delta1), two_pi_over_complement(delta0))
    return make_window(
        lower,
        Fraction(4),
        [pi_over(delta0, 2), pi_over(delta1, 2)],
        S_STAR,
        variable="s_star",
    )


def h7_case(q0_is_one: bool, q1_is_one: bool) -> str:
    if q0_is_one and q1_is_one:
        return H7_BOTH_EQ1
    if q0_is_one:
        return H7_Q0_EQ1
    if q1_is_one:
        return H7_Q1_EQ1
    return H7_GENERIC


def h7_window(delta0, delta1, h_star, f_star, q0_is_one=False, q1_is_one=False) -> WeightWindow:
    """Window for s+2 of the global problem, one of four cases by the Q flags."""
    case = h7_case(q0_is_one, q1_is_one)
    candidates = {
        H7_GENERIC: (2, h_star, f_star),
        H7_Q0_EQ1: (2, f_star),
        H7_Q1_EQ1: (2, h_star),
        H7_BOTH_EQ1: (2,),
    }[case]
    lower = max(Fraction(x) if isinstance(x, int) else x for x in candidates)
    upper = min(Fraction(3), two_pi_over_complement(delta0), two_pi_over_complement(delta1))
    return make_window(lower, upper, [pi_over(delta0, 2), pi_over(delta1, 2)], case)


def h8_window(z_star_1: float) -> WeightWindow:
    return make_window(max(Fraction(2), z_star_1), Fraction(3), [], H8)


def h9_window(delta: float, z_star_2: float) -> WeightWindow:
    if not 0.25 * math.pi < delta < 0.5 * math.pi:
        return WeightWindow(
            lower=Fraction(2),
            upper=Fraction(2),
            excluded=(),
            case_tag=H9,
            empty=True,
            reason=f"corner angle {delta:.6g} outside (pi/4, pi/2)",
        )
    upper = min(Fraction(3), pi_over(delta))
    excluded = [math.pi / (math.pi - 2.0 * delta)]
    ratio = pi_fraction(delta)
    if ratio is not None:
        excluded = [1 / (1 - 2 * ratio)]
    return make_window(max(Fraction(2), z_star_2), upper, excluded, H9)


def single_corner_window(delta: float, s_star: float, z_minus_1: float) -> WeightWindow:
    upper = min(Fraction(3), pi_over(delta), 2.0 * (s_star - 2.0) + z_minus_1 / (2.0 * delta))
    return make_window(Fraction(2), upper, [], SINGLE_CORNER)


@dataclass(frozen=True)
class WindowInputs:
    """Data needed by weight_window; unused fields may stay at their defaults."""

    delta0: float | None = None
    delta1: float | None = None
    q0_is_one: bool = False
    q1_is_one: bool = False
    h_star: float = -math.inf
    f_star: float = -math.inf
    delta: float | None = None
    z_star_1: float = -math.inf
    z_star_2: float = -math.inf
    s_star: float | None = None
    z_minus_1: float | None = None


def weight_window(inputs: WindowInputs, mode: str) -> WeightWindow:
    """Dispatch to the h7, h8, h9 or single-corner window.

    Args:
        inputs (WindowInputs): Corner data for the relevant corners.
        mode (str): "h7", "h8", "h9" or "single_corner".

    Returns:
        WeightWindow: The window; emptiness is a valid answer.
    """
    if mode == "h7":
        return h7_window(
            inputs.delta0,
            inputs.delta1,
            inputs.h_star,
            inputs.f_star,
            inputs.q0_is_one,
            inputs.q1_is_one,
        )
    if mode == H8:
        return h8_window(inputs.z_star_1)
    if mode == H9:
        return h9_window(inputs.delta, inputs.z_star_2)
    if mode == SINGLE_CORNER:
        return single_corner_window(inputs.delta, inputs.s_star, inputs.z_minus_1)
    raise ValueError(f"unknown window mode {mode!r}")


# ==========================
# Thresholds and index sets
# ==========================


@dataclass(frozen=True)
class ThresholdSelection:
    """Threshold index i with z+_{i-1}/(2 delta) < bound <= z+_i/(2 delta)."""

    index: int
    bound: object
    denominator: float
    bound_kind: str


@dataclass(frozen=True)
class IndexSets:
    M_minus_cap: int
    M_plus_cap: int
    members_minus: tuple
    members_plus: tuple
    members_minus_universal: tuple = ()

    @property
    def readings_agree(self) -> bool:
        return self.members_minus == self.members_minus_universal


def resolve_bound(bound_kind, delta: float):
    """Right-hand bound for the threshold and membership inequalities."""
    if bound_kind == THREE:
        return Fraction(3)
    if bound_kind == MIN_THREE_PI_OVER_DELTA:
        return min(Fraction(3), pi_over(delta))
    if isinstance(bound_kind, GlobalBound):
        return min(
            Fraction(3),
            two_pi_over_complement(bound_kind.delta0),
            two_pi_over_complement(bound_kind.delta1),
        )
    raise ValueError(f"unknown bound kind {bound_kind!r}")


def _bound_label(bound_kind) -> str:
    return "global" if isinstance(bound_kind, GlobalBound) else bound_kind


def select_thresholds(zeros_plus: ZeroSet, delta: float, bound_kind) -> ThresholdSelection:
    """Smallest index i >= 1 with z+_{i-1}/(2 delta) < bound <= z+_i/(2 delta).

    For the global problem delta is the corner opening pi/2 - delta_i, so the
    denominator 2*delta equals pi - 2*delta_i.

    Raises:
        NoThreshold: If all zeros lie on one side of the bound.
    """
    bound = resolve_bound(bound_kind, delta)
    denominator = 2.0 * delta
    scaled = [float(x) / denominator for x in zeros_plus.expanded_locations()]
    for index in range(1, len(scaled)):
        if scaled[index - 1] < bound <= scaled[index]:
            return ThresholdSelection(index, bound, denominator, _bound_label(bound_kind))
    raise NoThreshold(
        f"no threshold: {len(scaled)} zeros of S+ scaled by {denominator:.6g} "
        f"all fall on one side of {float(bound):.6g}"
    )


def _strict_cap(value: float) -> int:
    """Largest integer m with m < value."""
    return math.ceil(value) - 1


def build_index_sets(
    zeros: tuple, thresholds: ThresholdSelection, s_star: float, delta: float, bound=None
) -> IndexSets:
    """Caps and members of the bounded integer sets for one threshold.

    Membership in the minus set asks the inequality for some admissible i
    and some d0 in [0, 1]; the universal reading over d0 is kept alongside.

    Args:
        zeros (tuple): (zeros of S+, zeros of S-).
        thresholds (ThresholdSelection): The selected index.
        s_star (float): Decay exponent of the data, above 2.
        delta (float): Corner opening angle.
        bound: Right-hand bound; defaults to the threshold's bound.

    Returns:
        IndexSets: Caps and both readings of the minus set.
    """
    if s_star <= 2:
        raise ValidationError(f"s_star must exceed 2, got {s_star}")
    zeros_plus, zeros_minus = zeros
    bound = thresholds.bound if bound is None else bound
    slope = s_star - 2.0
    denominator = 2.0 * delta
    index = thresholds.index

    cap_minus = _strict_cap(
        1.0 + (zeros_plus.location(index) + zeros_minus.location(index + 2)) / (denominator * slope)
    )
    cap_plus = _strict_cap(
        1.0 + (zeros_plus.location(index - 1) - zeros_minus.location(1)) / (denominator * slope)
    )

    farthest = zeros_minus.location(index + 2) / denominator
    nearest = zeros_plus.location(0) / denominator
    members_minus = tuple(
        m for m in range(cap_minus + 1) if -farthest + slope * (m - 1) < bound
    )
    members_universal = tuple(m for m in range(cap_minus + 1) if -farthest + slope * m < bound)
    members_plus = tuple(m for m in range(cap_plus + 1) if nearest - slope * (m - 1) < bound)
    return IndexSets(cap_minus, cap_plus, members_minus, members_plus, members_universal)


def compute_z_star(
    zeros: tuple,
    thresholds: ThresholdSelection,
    index_sets: IndexSets,
    s_star: float,
    delta: float,
    universal: bool = False,
) -> tuple:
    """Return (z_under, z_over, z_star) for one threshold.

    The supremum over d0 in [0, 1] sits at d0 = 0 and the maxima over i at
    the first zero of S- and the last admissible zero of S+. An empty index
    set contributes -inf.
    """
    zeros_plus, zeros_minus = zeros
    slope = s_star - 2.0
    denominator = 2.0 * delta
    members_minus = index_sets.members_minus_universal if universal else index_sets.members_minus

    z_under = -math.inf
    if members_minus:
        z_under = -zeros_minus.location(1) / denominator + slope * max(members_minus)
    z_over = -math.inf
    if index_sets.members_plus:
        z_over = zeros_plus.location(thresholds.index - 1) / denominator - slope * (
            min(index_sets.members_plus) - 1
        )
    z_star = max(z_under, z_over)
    if z_star == -math.inf:
        logger.warning("Both index sets are empty; z_star is -inf.")
    return z_under, z_over, z_star


@dataclass(frozen=True)
class BoundAnalysis:
    threshold: ThresholdSelection
    index_sets: IndexSets
    z_under: float
    z_over: float
    z_star: float
    z_star_universal: float

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold.index,
            "bound": _as_json_number(self.threshold.bound),
            "bound_kind": self.threshold.bound_kind,
            "M_minus_cap": self.index_sets.M_minus_cap,
            "M_plus_cap": self.index_sets.M_plus_cap,
            "members_minus": list(self.index_sets.members_minus),
            "members_minus_universal": list(self.index_sets.members_minus_universal),
            "members_plus": list(self.index_sets.members_plus),
            "z_under": _as_json_number(self.z_under),
            "z_over": _as_json_number(self.z_over),
            "z_star": _as_json_number(self.z_star),
            "z_star_universal": _as_json_number(self.z_star_universal),
        }


def analyze_bound(spectrum: CornerSpectrum, bound_kind, s_star: float) -> BoundAnalysis:
    """Threshold, index sets and z values of one corner for one bound."""
    delta = spectrum.params.delta
    zeros = (spectrum.zeros_plus, spectrum.zeros_minus)
    threshold = select_thresholds(spectrum.zeros_plus, delta, bound_kind)
    index_sets = build_index_sets(zeros, threshold, s_star, delta)
    z_under, z_over, z_star = compute_z_star(zeros, threshold, index_sets, s_star, delta)
    z_star_universal = compute_z_star(
        zeros, threshold, index_sets, s_star, delta, universal=True
    )[2]
    if z_star != z_star_universal:
        logger.info(
            "d0 readings differ for bound %s: z_star=%.12g (some d0), %.12g (every d0).",
            _bound_label(bound_kind),
            z_star,
            z_star_universal,
        )
    return BoundAnalysis(threshold, index_sets, z_under, z_over, z_star, z_star_universal)


# ==========================
# Global and corner weights
# ==========================


def q_is_one(spectrum: CornerSpectrum, tol: float = Q_UNIT_TOL) -> bool:
    classification = spectrum.classification
    if classification.regime is Q2Regime.EQUAL_ONE:
        return True
    return abs(spectrum.quantities.q2 - 1.0) <= tol


def global_thresholds(zeros_h: ZeroSet, zeros_f: ZeroSet, delta0: float, delta1: float) -> tuple:
    """Thresholds (l0*, l1*) with denominators pi - 2*delta_i."""
    bound = GlobalBound(delta0, delta1)
    return (
        select_thresholds(zeros_h, 0.5 * math.pi - delta0, bound),
        select_thresholds(zeros_f, 0.5 * math.pi - delta1, bound),
    )


@dataclass
class GlobalWeights:
    """Weight data of the two contact corners A0 and A1."""

    delta0: float
    delta1: float
    s_star: float
    spectrum0: CornerSpectrum
    spectrum1: CornerSpectrum
    h: BoundAnalysis | None
    f: BoundAnalysis | None
    q0_is_one: bool
    q1_is_one: bool
    window: WeightWindow = field(init=False)

    def __post_init__(self):
        self.window = h7_window(
            self.delta0, self.delta1, self.h_star, self.f_star, self.q0_is_one, self.q1_is_one
        )

    @property
    def h_star(self) -> float:
        return self.h.z_star if self.h is not None else -math.inf

    @property
    def f_star(self) -> float:
        return self.f.z_star if self.f is not None else -math.inf

    def to_dict(self) -> dict:
        return {
            "delta0": self.delta0,
            "delta1": self.delta1,
            "s_star": self.s_star,
            "Q0_is_one": self.q0_is_one,
            "Q1_is_one": self.q1_is_one,
            "h": self.h.to_dict() if self.h is not None else None,
            "f": self.f.to_dict() if self.f is not None else None,
            "h_star": _as_json_number(self.h_star),
            "f_star": _as_json_number(self.f_star),
            "window": self.window.to_dict(),
        }


def _global_bound_analysis(spectrum, bound, s_star, unit_q):
    try:
        return analyze_bound(spectrum, bound, s_star)
    except NoThreshold:
        if unit_q:
            logger.info("No threshold for a corner with Q = 1; its branch is not needed.")
            return None
        raise


def global_weights(
    delta0: float,
    delta1: float,
    alpha0: float,
    alpha1: float,
    k: float,
    s_star: float,
    tol: float = 1e-10,
    verify: bool = True,
) -> GlobalWeights:
    """Spectra, thresholds, index sets, h*, f* and the h7 window of both corners."""
    spectrum0 = corner_spectrum(corner_params_from_interface(delta0, alpha0, k, tol), verify)
    spectrum1 = corner_spectrum(corner_params_from_interface(delta1, alpha1, k, tol), verify)
    q0_unit, q1_unit = q_is_one(spectrum0), q_is_one(spectrum1)
    bound = GlobalBound(delta0, delta1)
    return GlobalWeights(
        delta0=delta0,
        delta1=delta1,
        s_star=s_star,
        spectrum0=spectrum0,
        spectrum1=spectrum1,
        h=_global_bound_analysis(spectrum0, bound, s_star, q0_unit),
        f=_global_bound_analysis(spectrum1, bound, s_star, q1_unit),
        q0_is_one=q0_unit,
        q1_is_one=q1_unit,
    )


@dataclass(frozen=True)
class CornerWeights:
    """Windows of a single corner problem (thresholds j = 1, 2)."""

    spectrum: CornerSpectrum
    s_star: float
    first: BoundAnalysis
    second: BoundAnalysis
    h8: WeightWindow
    h9: WeightWindow
    single_corner: WeightWindow

    def to_dict(self) -> dict:
        return {
            "delta": self.spectrum.params.delta,
            "s_star": self.s_star,
            "j1": self.first.to_dict(),
            "j2": self.second.to_dict(),
            "h8": self.h8.to_dict(),
            "h9": self.h9.to_dict(),
            "single_corner": self.single_corner.to_dict(),
        }


def corner_weights(spectrum: CornerSpectrum, s_star: float) -> CornerWeights:
    delta = spectrum.params.delta
    first = analyze_bound(spectrum, THREE, s_star)
    second = analyze_bound(spectrum, MIN_THREE_PI_OVER_DELTA, s_star)
    inputs = WindowInputs(
        delta=delta,
        z_star_1=first.z_star,
        z_star_2=second.z_star,
        s_star=s_star,
        z_minus_1=spectrum.zeros_minus.location(1),
    )
    return CornerWeights(
        spectrum=spectrum,
        s_star=s_star,
        first=first,
        second=second,
        h8=weight_window(inputs, H8),
        h9=weight_window(inputs, H9),
        single_corner=weight_window(inputs, SINGLE_CORNER),
    )


# ==========================
# Limit weights for irrational angles
# ==========================


@dataclass(frozen=True)
class LimsupWeights:
    """Tail maxima of the approximant sequence and their spread.

    Attributes:
        h_star (float): Running max of the A0 quantities over the tail.
        f_star (float): Running max of the A1 quantities over the tail.
        per_m (tuple): (m, (q0, p0), (q1, p1), h_star_m, f_star_m) records.
        spread_h (float): Oscillation of h_star_m over the tail.
        spread_f (float): Oscillation of f_star_m over the tail.
        converged (bool): Both spreads within the configured limit.
    """

    h_star: float
    f_star: float
    per_m: tuple
    spread_h: float
    spread_f: float
    converged: bool

    def as_tuple(self) -> tuple:
        return self.h_star, self.f_star


def _approximant(delta, tol):
    exact = pi_fraction(delta)
    if exact is not None:
        ratio = Fraction(1, 2) - exact
        return ratio.numerator, ratio.denominator
    return rational_angle(delta, tol, INTERFACE)


def _spread(values):
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0
    return max(finite) - min(finite)


def limsup_weights(
    delta0: float,
    delta1: float,
    m_max: int,
    tol_ladder=None,
    k: float = 0.5,
    alpha0: float = 0.0,
    alpha1: float = 0.0,
    s_star: float = 3.5,
    spread_tol: float = 0.1,
) -> LimsupWeights:
    """Numerical stand-in for the limsup of h_star and f_star over approximants.

    Approximant m replaces each angle by pi*(1/2 - q/p) with (q, p) the first
    admissible convergent within tol_ladder[m-1]; angles that already are
    rational multiples of pi are kept exact, so their sequence is constant.

    Args:
        delta0 (float): Contact angle at A0.
        delta1 (float): Contact angle at A1.
        m_max (int): Number of approximants, at least 3.
        tol_ladder (list, optional): Decreasing tolerances, one per m.
        k (float): Conductivity ratio.
        alpha0 (float): Tangential coefficient at A0.
        alpha1 (float): Tangential coefficient at A1.
        s_star (float): Decay exponent of the data.
        spread_tol (float): Largest tail oscillation reported as converged.

    Returns:
        LimsupWeights: Tail maxima with per-m values and spreads.
    """
    if m_max < 3:
        raise ValueError("m_max must be at least 3")
    if tol_ladder is None:
        tol_ladder = [10.0 ** (-(m + 1)) for m in range(1, m_max + 1)]
    tol_ladder = list(tol_ladder)[:m_max]
    if len(tol_ladder) < m_max:
        raise ValueError("tol_ladder needs one tolerance per approximant")
    if any(b >= a for a, b in zip(tol_ladder[:-1], tol_ladder[1:])):
        raise ValueError("tol_ladder must be strictly decreasing")

    records = []
    for m, tol in enumerate(tol_ladder, start=1):
        q0, p0 = _approximant(delta0, tol)
        q1, p1 = _approximant(delta1, tol)
        approx0 = math.pi * (0.5 - q0 / p0)
        approx1 = math.pi * (0.5 - q1 / p1)
        weights = global_weights(
            approx0, approx1, alpha0, alpha1, k, s_star, tol=1e-12, verify=False
        )
        records.append((m, (q0, p0), (q1, p1), weights.h_star, weights.f_star))
        logger.info(
            "Approximant %d: q0/p0=%d/%d, q1/p1=%d/%d, h*=%.6g, f*=%.6g",
            m, q0, p0, q1, p1, weights.h_star, weights.f_star,
        )

    tail = [record for record in records if record[0] >= m_max / 2]
    h_values = [record[3] for record in tail]
    f_values = [record[4] for record in tail]
    spread_h, spread_f = _spread(h_values), _spread(f_values)
    converged = spread_h <= spread_tol and spread_f <= spread_tol
    if not converged:
        logger.warning(
            "Limit weights not converged: tail spreads %.3g (h) and %.3g (f) exceed %.3g.",
            spread_h,
            spread_f,
            spread_tol,
        )
    return LimsupWeights(
        h_star=float(np.max(h_values)),
        f_star=float(np.max(f_values)),
        per_m=tuple(records),
        spread_h=spread_h,
        spread_f=spread_f,
        converged=converged,
    )
