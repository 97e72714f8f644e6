"""Corner spectral quantities and the transcendental functions S+ and S-.

For a corner with drift coefficients (a2, a3), conductivity ratio k and
rational opening angle q*pi/p the module evaluates

    S+(z) = sin(z - theta1) + q2 * sin(q1 * z - theta2)
    S-(z) = sin(z) - q_star * sin(q1 * z)

locates every zero in the fundamental strip [0, 4*q*pi), certifies the
count with an independent argument-principle oracle and evaluates the
infinite-product factorizations in log space.
"""

# Standard library imports
import logging
import math
from dataclasses import dataclass
from enum import Enum

# Related third-party imports
import numpy as np
from scipy.optimize import brentq
from scipy.special import polygamma

# Local application/library specific imports
from .errors import BoundaryTooClose, BracketFailure, CountMismatch, ValidationError


logger = logging.getLogger(__name__)

PLUS = "plus"
MINUS = "minus"

EQ_TOL = 1e-12  # relative tolerance for q2 = 1 and q2 = 1/q1 detection
RESIDUAL_TOL = 1e-12  # zero certification, multiplied by SpectralQuantities.scale
XTOL = 1e-13
BRACKET_SHRINK = 1e-9
SAMPLES_PER_INTERVAL = 2048
REAL_IMAG_TOL = 1e-4  # polynomial roots with smaller |Im z| are treated as real
ORACLE_SAFETY = 1e-8
ORACLE_MAX_STEP = 0.25 * math.pi


class Q2Regime(str, Enum):
    GREATER_ONE = "greater_one"
    EQUAL_ONE = "equal_one"
    LESS_ONE = "less_one"


# ==========================
# Records
# ==========================


@dataclass(frozen=True)
class CornerParams:
    """Coefficients of one corner problem.

    Attributes:
        a2 (float): Transversal drift coefficient, positive.
        a3 (float): Tangential coupling coefficient.
        k (float): Conductivity ratio k2/k1 in (0, 1).
        q (int): Numerator of the opening angle q*pi/p.
        p (int): Denominator of the opening angle, p > 2q, gcd(p, q) = 1.
    """

    a2: float
    a3: float
    k: float
    q: int
    p: int

    @property
    def delta(self) -> float:
        return self.q * math.pi / self.p

    def violations(self) -> list:
        problems = []
        if not self.a2 > 0:
            problems.append(f"a2 must be positive, got {self.a2}")
        if not 0 < self.k < 1:
            problems.append(f"k must lie in (0, 1), got {self.k}")
        if self.q < 1 or self.p <= 2 * self.q:
            problems.append(f"opening angle needs p > 2q >= 2, got q={self.q}, p={self.p}")
        elif math.gcd(self.p, self.q) != 1:
            problems.append(f"q/p must be irreducible, got {self.q}/{self.p}")
        return problems

    def check(self) -> None:
        """Raise ValidationError listing every violated invariant."""
        problems = self.violations()
        if problems:
            raise ValidationError("; ".join(problems), verdicts=problems)


@dataclass(frozen=True)
class SpectralQuantities:
    q1: float
    q_star: float
    q2: float
    theta1: float
    theta2: float
    period: float
    params: CornerParams

    @property
    def scale(self) -> float:
        """Slope proxy used to scale residual tolerances."""
        return 1.0 + self.q_star + self.q2


@dataclass(frozen=True)
class Q2Classification:
    regime: Q2Regime
    clause: str | None
    near_degenerate: bool
    q2: float


@dataclass(frozen=True)
class Zero:
    location: float
    multiplicity: int
    residual: float


@dataclass(frozen=True)
class ZeroSet:
    """Zeros of S+ or S- in the fundamental strip [0, period).

    Attributes:
        kind (str): "plus" or "minus".
        zeros (tuple): Distinct zeros sorted by location.
        period (float): Strip width 4*q*pi.
        count (int): Number of zeros counted with multiplicity.
        case (str): The l1, l2 case label for q2 < 1, otherwise None.
    """

    kind: str
    zeros: tuple
    period: float
    count: int
    case: str | None = None

    @property
    def locations(self) -> np.ndarray:
        return np.array([zero.location for zero in self.zeros], dtype=float)

    def expanded_locations(self) -> np.ndarray:
        """Locations repeated according to multiplicity (nondecreasing)."""
        return np.repeat(
            self.locations, [zero.multiplicity for zero in self.zeros]
        ).astype(float)

    def location(self, index: int) -> float:
        """Zero with the given index, extended periodically beyond the strip."""
        expanded = self.expanded_locations()
        if expanded.size == 0:
            raise IndexError("empty zero set")
        shift, local = divmod(index, expanded.size)
        return float(expanded[local] + shift * self.period)


# ==========================
# Quantities
# ==========================


def compute_quantities(params: CornerParams) -> SpectralQuantities:
    """Evaluate q1, q_star, q2, theta1 and theta2 for a corner.

    Args:
        params (CornerParams): Corner coefficients.

    Returns:
        SpectralQuantities: The closed-form quantities and the period 4*q*pi.

    Raises:
        ValidationError: If k is outside (0, 1), a2 <= 0 or the angle is invalid.
    """
    params.check()
    a2, a3, k = params.a2, params.a3, params.k
    drift = a2 * (1.0 + k) + 2.0 * k * a3
    numerator = (1.0 - k) ** 2 + drift**2
    q2 = math.sqrt(numerator / ((1.0 - k) ** 2 * (1.0 + a2**2)))
    return SpectralQuantities(
        q1=params.p / (2.0 * params.q),
        q_star=(1.0 + k) / (1.0 - k),
        q2=q2,
        theta1=math.atan2(1.0, a2),
        theta2=math.atan2(1.0 - k, -drift),
        period=4.0 * params.q * math.pi,
        params=params,
    )


def classify_q2(params: CornerParams, eq_tol: float = EQ_TOL) -> Q2Classification:
    """Classify q2 against 1 through the exact sign clauses.

    q2 > 1 exactly when (a2 + a3)(a2 + k*a3) > 0, which splits into the
    clauses a3 >= 0, a2 > -a3 > 0 and 0 < a2 < -k*a3. The equality clauses
    a2 = -k*a3 and a2 = -a3 take precedence over floating comparison.
    """
    sq = compute_quantities(params)
    a2, a3, k = params.a2, params.a3, params.k
    size = max(abs(a2), abs(a3), 1.0)
    if abs(a2 + k * a3) <= eq_tol * size:
        return Q2Classification(Q2Regime.EQUAL_ONE, "a2=-k*a3", False, sq.q2)
    if abs(a2 + a3) <= eq_tol * size:
        return Q2Classification(Q2Regime.EQUAL_ONE, "a2=-a3", False, sq.q2)

    if a3 >= 0:
        regime, clause = Q2Regime.GREATER_ONE, "(i) a3>=0"
    elif a2 > -a3:
        regime, clause = Q2Regime.GREATER_ONE, "(ii) a2>-a3>0"
    elif a2 < -k * a3:
        regime, clause = Q2Regime.GREATER_ONE, "(iii) 0<a2<-k*a3"
    else:
        regime, clause = Q2Regime.LESS_ONE, None

    near = abs(sq.q2 - 1.0) < eq_tol
    if near:
        logger.warning(
            "q2=%.17g is within %g of 1 but no equality clause holds; "
            "treating the corner as near-degenerate.",
            sq.q2,
            eq_tol,
        )
    return Q2Classification(regime, clause, near, sq.q2)


# ==========================
# Evaluation
# ==========================


def _check_kind(kind: str) -> str:
    if kind not in (PLUS, MINUS):
        raise ValueError(f"kind must be '{PLUS}' or '{MINUS}', got {kind!r}")
    return kind


def _as_output(values):
    values = np.asarray(values)
    if values.ndim == 0:
        return complex(values)
    return values


def eval_S(kind: str, z, sq: SpectralQuantities):
    """Evaluate S+ or S- at a scalar or an array of complex points."""
    _check_kind(kind)
    z = np.asarray(z, dtype=complex)
    if kind == PLUS:
        values = np.sin(z - sq.theta1) + sq.q2 * np.sin(sq.q1 * z - sq.theta2)
    else:
        values = np.sin(z) - sq.q_star * np.sin(sq.q1 * z)
    return _as_output(values)


def eval_derivative(kind: str, z, sq: SpectralQuantities, order: int = 1):
    """First or second derivative of S+ or S-."""
    _check_kind(kind)
    z = np.asarray(z, dtype=complex)
    q1 = sq.q1
    if order == 1:
        if kind == PLUS:
            values = np.cos(z - sq.theta1) + sq.q2 * q1 * np.cos(q1 * z - sq.theta2)
        else:
            values = np.cos(z) - sq.q_star * q1 * np.cos(q1 * z)
    elif order == 2:
        if kind == PLUS:
            values = -np.sin(z - sq.theta1) - sq.q2 * q1**2 * np.sin(q1 * z - sq.theta2)
        else:
            values = -np.sin(z) + sq.q_star * q1**2 * np.sin(q1 * z)
    else:
        raise ValueError(f"order must be 1 or 2, got {order}")
    return _as_output(values)


def _wrap(location: float, period: float) -> float:
    wrapped = location % period
    if wrapped < 1e-11 * period or period - wrapped < 1e-11 * period:
        wrapped = 0.0
    return wrapped


# ==========================
# Zero location
# ==========================


def _refine(kind, sq, lower, upper):
    """Bracketed refinement with endpoint residual check and Newton polish."""
    tol = RESIDUAL_TOL * sq.scale

    def func(x):
        return eval_S(kind, x, sq).real

    for endpoint in (lower, upper):
        if abs(func(endpoint)) <= tol:
            return endpoint

    lo, hi = lower + BRACKET_SHRINK, upper - BRACKET_SHRINK
    if func(lo) * func(hi) > 0:
        raise BracketFailure(
            f"bracket failure: S{'+' if kind == PLUS else '-'} has no sign change "
            f"on [{lower:.12g}, {upper:.12g}]"
        )
    root = brentq(func, lo, hi, xtol=XTOL)

    slope = eval_derivative(kind, root, sq).real
    if slope != 0.0:
        candidate = root - func(root) / slope
        if lo <= candidate <= hi and abs(func(candidate)) < abs(func(root)):
            root = candidate
    return root


def _records(kind, sq, locations, multiplicities=None):
    order = np.argsort(locations, kind="stable")
    locations = [locations[i] for i in order]
    if multiplicities is None:
        multiplicities = [1] * len(locations)
    else:
        multiplicities = [multiplicities[i] for i in order]

    tol = RESIDUAL_TOL * sq.scale
    zeros = []
    for location, multiplicity in zip(locations, multiplicities):
        residual = abs(eval_S(kind, location, sq))
        if residual > tol:
            raise BracketFailure(
                f"zero at {location:.15g} has residual {residual:.3e} above {tol:.3e}"
            )
        zeros.append(Zero(float(location), int(multiplicity), float(residual)))
    return tuple(zeros)


def _bracketed_zeros(kind, sq, shift):
    """One zero per bracket [(pi(2i-1)+shift)/(2q1), (pi(2i+1)+shift)/(2q1)]."""
    locations = []
    for i in range(2 * sq.params.p):
        lower = (math.pi * (2 * i - 1) + shift) / (2.0 * sq.q1)
        upper = (math.pi * (2 * i + 1) + shift) / (2.0 * sq.q1)
        locations.append(_wrap(_refine(kind, sq, lower, upper), sq.period))
    return _records(kind, sq, locations)


def _merge(locations, period, tol=1e-9):
    locations = sorted(_wrap(x, period) for x in locations)
    merged, counts = [], []
    for x in locations:
        if merged and abs(x - merged[-1]) < tol:
            counts[-1] += 1
        else:
            merged.append(x)
            counts.append(1)
    if len(merged) > 1 and period - merged[-1] + merged[0] < tol:
        counts[0] += counts.pop()
        merged.pop()
    return merged, counts


def _unit_q2_zeros(sq):
    """Closed forms for q2 = 1, where S+ = 2 sin(u) cos(v)."""
    q1, t1, t2, period = sq.q1, sq.theta1, sq.theta2, sq.period
    families = (
        ((t1 + t2) / (1.0 + q1), 2.0 * math.pi / (1.0 + q1)),
        ((math.pi - t1 + t2) / (q1 - 1.0), 2.0 * math.pi / (q1 - 1.0)),
    )
    raw = []
    for start, spacing in families:
        n = math.ceil(-start / spacing)
        while start + n * spacing < period - 1e-12:
            raw.append(start + n * spacing)
            n += 1
    merged, counts = _merge(raw, period)
    return _records(PLUS, sq, merged, counts)


def g_interval_case(sq: SpectralQuantities):
    """Index range (l1, l2) of the intervals enclosing the zeros when q2 < 1.

    Returns:
        tuple: (l1, l2, label); label is "unmatched" when no case applies, in
        which case the widest range -1..2q is returned.
    """
    arcsin_q2 = math.asin(min(sq.q2, 1.0))
    theta1 = sq.theta1
    q = sq.params.q
    if theta1 < arcsin_q2 < math.pi + theta1:
        return 0, 2 * q, "theta1 < arcsin q2 < pi + theta1"
    if theta1 - math.pi < arcsin_q2 < theta1:
        return 0, 2 * q - 1, "theta1 - pi < arcsin q2 < theta1"
    if math.pi - theta1 < arcsin_q2 < math.pi:
        return -1, 2 * q, "pi - theta1 < arcsin q2 < pi"
    logger.warning(
        "No l1, l2 case matches theta1=%.12g, arcsin q2=%.12g; scanning l=-1..%d.",
        theta1,
        arcsin_q2,
        2 * q,
    )
    return -1, 2 * q, "unmatched"


def g_intervals(sq: SpectralQuantities, l1: int, l2: int) -> list:
    """The intervals G_l, l1 <= l <= l2, clipped to the fundamental strip."""
    arcsin_q2 = math.asin(min(sq.q2, 1.0))
    intervals = []
    for l in range(l1, l2 + 1):
        base = sq.theta1 + 2.0 * math.pi * l
        for centre in (base, base + math.pi):
            lower = max(centre - arcsin_q2, 0.0)
            upper = min(centre + arcsin_q2, sq.period)
            if lower < upper:
                intervals.append((lower, upper))
    return intervals


def _multiplicity(kind, sq, location):
    scale = sq.scale
    if abs(eval_derivative(kind, location, sq, 1)) >= 1e-6 * scale:
        return 1
    if abs(eval_derivative(kind, location, sq, 2)) >= 1e-3 * scale:
        return 2
    return 3


def _scanned_zeros(sq):
    """Sign-change scan of S+ over the G_l intervals for q2 < 1."""
    l1, l2, case = g_interval_case(sq)
    triple_possible = abs(sq.q2 * sq.q1 - 1.0) < EQ_TOL * sq.q1

    def func(x):
        return eval_S(PLUS, x, sq).real

    found = []
    for lower, upper in g_intervals(sq, l1, l2):
        grid = np.linspace(lower, upper, SAMPLES_PER_INTERVAL)
        values = eval_S(PLUS, grid, sq).real
        for j in np.nonzero(values == 0.0)[0]:
            found.append(float(grid[j]))
        signs = np.sign(values)
        for j in np.nonzero(signs[:-1] * signs[1:] < 0)[0]:
            root = brentq(func, grid[j], grid[j + 1], xtol=XTOL)
            slope = eval_derivative(PLUS, root, sq).real
            if slope != 0.0 and not triple_possible:
                candidate = root - func(root) / slope
                if grid[j] <= candidate <= grid[j + 1] and abs(func(candidate)) < abs(func(root)):
                    root = candidate
            found.append(float(root))

    merged, _ = _merge(found, sq.period)
    multiplicities = [_multiplicity(PLUS, sq, x) for x in merged]
    if any(m > 1 for m in multiplicities) and not triple_possible:
        logger.warning("Multiple zero of S+ detected away from q2 = 1/q1.")
    return _records(PLUS, sq, merged, multiplicities), case


def polynomial_zeros(kind: str, sq: SpectralQuantities) -> np.ndarray:
    """All 2p zeros per period through the substitution w = exp(iz/(2q)).

    Multiplying S by 2i w^p turns it into a polynomial of degree 2p in w;
    every root w gives the zero z = -2iq log(w), real part wrapped into the
    fundamental strip.
    """
    _check_kind(kind)
    q, p = sq.params.q, sq.params.p
    coeffs = np.zeros(2 * p + 1, dtype=complex)  # coeffs[n] multiplies w**n
    if kind == PLUS:
        coeffs[p + 2 * q] += np.exp(-1j * sq.theta1)
        coeffs[p - 2 * q] -= np.exp(1j * sq.theta1)
        coeffs[2 * p] += sq.q2 * np.exp(-1j * sq.theta2)
        coeffs[0] -= sq.q2 * np.exp(1j * sq.theta2)
    else:
        coeffs[p + 2 * q] += 1.0
        coeffs[p - 2 * q] -= 1.0
        coeffs[2 * p] -= sq.q_star
        coeffs[0] += sq.q_star
    roots = np.roots(coeffs[::-1])
    zeros = -2j * q * np.log(roots)
    real = np.array([_wrap(x, sq.period) for x in zeros.real])
    zeros = real + 1j * zeros.imag
    return zeros[np.argsort(real, kind="stable")]


def locate_complex_zeros(sq: SpectralQuantities, kind: str = PLUS) -> np.ndarray:
    """Non-real zeros per period, sorted by real part."""
    zeros = polynomial_zeros(kind, sq)
    return zeros[np.abs(zeros.imag) > REAL_IMAG_TOL]


def fundamental_box(zero_set: ZeroSet, sq: SpectralQuantities) -> tuple:
    """Counting rectangle holding exactly one periodic copy of each real zero.

    The vertical edges sit in the middle of the gap around 0 and around the
    period; the half-height stays below the smallest |Im z| of complex zeros.
    """
    locations = zero_set.locations
    if locations.size:
        x0 = 0.5 * (locations[0] + locations[-1] - sq.period)
    else:
        x0 = -0.5
    height = 0.5
    if zero_set.kind == PLUS:
        complex_zeros = locate_complex_zeros(sq, PLUS)
        if complex_zeros.size:
            height = min(height, 0.5 * float(np.min(np.abs(complex_zeros.imag))))
    return (x0, x0 + sq.period, -height, height)


def count_zeros_oracle(
    kind: str,
    sq: SpectralQuantities,
    rectangle: tuple,
    points_per_side: int = 1024,
    max_refinements: int = 6,
) -> int:
    """Count zeros inside a rectangle by the winding number of S on its edge.

    Args:
        kind (str): "plus" or "minus".
        sq (SpectralQuantities): Corner quantities.
        rectangle (tuple): (x0, x1, y0, y1) with x0 < x1 and y0 < y1.
        points_per_side (int): Initial samples per edge.
        max_refinements (int): Number of fourfold refinements allowed.

    Returns:
        int: Zeros enclosed, counted with multiplicity.

    Raises:
        BoundaryTooClose: If |S| on the boundary drops below the safety level.
        CountMismatch: If the argument increments stay unresolved.
    """
    _check_kind(kind)
    x0, x1, y0, y1 = rectangle
    corners = [
        complex(x0, y0),
        complex(x1, y0),
        complex(x1, y1),
        complex(x0, y1),
        complex(x0, y0),
    ]
    samples = points_per_side
    for _ in range(max_refinements + 1):
        path = np.concatenate(
            [np.linspace(corners[j], corners[j + 1], samples, endpoint=False) for j in range(4)]
            + [np.array([corners[0]])]
        )
        values = eval_S(kind, path, sq)
        floor = float(np.min(np.abs(values)))
        if floor < ORACLE_SAFETY * sq.scale:
            raise BoundaryTooClose(
                f"boundary too close to zero: min |S| = {floor:.3e} on {rectangle}"
            )
        steps = np.angle(values[1:] / values[:-1])
        if np.max(np.abs(steps)) < ORACLE_MAX_STEP:
            winding = float(np.sum(steps)) / (2.0 * math.pi)
            return int(round(winding))
        samples *= 4
    raise CountMismatch(f"argument increments unresolved on {rectangle}")


def find_zeros(kind: str, sq: SpectralQuantities, verify: bool = True) -> ZeroSet:
    """Locate and certify all zeros of S+ or S- in [0, 4*q*pi).

    Args:
        kind (str): "plus" or "minus".
        sq (SpectralQuantities): Corner quantities.
        verify (bool): Compare the count with count_zeros_oracle.

    Returns:
        ZeroSet: The certified zeros.

    Raises:
        BracketFailure: If a bracket holds no sign change or a residual is too large.
        CountMismatch: If the count disagrees with the oracle.
    """
    _check_kind(kind)
    case = None
    if kind == MINUS:
        zeros = _bracketed_zeros(MINUS, sq, shift=0.0)
    else:
        classification = classify_q2(sq.params)
        if classification.regime is Q2Regime.EQUAL_ONE or classification.near_degenerate:
            zeros = _unit_q2_zeros(sq)
        elif classification.regime is Q2Regime.GREATER_ONE:
            zeros = _bracketed_zeros(PLUS, sq, shift=2.0 * sq.theta2)
        else:
            zeros, case = _scanned_zeros(sq)

    zero_set = ZeroSet(
        kind=kind,
        zeros=zeros,
        period=sq.period,
        count=sum(zero.multiplicity for zero in zeros),
        case=case,
    )
    logger.debug("Found %d zeros of S%s.", zero_set.count, "+" if kind == PLUS else "-")

    if verify:
        oracle = count_zeros_oracle(kind, sq, fundamental_box(zero_set, sq))
        if oracle != zero_set.count:
            raise CountMismatch(
                f"count mismatch: located {zero_set.count} zeros of S"
                f"{'+' if kind == PLUS else '-'}, oracle counts {oracle}"
            )
    return zero_set


# ==========================
# Factorizations
# ==========================


def plus_roots(sq: SpectralQuantities, zero_set: ZeroSet) -> np.ndarray:
    """All 2p zeros of S+ per period, real ones from the certified set."""
    real = zero_set.expanded_locations().astype(complex)
    complex_zeros = locate_complex_zeros(sq, PLUS)
    roots = np.concatenate([real, complex_zeros])
    if roots.size != 2 * sq.params.p:
        logger.warning(
            "Certified and complex zeros give %d roots instead of %d; using polynomial roots.",
            roots.size,
            2 * sq.params.p,
        )
        roots = polynomial_zeros(PLUS, sq)
    return roots


def _unit_q2_product(z, sq, truncation, tail_correction):
    """S+ = 2 sin(u) cos(v) with both Euler products truncated at n <= N."""
    u = 0.5 * ((1.0 + sq.q1) * z - sq.theta1 - sq.theta2)
    v = 0.5 * ((1.0 - sq.q1) * z - sq.theta1 + sq.theta2)
    n = np.arange(1, truncation + 1, dtype=float)
    sine_factors = 1.0 - u**2 / (n * math.pi) ** 2
    cosine_factors = 1.0 - 4.0 * v**2 / ((2.0 * n - 1.0) * math.pi) ** 2
    if u == 0 or np.any(sine_factors == 0) or np.any(cosine_factors == 0):
        return 0j
    log_value = np.log(2.0 * u) + np.sum(np.log(sine_factors)) + np.sum(np.log(cosine_factors))
    if tail_correction:
        log_value -= u**2 / math.pi**2 * polygamma(1, truncation + 1)
        log_value -= v**2 / math.pi**2 * polygamma(1, truncation + 0.5)
    return complex(np.exp(log_value))


def eval_factorization(
    kind: str,
    z,
    sq: SpectralQuantities,
    truncation: int,
    zeros: ZeroSet | None = None,
    tail_correction: bool = True,
) -> complex:
    """Evaluate the truncated infinite product of S+ or S-.

    All fundamental-strip factors are exact; the periodic copies n = 1..N
    are paired symmetrically and summed in log space. The neglected tail
    n > N is estimated through the trigamma function when requested.

    Args:
        kind (str): "plus" or "minus".
        z (complex): Evaluation point.
        sq (SpectralQuantities): Corner quantities.
        truncation (int): Number N >= 1 of periodic shifts kept.
        zeros (ZeroSet, optional): Precomputed zeros of the same kind.
        tail_correction (bool): Add the asymptotic tail estimate.

    Returns:
        complex: The product value.
    """
    _check_kind(kind)
    if truncation < 1:
        raise ValueError("truncation must be at least 1")
    z = complex(z)
    period = sq.period

    if kind == PLUS:
        classification = classify_q2(sq.params)
        if classification.regime is Q2Regime.EQUAL_ONE or classification.near_degenerate:
            return _unit_q2_product(z, sq, truncation, tail_correction)

    zero_set = zeros if zeros is not None else find_zeros(kind, sq)
    n = np.arange(1, truncation + 1, dtype=float)[:, None]

    if kind == MINUS:
        roots = zero_set.expanded_locations()
        inner = 1.0 - (z / roots[1:]) ** 2
        outer = 1.0 - (z / (roots[None, :] + n * period)) ** 2
        if z == 0 or np.any(inner == 0) or np.any(outer == 0):
            return 0j
        log_value = (
            np.log(complex(1.0 - sq.q1 * sq.q_star))
            + np.log(z)
            + np.sum(np.log(inner))
            + np.sum(np.log(outer))
        )
        if tail_correction:
            log_value -= z**2 / period**2 * np.sum(polygamma(1, truncation + 1 + roots / period))
        return complex(np.exp(log_value))

    roots = plus_roots(sq, zero_set)
    inner = 1.0 - z / roots
    outer = (1.0 - z / (roots[None, :] + n * period)) * (1.0 - z / (roots[None, :] - n * period))
    if np.any(inner == 0) or np.any(outer == 0):
        return 0j
    value_at_zero = -(math.sin(sq.theta1) + sq.q2 * math.sin(sq.theta2))
    log_value = np.log(complex(value_at_zero)) + np.sum(np.log(inner)) + np.sum(np.log(outer))
    if tail_correction:
        log_value -= (
            (2 * sq.params.p * z**2 - 2.0 * z * np.sum(roots)) / period**2
        ) * polygamma(1, truncation + 1)
    return complex(np.exp(log_value))


# ==========================
# CornerSpectrum
# ==========================


@dataclass(frozen=True)
class CornerSpectrum:
    """Quantities, q2 classification and both zero sets of one corner."""

    params: CornerParams
    quantities: SpectralQuantities
    classification: Q2Classification
    zeros_plus: ZeroSet
    zeros_minus: ZeroSet


def corner_spectrum(
    params: CornerParams, verify: bool = True, eq_tol: float = EQ_TOL
) -> CornerSpectrum:
    """Compute the full spectral description of a corner."""
    quantities = compute_quantities(params)
    classification = classify_q2(params, eq_tol=eq_tol)
    return CornerSpectrum(
        params=params,
        quantities=quantities,
        classification=classification,
        zeros_plus=find_zeros(PLUS, quantities, verify=verify),
        zeros_minus=find_zeros(MINUS, quantities, verify=verify),
    )
