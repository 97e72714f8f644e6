"""Mellin-type symbol of a corner problem and its homogeneous Gamma-product solution.

With r = i*zeta + s + 2 the symbol G(zeta) is a ratio of trigonometric
functions of r; along zeta = -i*(s_star - 2)*nu it coincides with
-sqrt(1 + a2^2) * S+(z) / S-(z), z = 2*delta*(s + 2 + (s_star - 2)*nu).

V0 solves mu*V0(nu + 1) = (s + 2 + (s_star - 2)*nu) * G(-i(s_star - 2)nu) * V0(nu).
It is assembled from log-Gamma factors, one per zero of S+ and S-, grouped in
blocks of periodic copies, times a 1-periodic sine ratio that removes the
first poles on the right. Every block is O(1/n^2), and the neglected tail is
fitted from three blocks spread over the truncation range.
"""

# Standard library imports
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

# Related third-party imports
import numpy as np
from scipy.special import loggamma
from scipy.special import zeta as hurwitz_zeta

# Local application/library specific imports
from .errors import PoleProximity, PoleStripViolation, ValidationError
from .spectral import (
    MINUS,
    PLUS,
    CornerParams,
    CornerSpectrum,
    compute_quantities,
    corner_spectrum,
    eval_S,
    plus_roots,
)
from .weights import THREE, select_thresholds


logger = logging.getLogger(__name__)

POLE_TOL = 1e-12
STRIP_TOL = 1e-8


@dataclass(frozen=True)
class SymbolParams:
    """Corner data together with the weight s and the data exponent s_star."""

    corner: CornerParams
    s: float
    s_star: float

    def __post_init__(self):
        if not self.s_star > 2:
            raise ValidationError(f"s_star must exceed 2, got {self.s_star}")

    @property
    def s_hat(self) -> float:
        return (2.0 + self.s) / (self.s_star - 2.0)

    @property
    def slope(self) -> float:
        return self.s_star - 2.0

    @property
    def delta(self) -> float:
        return self.corner.delta


# ==========================
# Trigonometric symbol
# ==========================


def _r(zeta, sp):
    return 1j * np.asarray(zeta, dtype=complex) + sp.s + 2.0


def _check_pole(denominator, scale, what, pole_tol):
    modulus = np.abs(denominator)
    floor = float(np.min(modulus / scale))
    if floor < pole_tol:
        raise PoleProximity(f"pole proximity: |{what}| = {floor:.3e} relative to its scale")


def _scalar(values):
    values = np.asarray(values)
    return complex(values) if values.ndim == 0 else values


def _n_parts(zeta, sp, pole_tol):
    c = sp.corner
    r = _r(zeta, sp)
    lower = r * (sp.delta - 0.5 * math.pi)
    upper = r * (sp.delta + 0.5 * math.pi)
    numerator = np.cos(lower) + c.a3 * np.sin(lower)
    denominator = np.cos(upper) + c.k * c.a3 * np.sin(upper)
    _check_pole(denominator, 1.0 + np.abs(np.cos(upper)) + np.abs(c.k * c.a3 * np.sin(upper)), "N denominator", pole_tol)
    return r, lower, upper, numerator / denominator


def eval_N(zeta, sp: SymbolParams, pole_tol: float = POLE_TOL):
    """N(zeta) = [cos r(d - pi/2) + a3 sin r(d - pi/2)] / [cos r(d + pi/2) + k a3 sin r(d + pi/2)]."""
    return _scalar(_n_parts(zeta, sp, pole_tol)[3])


def eval_N1(zeta, sp: SymbolParams, pole_tol: float = POLE_TOL):
    """N1(zeta) = k N sin r(d + pi/2) - sin r(d - pi/2)."""
    _, lower, upper, n_value = _n_parts(zeta, sp, pole_tol)
    return _scalar(sp.corner.k * n_value * np.sin(upper) - np.sin(lower))


def eval_N2(zeta, sp: SymbolParams, pole_tol: float = POLE_TOL):
    """N2 = [cot r(d - pi/2) + a3] / [cot r(d + pi/2) + k a3] at r = i*zeta + s + 2."""
    c = sp.corner
    r = _r(zeta, sp)
    lower = r * (sp.delta - 0.5 * math.pi)
    upper = r * (sp.delta + 0.5 * math.pi)
    _check_pole(np.sin(lower), 1.0, "sin r(d - pi/2)", pole_tol)
    _check_pole(np.sin(upper), 1.0, "sin r(d + pi/2)", pole_tol)
    cot_lower = np.cos(lower) / np.sin(lower)
    cot_upper = np.cos(upper) / np.sin(upper)
    denominator = cot_upper + c.k * c.a3
    _check_pole(denominator, 1.0 + np.abs(cot_upper) + abs(c.k * c.a3), "N2 denominator", pole_tol)
    return _scalar((cot_lower + c.a3) / denominator)


def eval_G(zeta, sp: SymbolParams, pole_tol: float = POLE_TOL):
    """Symbol G(zeta) = [k N cos r(d + pi/2) - cos r(d - pi/2)] / N1 - a2.

    Raises:
        PoleProximity: If N1 or the denominator of N nearly vanishes.
    """
    c = sp.corner
    _, lower, upper, n_value = _n_parts(zeta, sp, pole_tol)
    n1 = c.k * n_value * np.sin(upper) - np.sin(lower)
    _check_pole(n1, 1.0 + np.abs(c.k * n_value * np.sin(upper)) + np.abs(np.sin(lower)), "N1", pole_tol)
    return _scalar((c.k * n_value * np.cos(upper) - np.cos(lower)) / n1 - c.a2)


def eval_G_pullback(nu, sp: SymbolParams, pole_tol: float = POLE_TOL):
    """G(-i(s_star - 2) nu)."""
    return eval_G(-1j * sp.slope * np.asarray(nu, dtype=complex), sp, pole_tol)


def G_through_S(nu, sp: SymbolParams):
    """-sqrt(1 + a2^2) S+(z) / S-(z) at z = 2 delta (s + 2 + (s_star - 2) nu)."""
    sq = compute_quantities(sp.corner)
    z = 2.0 * sp.delta * (sp.s + 2.0 + sp.slope * np.asarray(nu, dtype=complex))
    return _scalar(-math.sqrt(1.0 + sp.corner.a2**2) * eval_S(PLUS, z, sq) / eval_S(MINUS, z, sq))


def G_at_zero(sp: SymbolParams) -> float:
    """Closed form of G(0)."""
    sq = compute_quantities(sp.corner)
    r = sp.s + 2.0
    numerator = math.sin(2.0 * sp.delta * r - sq.theta1) + sq.q2 * math.sin(math.pi * r - sq.theta2)
    denominator = math.sin(sq.theta1) * (math.sin(2.0 * sp.delta * r) - sq.q_star * math.sin(math.pi * r))
    if abs(denominator) < POLE_TOL:
        raise PoleProximity("pole proximity: G(0) denominator vanishes for this weight")
    return -numerator / denominator


def G_limits(sp: SymbolParams) -> tuple:
    """Limits of G(zeta) as Re zeta -> +inf and -inf."""
    sq = compute_quantities(sp.corner)
    modulus = sq.q2 / (sq.q_star * math.sin(sq.theta1))
    return modulus * np.exp(1j * sq.theta2), modulus * np.exp(-1j * sq.theta2)


def identity_residual(nu, sp: SymbolParams) -> float:
    """Relative gap between the trigonometric G and its S+/S- form."""
    direct = eval_G_pullback(nu, sp)
    through_s = G_through_S(nu, sp)
    return float(abs(direct - through_s) / max(abs(through_s), 1e-300))


# ==========================
# Gamma product
# ==========================


@dataclass(frozen=True)
class GammaProductState:
    """Shifted zeros Z = zeta/u - s_hat, u = 2 delta (s_star - 2), of one corner.

    Attributes:
        plus (np.ndarray): Z of all 2p zeros of S+ in the fundamental strip.
        minus (np.ndarray): Z of all 2p zeros of S- in the strip; minus[0] comes from zeta = 0.
        spacing (float): Shift of Z between periodic copies, period/u.
        s_hat (float): (2 + s)/(s_star - 2).
        d_const (float): Constant factor of the multiplier, negative.
        log_d (complex): Principal log of d_const, arg in (-pi, pi].
        truncation (int): Number of periodic blocks kept.
        threshold (int): Smallest i with z+_{i-1}/(2 delta) < 3 <= z+_i/(2 delta).
        sine_zeros (np.ndarray): Z-_1 .. Z-_{threshold + 2}, zeros of the periodic factor shifted by one.
        sine_poles (np.ndarray): Z+_0 .. Z+_{threshold - 1}, poles of the periodic factor shifted by one.
    """

    plus: np.ndarray
    minus: np.ndarray
    spacing: float
    s_hat: float
    d_const: float
    log_d: complex
    truncation: int
    threshold: int
    sine_zeros: np.ndarray
    sine_poles: np.ndarray

    def shifted(self, kind: str, n: int) -> np.ndarray:
        """Z of the n-th periodic copy (n may be negative)."""
        base = self.plus if kind == PLUS else self.minus
        values = base + n * self.spacing
        if kind == MINUS and n == 0:
            values = values[1:]
        return values


def build_gamma_state(
    sp: SymbolParams, truncation: int = 1000, spectrum: CornerSpectrum | None = None
) -> GammaProductState:
    """Collect the shifted zeros, the constant of the multiplier and the periodic factor.

    Raises:
        NoThreshold: If no zero of S+ crosses 3 * 2 delta.
    """
    if truncation < 2:
        raise ValueError("truncation must be at least 2")
    if spectrum is None:
        spectrum = corner_spectrum(sp.corner, verify=False)
    sq = spectrum.quantities
    u = 2.0 * sp.delta * sp.slope
    s_hat = sp.s_hat

    plus = np.asarray(plus_roots(sq, spectrum.zeros_plus), dtype=complex) / u - s_hat
    minus = spectrum.zeros_minus.expanded_locations().astype(complex) / u - s_hat
    if abs(spectrum.zeros_minus.location(0)) > 1e-12:
        raise ValidationError("S- must vanish at 0")

    threshold = select_thresholds(spectrum.zeros_plus, sp.delta, THREE).index
    sine_zeros = np.array([spectrum.zeros_minus.location(i) for i in range(1, threshold + 3)]) / u - s_hat
    sine_poles = np.array([spectrum.zeros_plus.location(i) for i in range(threshold)]) / u - s_hat

    value_at_zero = -(math.sin(sq.theta1) + sq.q2 * math.sin(sq.theta2))
    d_const = (
        -math.sqrt(1.0 + sp.corner.a2**2) * value_at_zero / (2.0 * sp.delta * (1.0 - sq.q1 * sq.q_star))
    )
    log_d = complex(math.log(abs(d_const)), math.pi if d_const < 0 else 0.0)
    return GammaProductState(
        plus=plus,
        minus=minus,
        spacing=sq.period / u,
        s_hat=s_hat,
        d_const=d_const,
        log_d=log_d,
        truncation=truncation,
        threshold=threshold,
        sine_zeros=sine_zeros,
        sine_poles=sine_poles,
    )


def pole_strip(sp: SymbolParams, state: GammaProductState | None = None) -> tuple:
    """Vertical band (left, right) of Re nu where V0 is analytic off the pole lines.

    The left edge is the largest pole of Gamma(nu - Z) over the negative copies
    of S+ zeros. Poles of Gamma(Z + 1 - nu) over S- zeros are cancelled by the
    periodic factor up to the zero with index threshold + 2, which bounds the
    band on the right.
    """
    state = state or build_gamma_state(sp, truncation=2)
    left = float(np.max(state.shifted(PLUS, -1).real))
    right = float(state.sine_zeros[-1]) + 1.0
    return left, right


def pole_lines(sp: SymbolParams, state: GammaProductState | None = None) -> np.ndarray:
    """Abscissae 1 + Z+_i - l, l >= 1, of the periodic factor's poles inside the strip."""
    state = state or build_gamma_state(sp, truncation=2)
    left, right = pole_strip(sp, state)
    lines = []
    for pole in state.sine_poles:
        line = float(pole)
        while line > right:
            line -= 1.0
        while line > left:
            if line < right:
                lines.append(line)
            line -= 1.0
    return np.sort(np.array(lines, dtype=float))


def central_abscissa(sp: SymbolParams, state: GammaProductState | None = None, width: float = 0.0) -> float:
    """Middle of the widest gap between pole lines with room for a shift by `width`."""
    state = state or build_gamma_state(sp, truncation=2)
    left, right = pole_strip(sp, state)
    edges = np.concatenate([[left], pole_lines(sp, state), [right - width]])
    edges = np.sort(edges[edges <= right - width])
    gaps = np.diff(edges)
    widest = int(np.argmax(gaps))
    return float(0.5 * (edges[widest] + edges[widest + 1]))


def _positive_terms(Z, nu, s_hat):
    return (nu - 0.5) * -np.log(Z + s_hat) - loggamma(Z + 1.0 - nu) + loggamma(Z + 0.5)


def _negative_terms(Z, nu, s_hat):
    return (nu - 0.5) * -np.log(-Z - s_hat) + loggamma(nu - Z) - loggamma(0.5 - Z)


def _log_sin(w):
    """log sin(w) without overflow for large |Im w|."""
    w = np.asarray(w, dtype=complex)
    sign = np.where(w.imag >= 0, 1.0, -1.0)
    return -1j * sign * w + np.log1p(-np.exp(2j * sign * w)) + np.log(0.5j * sign)


def log_periodic_factor(nu, state: GammaProductState) -> complex:
    """log of prod sin pi(1 + Z-_i - nu) / prod sin pi(1 + Z+_i - nu); the factor has period 1."""
    numerator = _log_sin(math.pi * (1.0 + state.sine_zeros - nu))
    denominator = _log_sin(math.pi * (1.0 + state.sine_poles - nu))
    return _fsum(numerator) - _fsum(denominator)


def _fsum(values) -> complex:
    values = np.asarray(values, dtype=complex).ravel()
    return complex(math.fsum(values.real), math.fsum(values.imag))


def _blocks(state, nu):
    """Block sums for n = 1..N, positive copy n paired with negative copy -n."""
    n = np.arange(1, state.truncation + 1, dtype=float)[:, None]
    s_hat, a = state.s_hat, state.spacing
    plus = _positive_terms(state.plus[None, :] + n * a, nu, s_hat) + _negative_terms(
        state.plus[None, :] - n * a, nu, s_hat
    )
    minus = _positive_terms(state.minus[None, :] + n * a, nu, s_hat) + _negative_terms(
        state.minus[None, :] - n * a, nu, s_hat
    )
    return np.sum(plus, axis=1) - np.sum(minus, axis=1)


def _tail(blocks, truncation):
    """Fit t_n = c2/n^2 + c3/n^3 + c4/n^4 at n = N/4, N/2, N and sum it over n > N."""
    samples = np.array([max(truncation // 4, 1), max(truncation // 2, 2), truncation])
    powers = np.arange(2, 5)
    matrix = samples[:, None].astype(float) ** -powers[None, :]
    coefficients = np.linalg.solve(matrix.astype(complex), blocks[samples - 1])
    return complex(np.sum(coefficients * hurwitz_zeta(powers, truncation + 1.0)))


class V0Evaluation(NamedTuple):
    value: complex
    log_value: complex
    tail: complex


def check_strip(nu, sp: SymbolParams, state: GammaProductState, strip_tol: float = STRIP_TOL):
    left, right = pole_strip(sp, state)
    x = complex(nu).real
    if not left + strip_tol < x < right - strip_tol:
        raise PoleStripViolation(
            f"pole strip violation: Re nu = {x:.12g} outside ({left:.12g}, {right:.12g})"
        )
    lines = pole_lines(sp, state)
    if lines.size and float(np.min(np.abs(lines - x))) <= strip_tol:
        line = float(lines[np.argmin(np.abs(lines - x))])
        raise PoleStripViolation(f"pole strip violation: Re nu = {x:.12g} on the pole line {line:.12g}")


def eval_V0(
    nu,
    mu,
    sp: SymbolParams,
    N: int = 1000,
    tail_correction: bool = True,
    state: GammaProductState | None = None,
    strip_tol: float = STRIP_TOL,
) -> V0Evaluation:
    """Homogeneous solution V0(nu, mu) on the strip of pole_strip.

    V0 = (d/mu)^(nu - 1/2) * P(nu) * (Gamma blocks), with P the 1-periodic
    sine ratio of log_periodic_factor.

    Args:
        nu (complex): Point with Re nu inside pole_strip and off pole_lines.
        mu (complex): Laplace variable, nonzero.
        sp (SymbolParams): Corner, weight and data exponent.
        N (int): Number of periodic blocks, at least 10.
        tail_correction (bool): Add the fitted tail beyond block N.
        state (GammaProductState, optional): Precomputed shifted zeros.
        strip_tol (float): Distance kept from the strip edges and pole lines.

    Returns:
        V0Evaluation: Value, its logarithm and the tail estimate included in it.

    Raises:
        PoleStripViolation: If Re nu is outside the strip or on a pole line.
    """
    if N < 10:
        raise ValueError("N must be at least 10")
    if mu == 0:
        raise ValueError("mu must be nonzero")
    if state is None or state.truncation != N:
        state = build_gamma_state(sp, truncation=N)
    nu = complex(nu)
    check_strip(nu, sp, state, strip_tol)

    head = _fsum(_positive_terms(state.shifted(PLUS, 0), nu, state.s_hat)) - _fsum(
        _positive_terms(state.shifted(MINUS, 0), nu, state.s_hat)
    )
    blocks = _blocks(state, nu)
    tail = _tail(blocks, N) if tail_correction else 0j
    log_value = (
        (nu - 0.5) * (state.log_d - np.log(complex(mu)))
        + log_periodic_factor(nu, state)
        + head
        + _fsum(blocks)
        + tail
    )
    return V0Evaluation(value=complex(np.exp(log_value)), log_value=complex(log_value), tail=tail)


def functional_equation_residual(
    nu,
    mu,
    sp: SymbolParams,
    N: int = 1000,
    tail_correction: bool = True,
    state: GammaProductState | None = None,
) -> float:
    """|mu V0(nu+1) - (s + 2 + (s_star - 2) nu) G V0(nu)| / |mu V0(nu+1)|."""
    if state is None or state.truncation != N:
        state = build_gamma_state(sp, truncation=N)
    nu = complex(nu)
    multiplier = (sp.s + 2.0 + sp.slope * nu) * eval_G_pullback(nu, sp)
    left = np.log(complex(mu)) + eval_V0(nu + 1.0, mu, sp, N, tail_correction, state).log_value
    right = np.log(complex(multiplier)) + eval_V0(nu, mu, sp, N, tail_correction, state).log_value
    return float(abs(1.0 - np.exp(right - left)))


def expected_decay_rate(
    sp: SymbolParams, mu, state: GammaProductState | None = None, side: int = 1
) -> float:
    """Slope of log|V0(x + iy)| in |y| as y -> side * inf.

    The Gamma blocks grow like exp((p*pi - pi * sum(Re zeta+)/period)|y|) on
    both sides, the sum running over the 2p zeros of S+ in the fundamental
    strip. The periodic factor adds 2*pi and (d/mu)^(nu - 1/2) adds
    -side * (arg d - arg mu).
    """
    if side not in (1, -1):
        raise ValueError(f"side must be 1 or -1, got {side}")
    state = state or build_gamma_state(sp, truncation=2)
    u = 2.0 * sp.delta * sp.slope
    zeta_sum = float(np.sum((state.plus + state.s_hat).real)) * u
    period = state.spacing * u
    blocks = sp.corner.p * math.pi - math.pi * zeta_sum / period
    periodic = math.pi * (state.sine_zeros.size - state.sine_poles.size)
    return blocks + periodic - side * (state.log_d.imag - float(np.angle(complex(mu))))


def fit_decay_rate(
    sp: SymbolParams, mu, x: float, heights, N: int = 1000, state: GammaProductState | None = None
) -> float:
    """Least-squares |y|-coefficient of log|V0(x + iy)| against the basis [1, |y|, ln |y|].

    All heights must lie on one side of the real axis.
    """
    if state is None or state.truncation != N:
        state = build_gamma_state(sp, truncation=N)
    heights = np.asarray(heights, dtype=float)
    if not (np.all(heights > 0) or np.all(heights < 0)):
        raise ValueError("heights must share one sign")
    values = np.array([eval_V0(complex(x, y), mu, sp, N, True, state).log_value.real for y in heights])
    distance = np.abs(heights)
    basis = np.column_stack([np.ones_like(distance), distance, np.log(distance)])
    coefficients, *_ = np.linalg.lstsq(basis, values, rcond=None)
    return float(coefficients[1])


def residual_table(points, sp: SymbolParams, N: int = 1000, tail_correction: bool = True) -> list:
    """Rows (nu, mu, residual, truncation, tail) for the functional-equation check."""
    state = build_gamma_state(sp, truncation=N)
    rows = []
    for nu, mu in points:
        residual = functional_equation_residual(nu, mu, sp, N, tail_correction, state)
        tail = eval_V0(nu, mu, sp, N, tail_correction, state).tail
        rows.append(
            {
                "nu": complex(nu),
                "mu": complex(mu),
                "residual": residual,
                "truncation": N,
                "tail": abs(tail),
            }
        )
        logger.debug("Residual at nu=%s, mu=%s: %.3e", nu, mu, residual)
    return rows


def sample_strip_points(sp: SymbolParams, count: int, rng, height: float = 5.0) -> list:
    """Random (nu, mu) with nu and nu + 1 inside the strip and away from the pole lines."""
    state = build_gamma_state(sp, truncation=2)
    left, right = pole_strip(sp, state)
    lines = pole_lines(sp, state)
    margin = min(0.1, 0.25 * (right - left - 1.0))
    points = []
    attempts = 0
    while len(points) < count:
        attempts += 1
        if attempts > 1000 * max(count, 1):
            raise PoleStripViolation("pole strip violation: no room between the pole lines")
        x = rng.uniform(left + margin, right - 1.0 - margin)
        if lines.size and min(np.min(np.abs(lines - x)), np.min(np.abs(lines - x - 1.0))) < margin:
            continue
        y = rng.uniform(-height, height)
        mu = complex(rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0))
        points.append((complex(x, y), mu))
    return points
