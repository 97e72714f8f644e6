#!/usr/bin/env python3

"""Command-line entry point of the corner analysis.

It reads the layered configuration, runs the assumption checks in dependency
order and dispatches to the subcommands spectrum, weights, symbol,
solve-initial, evolve and report.
"""

# Standard library imports
import argparse
import configparser
import copy
import logging
import math
import os
import re
import sys
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

# Related third-party imports
import numpy as np
import orjson
from filelock import FileLock, Timeout

# Local application/library specific imports
from .elliptic import (
    PhysicsSpec,
    check_h4,
    default_pressure_data,
    extract_alpha,
    field_corner_fit,
    linearized_coeffs,
    max_principle_check,
    solve_initial_pressure,
)
from .errors import (
    AssumptionOverrideWarning,
    ConfigurationError,
    GeometryError,
    InsufficientDecayData,
    LockError,
    MuskatError,
    NumericalFailure,
    ValidationError,
)
from .evolution import InterfaceEvolution, TimeSpec, initial_velocity, run, waiting_time_report
from .geometry import DomainSpec, MeshSpec, build_domain, validate_domain
from .spectral import CornerParams, corner_spectrum
from .state import (
    FileUtility,
    ManifestUtility,
    aggregate_report,
    write_field_csv,
    write_mesh,
    write_residual_csv,
    write_trace_csv,
    write_trajectory_csv,
    write_zero_csv,
)
from .symbol import (
    SymbolParams,
    G_at_zero,
    G_limits,
    build_gamma_state,
    central_abscissa,
    expected_decay_rate,
    fit_decay_rate,
    pole_lines,
    pole_strip,
    residual_table,
    sample_strip_points,
)
from .weights import (
    global_weights,
    h7_window,
    limsup_weights,
    pi_fraction,
    s_star_window,
)


# Constants
DEFAULT_LOCK_FILE = ".muskatcorner.lock"  # Prevents concurrent runs on one output directory
DEFAULT_TIMEOUT = 1  # Default timeout in seconds for acquiring the lock
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

COMMANDS = ("spectrum", "weights", "symbol", "solve-initial", "evolve", "report")

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    "domain": {
        "a": 1.0,
        "a1": 1.5,
        "a2_len": 0.5,
        "delta0": "pi/6",
        "delta1": "pi/6",
        "eps": 0.05,
        "profile": "auto",
    },
    "physics": {"k1": 1.0, "k2": 0.5, "c1": 0.05, "c2": 1.0, "s_star": 3.5},
    "weights": {"s": "", "m_max": 6, "truncation": 1000, "samples": 10},
    "mesh": {"rows": 40, "inner_columns": 8, "outer_columns": 16, "grading": 3.0},
    "time": {"t_end": 0.002, "dt": 0.0005, "scheme": "euler", "output_every": 1, "max_steps": 50},
    "tolerances": {
        "eq_tol": 1e-12,
        "q_unit_tol": 1e-10,
        "residual_tol": 1e-12,
        "pole_tol": 1e-12,
        "strip_tol": 1e-8,
        "seam_tol": 0.05,
        "spread_tol": 0.10,
        "h4_corner_radius": 0.05,
        "angle_tol": 1e-10,
    },
    "overrides": {"force": False, "h4": False, "windows": False},
    "output": {"dir": "output", "seed": 0},
}


# ==========================
# LockManager
# ==========================


class LockManager:
    """A manager class for acquiring and releasing file-based locks.

    Attributes:
        lock_path (str): Path to the lock file.
        _has_lock (bool): Indicator if the lock is currently held.
        _file_lock (FileLock): File lock instance.

    Example Usage:
        with LockManager(path) as lock:
            # Protected code here.
            pass
    """

    def __init__(self, lock_path=None):
        self.lock_path = lock_path or os.path.join(os.getcwd(), DEFAULT_LOCK_FILE)
        self._has_lock = False
        self._file_lock = FileLock(self.lock_path, timeout=DEFAULT_TIMEOUT)

    def __enter__(self):
        self.acquire_lock()
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.release_lock()

    def acquire_lock(self):
        """Acquires the file lock.

        Raises:
            LockError: If another run holds the lock past the timeout.
        """
        try:
            self._file_lock.acquire()
            self._has_lock = True
        except Timeout:
            logger.warning(
                "Timeout occurred when trying to acquire lock for file %s.",
                self.lock_path,
            )
            raise LockError(f"output directory is locked by another run: {self.lock_path}") from None
        except Exception:
            logger.exception("Unexpected error when trying to acquire lock.")
            raise

    def release_lock(self):
        """Releases the file lock if it's acquired."""
        if not self._has_lock:
            logger.warning("Attempt to release a lock that was not acquired by this instance.")
            return
        try:
            self._file_lock.release()
            self._has_lock = False
        except Exception:
            logger.exception("Error occurred while trying to release the lock.")
            raise


# ==========================
# ConfigManager
# ==========================


class ConfigManager:
    def __init__(self, default_config=None, config_file=None, cmd_args=None):
        """Initialize the ConfigManager with default configuration, a
        configuration file, and/or command line arguments.

        Args:
            default_config (dict, optional): Nested default values. Defaults to DEFAULT_CONFIG.
            config_file (str, optional): Path to an INI or JSON configuration file.
            cmd_args (argparse.Namespace, optional): Command line arguments.
        """
        self.logger = logging.getLogger(__name__)
        self.config = copy.deepcopy(default_config if default_config is not None else DEFAULT_CONFIG)

        if config_file:
            self._load_config_from_file(config_file)

        if cmd_args:
            self.update_from_args(cmd_args)

    def _merge(self, sections: dict) -> None:
        for section, values in sections.items():
            if isinstance(values, dict):
                self.config.setdefault(section, {}).update(values)
            else:
                self.config[section] = values

    def _load_config_from_file(self, config_path: str) -> None:
        """Load configurations from an INI file, or JSON when the name ends in .json."""
        if not config_path:
            return

        try:
            if config_path.endswith(".json"):
                with open(config_path, "rb") as file:
                    self._merge(orjson.loads(file.read()))
            else:
                parser = configparser.ConfigParser()
                with open(config_path, "r", encoding="utf-8") as file:
                    parser.read_file(file)
                self._merge({name: dict(parser[name]) for name in parser.sections()})
        except FileNotFoundError:
            self.logger.error("Configuration file %s not found.", config_path)
        except (orjson.JSONDecodeError, configparser.Error):
            self.logger.error("Error decoding configuration file %s.", config_path)
        except Exception as error:
            self.logger.error(
                "Unexpected error while reading configuration file %s: %s",
                config_path,
                error,
            )

    def update_from_args(self, cmd_args) -> None:
        """Update configurations from command line arguments.

        Args:
            cmd_args (argparse.Namespace or dict): Parsed arguments; None values are ignored.
        """
        values = vars(cmd_args) if isinstance(cmd_args, argparse.Namespace) else dict(cmd_args)
        targets = {"out": ("output", "dir"), "seed": ("output", "seed"), "s": ("weights", "s")}
        for name, (section, key) in targets.items():
            if values.get(name) is not None:
                self.config.setdefault(section, {})[key] = values[name]
        if values.get("force"):
            self.config.setdefault("overrides", {})["force"] = True


# ==========================
# RunConfig
# ==========================


_ANGLE = re.compile(r"^\s*(?:(\d+(?:\.\d*)?)\s*\*?\s*)?pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_angle(value) -> float:
    """Angle in radians from a number or a string such as "pi/6" or "2*pi/9"."""
    if isinstance(value, str):
        match = _ANGLE.match(value)
        if match:
            numerator = float(match.group(1)) if match.group(1) else 1.0
            denominator = float(match.group(2)) if match.group(2) else 1.0
            return numerator * math.pi / denominator
    return float(value)


def parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(value)


def parse_optional_float(value):
    if value is None or (isinstance(value, str) and not value.strip()):
        return None
    return float(value)


_CONVERTERS = {
    "float": float,
    "int": int,
    "str": str,
    "bool": parse_bool,
    "angle": parse_angle,
    "optional float": parse_optional_float,
}


def _read(mapping: dict, section: str, key: str, kind: str):
    try:
        raw = mapping[section][key]
    except (KeyError, TypeError):
        raise ConfigurationError(f"missing key '{section}.{key}' (expected {kind})") from None
    try:
        return _CONVERTERS[kind](raw)
    except (TypeError, ValueError):
        raise ConfigurationError(
            f"invalid value {raw!r} for '{section}.{key}' (expected {kind})"
        ) from None


@dataclass(frozen=True)
class Tolerances:
    """Every numerical tolerance of a run, with its default."""

    eq_tol: float = 1e-12
    q_unit_tol: float = 1e-10
    residual_tol: float = 1e-12
    pole_tol: float = 1e-12
    strip_tol: float = 1e-8
    seam_tol: float = 0.05
    spread_tol: float = 0.10
    h4_corner_radius: float = 0.05
    angle_tol: float = 1e-10


@dataclass(frozen=True)
class Overrides:
    force: bool = False
    h4: bool = False
    windows: bool = False

    def allows(self, verdict_name: str) -> bool:
        # no mesh can be built without a valid geometry
        if verdict_name == "geometry":
            return False
        if self.force:
            return True
        return {"h4": self.h4, "windows": self.windows}.get(verdict_name, False)


@dataclass(frozen=True)
class RunConfig:
    """Typed configuration of a run."""

    domain: DomainSpec
    physics: PhysicsSpec
    s_star: float
    s: Optional[float]
    m_max: int
    truncation: int
    samples: int
    mesh: MeshSpec
    time: TimeSpec
    tolerances: Tolerances
    overrides: Overrides
    out_dir: str
    seed: int
    corner: Optional[CornerParams] = None

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RunConfig":
        """Convert the layered dictionary into typed records.

        Raises:
            ConfigurationError: Naming the missing or malformed key and its expected type.
        """
        domain = DomainSpec(
            a=_read(mapping, "domain", "a", "float"),
            a1=_read(mapping, "domain", "a1", "float"),
            a2_len=_read(mapping, "domain", "a2_len", "float"),
            delta0=_read(mapping, "domain", "delta0", "angle"),
            delta1=_read(mapping, "domain", "delta1", "angle"),
            eps=_read(mapping, "domain", "eps", "float"),
            profile=_read(mapping, "domain", "profile", "str"),
        )
        physics = PhysicsSpec(
            k1=_read(mapping, "physics", "k1", "float"),
            k2=_read(mapping, "physics", "k2", "float"),
            c1=_read(mapping, "physics", "c1", "float"),
            c2=_read(mapping, "physics", "c2", "float"),
        )
        mesh = MeshSpec(
            rows=_read(mapping, "mesh", "rows", "int"),
            inner_columns=_read(mapping, "mesh", "inner_columns", "int"),
            outer_columns=_read(mapping, "mesh", "outer_columns", "int"),
            grading=_read(mapping, "mesh", "grading", "float"),
        )
        try:
            time = TimeSpec(
                t_end=_read(mapping, "time", "t_end", "float"),
                dt=_read(mapping, "time", "dt", "float"),
                scheme=_read(mapping, "time", "scheme", "str"),
                output_every=_read(mapping, "time", "output_every", "int"),
                max_steps=_read(mapping, "time", "max_steps", "int"),
            )
        except ValueError as e:
            raise ConfigurationError(f"invalid value for 'time.scheme': {e}") from None
        tolerances = Tolerances(
            **{
                name: _read(mapping, "tolerances", name, "float")
                for name in Tolerances.__dataclass_fields__
            }
        )
        overrides = Overrides(
            **{
                name: _read(mapping, "overrides", name, "bool")
                for name in Overrides.__dataclass_fields__
            }
        )
        corner = None
        if "corner" in mapping:
            corner = CornerParams(
                a2=_read(mapping, "corner", "a2", "float"),
                a3=_read(mapping, "corner", "a3", "float"),
                k=physics.k,
                q=_read(mapping, "corner", "q", "int"),
                p=_read(mapping, "corner", "p", "int"),
            )
        return cls(
            domain=domain,
            physics=physics,
            s_star=_read(mapping, "physics", "s_star", "float"),
            s=_read(mapping, "weights", "s", "optional float"),
            m_max=_read(mapping, "weights", "m_max", "int"),
            truncation=_read(mapping, "weights", "truncation", "int"),
            samples=_read(mapping, "weights", "samples", "int"),
            mesh=mesh,
            time=time,
            tolerances=tolerances,
            overrides=overrides,
            out_dir=_read(mapping, "output", "dir", "str"),
            seed=_read(mapping, "output", "seed", "int"),
            corner=corner,
        )

    def to_dict(self) -> dict:
        return asdict(self)


# ==========================
# Validation pipeline
# ==========================


@dataclass
class Verdict:
    """Outcome of one assumption check with the quantities it computed."""

    name: str
    passed: bool
    message: str = ""
    quantities: dict = field(default_factory=dict)
    overridden: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


class AnalysisPipeline:
    """Runs the checks in dependency order and keeps what each one computed."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.logger = logging.getLogger(__name__)
        self.verdicts = []
        self.domain = None
        self.background = None
        self.pressures = None
        self.field = None
        self.h4 = None
        self.alphas = None
        self.weights = None
        self.window = None
        self.s = None
        self.stopped = ""

    def _record(self, name, passed, message="", **quantities) -> Verdict:
        verdict = Verdict(name, bool(passed), message, quantities)
        if not verdict.passed:
            if self.config.overrides.allows(name):
                verdict.overridden = True
                warnings.warn(
                    f"assumption {name} failed and is overridden: {message}",
                    AssumptionOverrideWarning,
                )
            else:
                self.logger.warning("Check %s failed: %s", name, message)
        self.verdicts.append(verdict)
        return verdict

    def _stop(self, reason: str) -> list:
        self.stopped = reason
        self.logger.warning("Validation stopped: %s", reason)
        return self.verdicts

    @property
    def failures(self) -> list:
        return [v for v in self.verdicts if not v.passed and not v.overridden]

    @property
    def ill_posed(self) -> bool:
        return any(v.name == "h4" and not v.passed for v in self.verdicts)

    def validate(self, through: str = "s") -> list:
        """Geometry, data, initial pressure, h4, corner data, windows and s, in order.

        Args:
            through (str): Last stage to run: "pressure", "corner" or "s".

        Returns:
            list: The verdicts; failures are verdicts, not exceptions.
        """
        config = self.config
        spec = config.domain
        problems = validate_domain(spec)
        self._record("geometry", not problems, "; ".join(problems))
        if problems:
            return self._stop("geometry is invalid")

        data_window = s_star_window(spec.delta0, spec.delta1)
        problems = []
        if not data_window.admits(config.s_star):
            problems.append(f"s_star = {config.s_star} is not admissible")
        if not (config.physics.c1 > 0 and config.physics.c2 > 0):
            problems.append("near-corner pressures must be positive")
        try:
            self.background = default_pressure_data(spec, config.physics, config.s_star)
        except ConfigurationError as e:
            problems.append(str(e))
        else:
            if not self.background.c_q > 0:
                problems.append(
                    f"closed-form pressures need c_q > 0 for the interface sign condition, got {self.background.c_q:.3g}"
                )
        self._record(
            "data",
            not problems,
            "; ".join(problems),
            s_star=config.s_star,
            s_star_window=data_window.to_dict(),
        )
        if self.background is None:
            return self._stop("no closed-form pressures for these data")

        self.domain = build_domain(spec, config.mesh)
        self.pressures = self.background.traces()
        self.field = solve_initial_pressure(
            self.domain, *self.pressures, config.physics.k1, config.physics.k2, background=self.background
        )
        data_values = np.concatenate(
            [
                self.pressures[0](self.domain.mesh.nodes[self.domain.mesh.gamma1]),
                self.pressures[1](self.domain.mesh.nodes[self.domain.mesh.gamma2]),
                np.zeros(2),
            ]
        )
        passed, vmin, vmax = max_principle_check(self.field, data_values, tol=1e-4)
        self._record("pressure", passed, "" if passed else "discrete maximum principle violated", min=vmin, max=vmax)

        self.h4 = check_h4(self.field, config.tolerances.h4_corner_radius)
        quantities = {k: v for k, v in self.h4.to_dict().items() if k not in ("passed", "reason")}
        self._record("h4", self.h4.passed, self.h4.reason, **quantities)
        if through == "pressure":
            return self.verdicts
        if not self.h4.k_in_range:
            return self._stop("corner problems need k in (0, 1)")

        try:
            self.alphas = tuple(
                extract_alpha(self.field, corner, config.tolerances.spread_tol) for corner in ("A0", "A1")
            )
        except NumericalFailure as e:
            self._record("corner", False, str(e))
            return self._stop("corner data unresolved")
        self._record("corner", True, alpha0=self.alphas[0], alpha1=self.alphas[1])
        if through == "corner":
            return self.verdicts

        self.window = self._weight_window()
        self._record(
            "windows",
            not self.window.empty,
            self.window.reason or "",
            window=self.window.to_dict(),
        )
        self._select_s()
        return self.verdicts

    def _weight_window(self):
        config = self.config
        spec = config.domain
        k = config.physics.k
        rational = pi_fraction(spec.delta0) is not None and pi_fraction(spec.delta1) is not None
        if rational:
            self.weights = global_weights(
                spec.delta0, spec.delta1, *self.alphas, k, config.s_star, tol=config.tolerances.angle_tol
            )
            return self.weights.window
        self.logger.info("Irrational contact angle: using the limit of rational approximants.")
        limits = limsup_weights(
            spec.delta0,
            spec.delta1,
            config.m_max,
            k=k,
            alpha0=self.alphas[0],
            alpha1=self.alphas[1],
            s_star=config.s_star,
            spread_tol=config.tolerances.spread_tol,
        )
        self.weights = limits
        return h7_window(spec.delta0, spec.delta1, limits.h_star, limits.f_star)

    def _select_s(self) -> None:
        requested = self.config.s
        if requested is not None:
            admitted = self.window.admits(requested)
            self.s = requested
            self._record("s", admitted, "" if admitted else f"s = {requested} is not admissible", s=requested)
            return
        self.s = self.window.pick_weight()
        self._record(
            "s",
            self.s is not None,
            "" if self.s is not None else "window empty",
            s=self.s,
            auto=True,
        )


# ==========================
# Subcommands
# ==========================


def _manifest(config: RunConfig, command: str, verdicts, summary: dict, files: list) -> None:
    content = ManifestUtility.generate_manifest_content(
        command, config.to_dict(), [v.to_dict() for v in verdicts], summary, files
    )
    ManifestUtility.save_manifest_content(config.out_dir, content)


def _require(pipeline: AnalysisPipeline, command: str, files: list, summary: dict) -> None:
    """Write the manifest, then raise when an unforgiven check failed."""
    _manifest(pipeline.config, command, pipeline.verdicts, summary, files)
    if pipeline.failures:
        names = ", ".join(v.name for v in pipeline.failures)
        raise ValidationError(f"assumption checks failed: {names}", verdicts=pipeline.failures)
    if pipeline.stopped and not pipeline.config.overrides.force:
        raise ValidationError(pipeline.stopped, verdicts=pipeline.verdicts)


def _spectrum_summary(spectrum) -> dict:
    q = spectrum.quantities
    return {
        "params": asdict(spectrum.params),
        "q1": q.q1,
        "q_star": q.q_star,
        "q2": q.q2,
        "theta1": q.theta1,
        "theta2": q.theta2,
        "period": q.period,
        "regime": spectrum.classification.regime.value,
        "clause": spectrum.classification.clause,
        "near_degenerate": spectrum.classification.near_degenerate,
        "count_plus": spectrum.zeros_plus.count,
        "count_minus": spectrum.zeros_minus.count,
        "case": spectrum.zeros_plus.case,
    }


def handle_spectrum(config: RunConfig) -> dict:
    """Zero tables of S+ and S- for the configured corner or both contact corners."""
    out = config.out_dir
    files = []
    if config.corner is not None:
        config.corner.check()
        spectrum = corner_spectrum(config.corner, eq_tol=config.tolerances.eq_tol)
        files.append(write_zero_csv(os.path.join(out, "zeros.csv"), [spectrum.zeros_plus, spectrum.zeros_minus]))
        summary = {"corner": _spectrum_summary(spectrum)}
        files.append(FileUtility.write_json(os.path.join(out, "spectrum.json"), summary))
        _manifest(config, "spectrum", [], summary, files)
        return summary

    pipeline = AnalysisPipeline(config)
    pipeline.validate(through="corner")
    summary = {}
    if pipeline.alphas is not None:
        weights = global_weights(
            config.domain.delta0,
            config.domain.delta1,
            *pipeline.alphas,
            config.physics.k,
            config.s_star,
            tol=config.tolerances.angle_tol,
        )
        for name, spectrum in (("A0", weights.spectrum0), ("A1", weights.spectrum1)):
            path = os.path.join(out, f"zeros_{name}.csv")
            files.append(write_zero_csv(path, [spectrum.zeros_plus, spectrum.zeros_minus]))
            summary[name] = _spectrum_summary(spectrum)
        files.append(FileUtility.write_json(os.path.join(out, "spectrum.json"), summary))
    _require(pipeline, "spectrum", files, summary)
    return summary


def handle_weights(config: RunConfig) -> dict:
    pipeline = AnalysisPipeline(config)
    pipeline.validate()
    summary = {"s": pipeline.s, "ill_posed": pipeline.ill_posed}
    files = []
    if pipeline.weights is not None:
        if hasattr(pipeline.weights, "to_dict"):
            summary["weights"] = pipeline.weights.to_dict()
        else:
            summary["limits"] = {
                "h_star": pipeline.weights.h_star,
                "f_star": pipeline.weights.f_star,
                "spread_h": pipeline.weights.spread_h,
                "spread_f": pipeline.weights.spread_f,
                "converged": pipeline.weights.converged,
                "per_m": [list(record) for record in pipeline.weights.per_m],
            }
        summary["window"] = pipeline.window.to_dict()
        files.append(FileUtility.write_json(os.path.join(config.out_dir, "weights.json"), summary))
    _require(pipeline, "weights", files, summary)
    return summary


def handle_symbol(config: RunConfig) -> dict:
    """Symbol values, the Gamma-product solution and its functional-equation residuals."""
    pipeline = AnalysisPipeline(config)
    pipeline.validate()
    summary, files = {}, []
    if pipeline.s is not None and hasattr(pipeline.weights, "spectrum0"):
        sp = SymbolParams(corner=pipeline.weights.spectrum0.params, s=pipeline.s, s_star=config.s_star)
        state = build_gamma_state(sp, truncation=config.truncation)
        rng = np.random.default_rng(config.seed)
        points = sample_strip_points(sp, config.samples, rng)
        rows = residual_table(points, sp, config.truncation)
        files.append(write_residual_csv(os.path.join(config.out_dir, "residuals.csv"), rows))
        left, right = pole_strip(sp, state)
        mu = 1.0
        x = central_abscissa(sp, state)
        heights = np.linspace(10.0, 40.0, 16)
        summary = {
            "s": pipeline.s,
            "G_at_zero": G_at_zero(sp),
            "G_limits": [complex(value) for value in G_limits(sp)],
            "pole_strip": [left, right],
            "pole_lines": [float(line) for line in pole_lines(sp, state)],
            "decay_lower_bound": math.pi - pipeline.weights.spectrum0.quantities.theta2,
            "expected_decay_rate": [expected_decay_rate(sp, mu, state, side) for side in (1, -1)],
            "fitted_decay_rate": [
                fit_decay_rate(sp, mu, x, side * heights, config.truncation, state) for side in (1, -1)
            ],
            "max_residual": max(row["residual"] for row in rows) if rows else 0.0,
        }
        files.append(FileUtility.write_json(os.path.join(config.out_dir, "symbol.json"), summary))
    _require(pipeline, "symbol", files, summary)
    return summary


def handle_solve_initial(config: RunConfig) -> dict:
    """Initial pressures, interface traces, h4 verdict, alpha values and corner fits."""
    pipeline = AnalysisPipeline(config)
    pipeline.validate(through="corner")
    out = config.out_dir
    files = []
    summary = {"h4": pipeline.h4.to_dict() if pipeline.h4 else None}
    if pipeline.field is not None:
        field_ = pipeline.field
        files.append(write_mesh(pipeline.domain.mesh, os.path.join(out, "mesh.txt")))
        files.append(write_field_csv(os.path.join(out, "field.csv"), field_))
        files.append(write_trace_csv(os.path.join(out, "trace.csv"), field_.interface_trace()))
        decade = (0.1 * config.domain.eps, config.domain.eps)
        fits = {}
        for corner in ("A0", "A1"):
            try:
                fits[corner] = field_corner_fit(field_, corner, decade).to_dict()
            except InsufficientDecayData as e:
                fits[corner] = {"error": str(e)}
        summary["corner_fits"] = fits
        summary["alpha"] = list(pipeline.alphas) if pipeline.alphas else None
        if pipeline.h4 is not None and pipeline.h4.passed:
            coefficients = linearized_coeffs(field_, config.tolerances.seam_tol)
            summary["linearized"] = coefficients.to_dict()
        files.append(FileUtility.write_json(os.path.join(out, "solve.json"), summary))
    _require(pipeline, "solve-initial", files, summary)
    return summary


def handle_evolve(config: RunConfig) -> dict:
    """Time-step the interface and report the waiting-time diagnostics."""
    pipeline = AnalysisPipeline(config)
    pipeline.validate()
    out = config.out_dir
    files, summary = [], {}
    runnable = pipeline.field is not None and not pipeline.failures
    if runnable:
        v0 = initial_velocity(pipeline.field)
        evolution = InterfaceEvolution(
            pipeline.domain, config.physics, *pipeline.pressures, background=pipeline.background
        )
        trajectory = run(evolution, config.time, ill_posed=pipeline.ill_posed)
        files.append(write_trajectory_csv(os.path.join(out, "trajectory.csv"), trajectory))
        summary = {
            "initial_branch_residual": v0.branch_residual,
            "initial_velocity_sup": float(np.max(np.abs(v0.k1_branch))),
            "trajectory": trajectory.to_dict(),
            "solves": evolution.solves,
        }
        if len(trajectory.states) >= 3:
            report = waiting_time_report(trajectory, pipeline.domain, pipeline.window)
            summary["waiting_time"] = report.to_dict()
        else:
            summary["waiting_time"] = None
            logger.warning("Fewer than three states; no waiting-time report.")
        files.append(FileUtility.write_json(os.path.join(out, "evolve.json"), summary))
    _require(pipeline, "evolve", files, summary)
    return summary


def handle_report(config: RunConfig) -> dict:
    path = os.path.join(config.out_dir, "report.json")
    _manifest(config, "report", [], {}, [path])
    aggregate_report(config.out_dir)
    return {"report": path}


HANDLERS = {
    "spectrum": handle_spectrum,
    "weights": handle_weights,
    "symbol": handle_symbol,
    "solve-initial": handle_solve_initial,
    "evolve": handle_evolve,
    "report": handle_report,
}


# ==========================
# Command line
# ==========================


def parse_run_arguments(argv=None) -> argparse.Namespace:
    """Parse the subcommand and the command-line overrides."""
    parser = argparse.ArgumentParser(description="Contact corners of the two-phase Muskat problem")
    parser.add_argument("command", choices=COMMANDS, help="Analysis step to run.")
    parser.add_argument(
        "--config",
        "-r",
        "--runtime-configs",
        dest="config",
        default=None,
        help="INI or JSON configuration file.",
    )
    parser.add_argument("--out", "-o", default=None, help="Output directory.")
    parser.add_argument("--force", action="store_true", help="Override failed assumption checks.")
    parser.add_argument("--seed", type=int, default=None, help="Seed for randomized samples.")
    parser.add_argument("--s", type=float, default=None, help="Requested weight s.")
    return parser.parse_args(argv)


def setup_logging(out_dir: str) -> logging.Handler:
    """Console logging plus <out>/out.log with the same format."""
    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT, datefmt=LOG_DATEFMT)
    FileUtility.ensure_directory(out_dir)
    fh = logging.FileHandler(os.path.join(out_dir, "out.log"), "w")
    formatter = logging.Formatter(LOG_FORMAT)
    formatter.datefmt = LOG_DATEFMT
    fh.setFormatter(formatter)
    logging.getLogger().addHandler(fh)
    return fh


def exit_code_for(error: Exception) -> int:
    if isinstance(error, (ValidationError, GeometryError, ConfigurationError)):
        return EXIT_VALIDATION
    if isinstance(error, NumericalFailure):
        return EXIT_NUMERICAL
    return EXIT_ERROR


def execute(argv=None) -> int:
    """Run one subcommand and return the exit status."""
    args = parse_run_arguments(argv)
    try:
        config_manager = ConfigManager(config_file=args.config, cmd_args=args)
        config = RunConfig.from_mapping(config_manager.config)
    except ConfigurationError as error:
        logging.basicConfig(level=logging.INFO, format=LOG_FORMAT, datefmt=LOG_DATEFMT)
        logger.error("%s", error)
        return EXIT_VALIDATION

    handler = setup_logging(config.out_dir)
    try:
        with LockManager(os.path.join(config.out_dir, DEFAULT_LOCK_FILE)):
            logger.info("Running %s into %s.", args.command, config.out_dir)
            HANDLERS[args.command](config)
            logger.info("%s finished.", args.command)
            return EXIT_OK
    except MuskatError as error:
        logger.error("%s failed: %s", args.command, error)
        return exit_code_for(error)
    except Exception as error:
        logger.error(f"Unexpected error of type {type(error)}: {error}", exc_info=True)
        return EXIT_ERROR
    finally:
        logging.getLogger().removeHandler(handler)
        handler.close()


def main():
    """Main execution function."""
    sys.exit(execute())


if __name__ == "__main__":
    main()
