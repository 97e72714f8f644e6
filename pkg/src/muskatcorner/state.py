"""This module writes the result files of a run and keeps the run manifest."""

# Standard library imports
import csv
import hashlib
import logging
import math
import os
from fractions import Fraction
from importlib import metadata

# Related third-party imports
import numpy as np
import orjson

# Local application/library specific imports
from .errors import MuskatError


logger = logging.getLogger(__name__)

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_SORT_KEYS
MANIFEST_FILE = "manifest.json"
REPORT_FILE = "report.json"


def package_version() -> str:
    try:
        return metadata.version("muskatcorner")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def to_jsonable(value):
    """Recursively convert a result record into JSON-safe values.

    Non-finite floats become "inf", "-inf" or "nan"; complex numbers become
    [real, imag]; Fractions become floats.
    """
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, Fraction):
        return float(value)
    if isinstance(value, complex):
        return [to_jsonable(value.real), to_jsonable(value.imag)]
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return str(value)


# ==========================
# FileUtility
# ==========================


class FileUtility:
    """Utility class for reading and writing result files."""

    @staticmethod
    def ensure_directory(path: str) -> None:
        if path and not os.path.exists(path):
            os.makedirs(path)
            logger.debug("Created directory: %s", path)

    @staticmethod
    def read_file(file_path: str) -> str:
        try:
            with open(file_path, "r", encoding="utf-8") as file:
                return file.read()
        except IOError as exc:
            raise MuskatError(f"Error reading the file {file_path}.") from exc

    @staticmethod
    def write_file(file_path: str, content: str) -> None:
        try:
            FileUtility.ensure_directory(os.path.dirname(file_path))
            with open(file_path, "w", encoding="utf-8") as file:
                file.write(content)
        except IOError as exc:
            raise MuskatError(f"Error writing to the file {file_path}.") from exc

    @staticmethod
    def calculate_file_hash(file_path: str) -> str:
        """Calculate the SHA-256 hash of a file.

        Args:
            file_path (str): Path to the file.

        Returns:
            str: SHA-256 hash of the file.
        """
        try:
            with open(file_path, "rb") as file:
                return hashlib.sha256(file.read()).hexdigest()
        except FileNotFoundError as exc:
            raise MuskatError(f"File {file_path} not found.") from exc
        except IOError as exc:
            raise MuskatError(f"Error reading the file {file_path}.") from exc

    @staticmethod
    def write_json(file_path: str, record) -> str:
        """Write a record as indented JSON with sorted keys and return the path."""
        FileUtility.ensure_directory(os.path.dirname(file_path))
        try:
            with open(file_path, "wb") as file:
                file.write(orjson.dumps(to_jsonable(record), option=JSON_OPTIONS))
        except IOError as exc:
            raise MuskatError(f"Error writing to the file {file_path}.") from exc
        logger.debug("Wrote %s", file_path)
        return file_path

    @staticmethod
    def read_json(file_path: str):
        try:
            with open(file_path, "rb") as file:
                return orjson.loads(file.read())
        except orjson.JSONDecodeError as exc:
            raise MuskatError(f"Error decoding JSON from {file_path}.") from exc

    @staticmethod
    def write_csv(file_path: str, header: list, rows) -> str:
        FileUtility.ensure_directory(os.path.dirname(file_path))
        with open(file_path, "w", encoding="utf-8", newline="") as file:
            writer = csv.writer(file, quoting=csv.QUOTE_MINIMAL)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_csv_cell(cell) for cell in row])
        logger.debug("Wrote %s", file_path)
        return file_path


def _csv_cell(value):
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, complex):
        return repr(value)
    return value


# ==========================
# Result tables
# ==========================


def write_zero_csv(path: str, zero_sets) -> str:
    """Columns kind, index, location, multiplicity, residual."""
    rows = []
    for zero_set in zero_sets:
        for index, zero in enumerate(zero_set.zeros):
            rows.append([zero_set.kind, index, zero.location, zero.multiplicity, zero.residual])
    return FileUtility.write_csv(path, ["kind", "index", "location", "multiplicity", "residual"], rows)


def write_residual_csv(path: str, rows: list) -> str:
    header = ["nu", "mu", "residual", "truncation", "tail"]
    return FileUtility.write_csv(path, header, ([row[key] for key in header] for row in rows))


def write_mesh(mesh, path: str) -> str:
    """Plain-text mesh export with "nodes" and "triangles" sections."""
    lines = [
        "# muskatcorner mesh",
        f"# nodes {mesh.nodes.shape[0]} triangles {mesh.triangles.shape[0]}",
        "nodes",
    ]
    for index, ((x, y), tag) in enumerate(zip(mesh.nodes, mesh.tags)):
        lines.append(f"{index} {x!r} {y!r} {int(tag)}")
    lines.append("triangles")
    for index, (tri, phase) in enumerate(zip(mesh.triangles, mesh.phase)):
        lines.append(f"{index} {int(tri[0])} {int(tri[1])} {int(tri[2])} {int(phase)}")
    FileUtility.write_file(path, "\n".join(lines) + "\n")
    return path


def write_field_csv(path: str, field_) -> str:
    """Nodal values of both phases; nan where a node does not belong to the phase."""
    mesh = field_.mesh
    w1 = np.full(mesh.nodes.shape[0], np.nan)
    w2 = np.full(mesh.nodes.shape[0], np.nan)
    nodes1, nodes2 = mesh.phase_nodes(1), mesh.phase_nodes(2)
    w1[nodes1] = field_.values(1)[nodes1]
    w2[nodes2] = field_.values(2)[nodes2]
    rows = ([i, x, y, int(tag), a, b] for i, ((x, y), tag, a, b) in enumerate(zip(mesh.nodes, mesh.tags, w1, w2)))
    return FileUtility.write_csv(path, ["node", "x", "y", "tag", "W1", "W2"], rows)


def write_trace_csv(path: str, trace) -> str:
    rows = zip(trace.omega, trace.points[:, 0], trace.points[:, 1], trace.value1, trace.value2, trace.dn1, trace.dn2, trace.dt1)
    return FileUtility.write_csv(path, ["omega", "x", "y", "W1", "W2", "dn1", "dn2", "dt1"], rows)


def write_trajectory_csv(path: str, trajectory) -> str:
    """Columns t, omega, s, s_t, branch_residual; one row per state and node."""
    residual_at = {}
    for state, diagnostics in zip(trajectory.states[1:], trajectory.diagnostics):
        residual_at[state.t] = diagnostics.branch_residual
    rows = []
    for state in trajectory.states:
        s_t = state.s_t if state.s_t is not None else np.full(state.omega.shape, np.nan)
        residual = residual_at.get(state.t, math.nan)
        for omega, s, v in zip(state.omega, state.s_values, s_t):
            rows.append([state.t, omega, s, v, residual])
    return FileUtility.write_csv(path, ["t", "omega", "s", "s_t", "branch_residual"], rows)


# ==========================
# ManifestUtility
# ==========================


class ManifestUtility:
    """Utility class for generating and saving manifest content."""

    @staticmethod
    def generate_manifest_content(command: str, config: dict, verdicts: list, summary: dict, files: list) -> dict:
        """Build the manifest record of one subcommand; no wall-clock values."""
        content = {
            command: {
                "version": package_version(),
                "config": config,
                "verdicts": verdicts,
                "summary": summary,
                "files": sorted(os.path.basename(path) for path in files),
            }
        }
        logger.debug("Generated manifest content for %s", command)
        return content

    @staticmethod
    def save_manifest_content(out_dir: str, manifest_content: dict) -> str:
        """Merge the content into <out_dir>/manifest.json, one entry per subcommand."""
        manifest_file_path = os.path.join(out_dir, MANIFEST_FILE)
        existing = {}
        if os.path.exists(manifest_file_path):
            file_content = FileUtility.read_file(manifest_file_path).strip()
            if file_content:
                try:
                    existing = orjson.loads(file_content)
                except orjson.JSONDecodeError:
                    logger.error("Error decoding JSON from the manifest file %s.", manifest_file_path)
                    raise
            else:
                logger.warning(
                    "Manifest file %s is empty. Initializing with an empty dictionary.",
                    manifest_file_path,
                )
        else:
            logger.debug("Manifest file %s not found. A new one will be created.", manifest_file_path)
        existing.update(to_jsonable(manifest_content))
        FileUtility.write_json(manifest_file_path, existing)
        logger.info("Manifest content saved to %s", manifest_file_path)
        return manifest_file_path


def aggregate_report(out_dir: str) -> str:
    """Merge every JSON document of the output directory into report.json.

    The report is keyed by file stem and never includes itself, so repeated
    runs write identical bytes.
    """
    if not os.path.isdir(out_dir):
        raise MuskatError(f"Output directory {out_dir} not found.")
    report = {}
    for name in sorted(os.listdir(out_dir)):
        if not name.endswith(".json") or name == REPORT_FILE:
            continue
        report[name[: -len(".json")]] = FileUtility.read_json(os.path.join(out_dir, name))
    path = os.path.join(out_dir, REPORT_FILE)
    FileUtility.write_json(path, report)
    logger.info("Aggregated %d documents into %s", len(report), path)
    return path
