# Standard library imports
import copy
import math
from argparse import Namespace
from unittest.mock import mock_open, patch

# Related third-party imports
import orjson
import pytest

# Local application/library specific imports
from muskatcorner.errors import ConfigurationError
from muskatcorner.run import (
    DEFAULT_CONFIG,
    ConfigManager,
    Overrides,
    RunConfig,
    parse_angle,
    parse_bool,
    parse_optional_float,
)


# Path to a mock configuration file
MOCK_CONFIG_PATH = "mock_config.json"
MOCK_INI_PATH = "mock_config.ini"

MOCK_INI_CONTENT = """
[physics]
k1 = 2.0
k2 = 0.5

[domain]
delta1 = pi/8
"""


@pytest.fixture
def mock_cmd_args():
    return Namespace(command="weights", config=None, out="results", seed=7, s=None, force=True)


def test_config_manager_default():
    cm = ConfigManager()
    assert cm.config == DEFAULT_CONFIG
    assert cm.config is not DEFAULT_CONFIG


def test_config_manager_with_default_config():
    cm = ConfigManager(default_config={"default_key": {"a": 1}})
    assert cm.config == {"default_key": {"a": 1}}


def test_config_manager_with_cmd_args(mock_cmd_args):
    cm = ConfigManager(cmd_args=mock_cmd_args)
    assert cm.config["output"] == {"dir": "results", "seed": 7}
    assert cm.config["overrides"]["force"] is True
    # None values leave the defaults alone
    assert cm.config["weights"]["s"] == ""


@patch("builtins.open", new_callable=mock_open, read_data=orjson.dumps({"physics": {"k2": 0.25}}))
def test_config_manager_with_json_file(mock_open_file):
    cm = ConfigManager(config_file=MOCK_CONFIG_PATH)
    mock_open_file.assert_called_with(MOCK_CONFIG_PATH, "rb")
    assert cm.config["physics"]["k2"] == 0.25
    assert cm.config["physics"]["k1"] == DEFAULT_CONFIG["physics"]["k1"]


@patch("builtins.open", new_callable=mock_open, read_data=MOCK_INI_CONTENT)
def test_config_manager_with_ini_file(mock_open_file):
    cm = ConfigManager(config_file=MOCK_INI_PATH)
    mock_open_file.assert_called_with(MOCK_INI_PATH, "r", encoding="utf-8")
    assert cm.config["physics"]["k1"] == "2.0"
    assert cm.config["domain"]["delta1"] == "pi/8"
    assert cm.config["domain"]["delta0"] == "pi/6"
    config = RunConfig.from_mapping(cm.config)
    assert config.physics.k == pytest.approx(0.25)
    assert config.domain.delta1 == pytest.approx(math.pi / 8)


@patch("builtins.open", new_callable=mock_open, read_data=b"invalid_json_content")
def test_config_manager_with_invalid_config_file(mock_open_file, caplog):
    cm = ConfigManager(config_file=MOCK_CONFIG_PATH)
    mock_open_file.assert_called_with(MOCK_CONFIG_PATH, "rb")
    assert "Error decoding configuration file mock_config.json." in caplog.text
    assert cm.config == DEFAULT_CONFIG


@patch("builtins.open", new_callable=mock_open, read_data="k1 = 2.0\n")
def test_config_manager_with_headerless_ini(mock_open_file, caplog):
    cm = ConfigManager(config_file=MOCK_INI_PATH)
    assert "Error decoding configuration file mock_config.ini." in caplog.text
    assert cm.config == DEFAULT_CONFIG


@patch("builtins.open", side_effect=FileNotFoundError)
def test_config_manager_with_missing_config_file(mock_open_file, caplog):
    cm = ConfigManager(config_file=MOCK_CONFIG_PATH)
    mock_open_file.assert_called_with(MOCK_CONFIG_PATH, "rb")
    assert "Configuration file mock_config.json not found." in caplog.text
    assert cm.config == DEFAULT_CONFIG


def test_config_manager_update_from_args():
    cm = ConfigManager()
    cm.update_from_args({"s": 0.4, "seed": None})
    assert cm.config["weights"]["s"] == 0.4
    assert cm.config["output"]["seed"] == 0
    assert cm.config["overrides"]["force"] is False


def test_cmd_args_win_over_config_file(tmpdir, mock_cmd_args):
    path = tmpdir.join("run.json")
    path.write_binary(orjson.dumps({"output": {"dir": "elsewhere", "seed": 3}}))
    cm = ConfigManager(config_file=str(path), cmd_args=mock_cmd_args)
    assert cm.config["output"] == {"dir": "results", "seed": 7}


@pytest.mark.parametrize(
    "value, expected",
    [
        ("pi/6", math.pi / 6),
        ("2*pi/9", 2 * math.pi / 9),
        ("pi", math.pi),
        (" pi / 4 ", math.pi / 4),
        ("0.5", 0.5),
        (0.25, 0.25),
    ],
)
def test_parse_angle(value, expected):
    assert parse_angle(value) == pytest.approx(expected)


def test_parse_angle_rejects_garbage():
    with pytest.raises(ValueError):
        parse_angle("tau/6")


@pytest.mark.parametrize("value, expected", [("yes", True), ("0", False), (True, True), ("Off", False)])
def test_parse_bool(value, expected):
    assert parse_bool(value) is expected


def test_parse_optional_float():
    assert parse_optional_float("") is None
    assert parse_optional_float(None) is None
    assert parse_optional_float("0.4") == 0.4


def test_run_config_from_defaults():
    config = RunConfig.from_mapping(DEFAULT_CONFIG)
    assert config.domain.delta0 == pytest.approx(math.pi / 6)
    assert config.s is None
    assert config.corner is None
    assert config.time.scheme == "euler"
    assert config.tolerances.spread_tol == 0.10
    assert config.to_dict()["physics"]["k1"] == 1.0


def test_run_config_with_corner_section():
    mapping = copy.deepcopy(DEFAULT_CONFIG)
    mapping["corner"] = {"a2": 1.0, "a3": 0.0, "q": 1, "p": 4}
    config = RunConfig.from_mapping(mapping)
    assert config.corner.k == pytest.approx(0.5)
    assert (config.corner.q, config.corner.p) == (1, 4)


@pytest.mark.parametrize(
    "section, key, value, message",
    [
        ("physics", "k1", None, "missing key 'physics.k1' \\(expected float\\)"),
        ("mesh", "rows", "many", "invalid value 'many' for 'mesh.rows' \\(expected int\\)"),
        ("overrides", "h4", "maybe", "'overrides.h4' \\(expected bool\\)"),
        ("time", "scheme", "rk4", "time.scheme"),
    ],
)
def test_run_config_names_bad_key(section, key, value, message):
    mapping = copy.deepcopy(DEFAULT_CONFIG)
    if value is None:
        del mapping[section][key]
    else:
        mapping[section][key] = value
    with pytest.raises(ConfigurationError, match=message):
        RunConfig.from_mapping(mapping)


def test_overrides_never_forgive_geometry():
    overrides = Overrides(force=True)
    assert not overrides.allows("geometry")
    assert overrides.allows("h4")
    assert Overrides(windows=True).allows("windows")
    assert not Overrides(windows=True).allows("h4")
