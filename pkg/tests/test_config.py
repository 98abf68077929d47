"""Config document parsing and layered resolution."""

import pytest

from abidegym.config import ENV_VAR, load_config_file, parse_config_text, resolve_config
from abidegym.errors import ConfigError


def test_parse_full_document():
    text = """
    # dynamics
    timeout_threshold = 4
    resize_threshold = 9
    resize_increment = 1
    initial_size = 7
    max_size = 9
    trigger_color = purple   # comment after value
    perturbation_enabled = yes
    resize_enabled = off
    max_steps_factor = 3
    """
    values = parse_config_text(text)
    assert values == {
        "timeout_threshold": 4,
        "resize_threshold": 9,
        "resize_increment": 1,
        "initial_size": 7,
        "max_size": 9,
        "trigger_color": "purple",
        "perturbation_enabled": True,
        "resize_enabled": False,
        "max_steps_factor": 3,
    }


def test_parse_empty_and_comment_only():
    assert parse_config_text("") == {}
    assert parse_config_text("# nothing here\n\n   \n") == {}


@pytest.mark.parametrize(
    "text,needle",
    [
        ("mystery = 3", "unknown key"),
        ("timeout_threshold = ten", "integer"),
        ("resize_enabled = definitely", "boolean"),
        ("timeout_threshold 4", "key = value"),
        ("timeout_threshold = 4\ntimeout_threshold = 5", "duplicate"),
    ],
)
def test_parse_errors_carry_line_numbers(text, needle):
    with pytest.raises(ConfigError) as err:
        parse_config_text(text)
    message = str(err.value)
    assert needle in message
    assert "line" in message


def test_parse_error_points_at_offending_line():
    with pytest.raises(ConfigError) as err:
        parse_config_text("timeout_threshold = 4\n\nbogus = 1\n")
    assert "line 3" in str(err.value)


def test_bool_spellings():
    for spelling, expected in [
        ("true", True), ("1", True), ("YES", True), ("On", True),
        ("false", False), ("0", False), ("no", False), ("OFF", False),
    ]:
        assert parse_config_text(f"resize_enabled = {spelling}") == {
            "resize_enabled": expected
        }


def test_load_config_file(tmp_path):
    path = tmp_path / "abide.cfg"
    path.write_text("timeout_threshold = 6\n", encoding="utf-8")
    assert load_config_file(str(path)) == {"timeout_threshold": 6}


def test_resolve_defaults_when_nothing_given():
    cfg = resolve_config(env={})
    assert cfg.timeout_threshold == 10
    assert cfg.resize_threshold == 20


def test_resolve_precedence_flags_over_file_over_defaults(tmp_path):
    path = tmp_path / "abide.cfg"
    path.write_text(
        "timeout_threshold = 6\ntrigger_color = teal\n", encoding="utf-8"
    )
    cfg = resolve_config(
        overrides={"timeout_threshold": 8},
        config_path=str(path),
        env={},
    )
    assert cfg.timeout_threshold == 8  # flag beats file
    assert cfg.trigger_color == "teal"  # file beats default
    assert cfg.max_size == 16  # default fills the rest
    assert cfg.resize_threshold == 16  # derived from the winning timeout


def test_resolve_reads_path_from_environment(tmp_path):
    path = tmp_path / "abide.cfg"
    path.write_text("initial_size = 8\nmax_size = 12\n", encoding="utf-8")
    cfg = resolve_config(env={ENV_VAR: str(path)})
    assert cfg.initial_size == 8
    explicit = tmp_path / "other.cfg"
    explicit.write_text("initial_size = 9\nmax_size = 12\n", encoding="utf-8")
    assert (
        resolve_config(config_path=str(explicit), env={ENV_VAR: str(path)}).initial_size
        == 9
    )


def test_resolve_rejects_unknown_override_and_invalid_result(tmp_path):
    with pytest.raises(ConfigError):
        resolve_config(overrides={"nope": 1}, env={})
    with pytest.raises(ConfigError):
        resolve_config(overrides={"timeout_threshold": 1}, env={})


def test_resolve_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        resolve_config(config_path=str(tmp_path / "absent.cfg"), env={})
