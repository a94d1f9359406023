"""
Tests for run configuration parsing and validation.
"""

import pytest

from src.hartogs_kit.config import RunConfig, build_config, load_config, read_config_file
from src.hartogs_kit.errors import ConfigError


class TestConfigFile:
    """Test reading flat key = value files."""

    def test_sectionless_file(self, tmp_path):
        """Test a file without a section header is accepted."""
        path = tmp_path / "run.ini"
        path.write_text("subcommand = extend\nfixture = inverse_z2\nr = 0.25\n")

        raw = read_config_file(path)

        assert raw == {'subcommand': 'extend', 'fixture': 'inverse_z2', 'r': '0.25'}

    def test_run_section(self, tmp_path):
        """Test an explicit [run] section is accepted."""
        path = tmp_path / "run.ini"
        path.write_text("[run]\nsubcommand = normalize\nfixture = identity\nM = 4\n")

        config = load_config(path)

        assert config.subcommand == 'normalize'
        assert config.M == 4

    def test_unknown_key(self, tmp_path):
        """Test unknown keys are rejected."""
        path = tmp_path / "run.ini"
        path.write_text("subcommand = extend\nfixture = x\ncolour = blue\n")

        with pytest.raises(ConfigError):
            read_config_file(path)

    def test_missing_file(self, tmp_path):
        """Test a missing file is a config error with exit code 2."""
        with pytest.raises(ConfigError) as info:
            read_config_file(tmp_path / "absent.ini")
        assert info.value.exit_code == 2


class TestTyping:
    """Test conversion of raw strings."""

    def test_infinite_n(self):
        """Test n = inf maps to None."""
        config = build_config({'subcommand': 'extend', 'fixture': 'x', 'n': 'inf', 'model': 'ball'})
        assert config.n is None
        assert config.describe()['n'] == 'inf'

    def test_bad_number(self):
        """Test unparseable numbers raise ConfigError."""
        with pytest.raises(ConfigError):
            build_config({'subcommand': 'extend', 'fixture': 'x', 'q': 'two'})

    def test_missing_fixture(self):
        """Test a fixture id is required."""
        with pytest.raises(ConfigError):
            build_config({'subcommand': 'extend'})


class TestValidation:
    """Test documented parameter bounds."""

    @pytest.mark.parametrize("overrides", [
        {'r': 0.0}, {'r': 1.0}, {'tolerance': 0.0}, {'nodes': 100}, {'nodes': 8192},
        {'grid': 1}, {'grid': 2048}, {'M': 65}, {'modes': 513}, {'k': 0}, {'q': 0},
        {'method': 'spectral'}, {'model': 'cube'}, {'threads': 0},
    ])
    def test_out_of_bounds(self, overrides):
        """Test each out-of-range parameter is rejected."""
        with pytest.raises(ConfigError):
            RunConfig(subcommand='extend', fixture='inverse_z2', **overrides)

    def test_unknown_subcommand(self):
        """Test unknown subcommands are rejected."""
        with pytest.raises(ConfigError):
            RunConfig(subcommand='plot', fixture='x')

    def test_defaults_valid(self):
        """Test the defaults pass validation."""
        config = RunConfig(subcommand='loopspace', fixture='two_mode')
        assert config.nodes is None
        assert config.r == 0.2


class TestPrecedence:
    """Test config file < environment < command line."""

    def test_environment_beats_file(self, tmp_path, monkeypatch):
        """Test HARTOGSKIT_THREADS overrides the config file."""
        path = tmp_path / "run.ini"
        path.write_text("subcommand = extend\nfixture = inverse_z2\nthreads = 2\n")
        monkeypatch.setenv('HARTOGSKIT_THREADS', '3')

        assert load_config(path).threads == 3

    def test_command_line_beats_environment(self, tmp_path, monkeypatch):
        """Test command-line values override the environment."""
        path = tmp_path / "run.ini"
        path.write_text("subcommand = extend\nfixture = inverse_z2\n")
        monkeypatch.setenv('HARTOGSKIT_THREADS', '3')
        monkeypatch.setenv('HARTOGSKIT_LOG_LEVEL', 'debug')

        config = load_config(path, {'threads': 5, 'fixture': None})

        assert config.threads == 5
        assert config.fixture == 'inverse_z2'
        assert config.log_level == 'debug'
