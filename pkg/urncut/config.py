import os
import json
import copy

from urncut.utils import default_jobs

try:
    import tomllib as toml  # type: ignore[assignment]
except ImportError:
    try:
        import tomli as toml  # type: ignore[assignment]
    except ImportError:
        toml = None

URNCUT_DIR = os.path.expanduser("~/.urncut")
CONFIG_PATH = os.path.join(URNCUT_DIR, "config.json")

POLICIES = ("extremes", "all-states")
FORMATS = ("csv", "json")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")
SWEEP_LIMITS = ("exact_n_max", "policy_n_max", "spectral_n_max", "moment_n_max")

DEFAULT_CONFIG = {
    "out_dir": None,
    "jobs": None,
    "format": "csv",
    "eps": 0.25,
    "policy": "extremes",
    "reps": 10000,
    "seed": 0,
    "gamma1": 4.0,
    "t_max": None,
    "log_level": "INFO",
    "exact_n_max": 60,
    "exact_tolerance": 1e-12,
    "tv_grid_max": 500,
    "shifted_k_max": 2000,
    "policy_n_max": 300,
    "spectral_n_max": 200,
    "moment_n_max": 200,
    "cutoff_k": 5,
    "cutoff_ladder": [250, 500, 1000, 2000, 4000],
    "last_step_params": [10000, 400],
    "stochastic_grid": [[100, 10], [400, 10], [1000, 25], [2000, 50]],
    "mgf_grid": [40, 100, 200, 400],
    "mgf_h": [-1.0, -0.5, -0.25, -0.05, 0.05, 0.25, 0.5, 1.0],
    "kappa_scale": [1.0, 1.0, 1.0, 1.0],
}


class ConfigError(ValueError):
    """Invalid configuration value; `field` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


def ensure_dirs():
    """Ensure ~/.urncut exists."""
    os.makedirs(URNCUT_DIR, exist_ok=True)


def load_raw_config():
    """Load config from disk without environment overrides or validation."""
    config = copy.deepcopy(DEFAULT_CONFIG)

    if os.path.exists(CONFIG_PATH):
        try:
            with open(CONFIG_PATH, "r") as f:
                config.update(json.load(f))
        except (OSError, ValueError):
            pass

    # First rc file wins: working directory before home
    rc_paths = [".urncutrc", ".urncutrc.json", os.path.expanduser("~/.urncutrc"),
                os.path.expanduser("~/.urncutrc.json")]
    for path in rc_paths:
        if os.path.exists(path):
            try:
                with open(path, "rb") as f:
                    if path.endswith(".json"):
                        config.update(json.load(f))
                    elif toml:
                        config.update(toml.load(f))
            except (OSError, ValueError):
                pass
            break

    return config


def _positive_int(config, field, allow_none=False):
    value = config.get(field)
    if value is None and allow_none:
        return
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(field, f"expected a positive integer, got {value!r}")


def validate_config(config):
    """Check the value ranges the engine relies on. Raises ConfigError."""
    eps = config.get("eps")
    if not isinstance(eps, (int, float)) or not 0 < eps < 1:
        raise ConfigError("eps", f"must lie in (0, 1), got {eps!r}")
    if config.get("policy") not in POLICIES:
        raise ConfigError("policy", f"must be one of {', '.join(POLICIES)}")
    if config.get("format") not in FORMATS:
        raise ConfigError("format", f"must be one of {', '.join(FORMATS)}")
    gamma1 = config.get("gamma1")
    if not isinstance(gamma1, (int, float)) or gamma1 <= 0:
        raise ConfigError("gamma1", f"must be positive, got {gamma1!r}")
    seed = config.get("seed")
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed", f"must be a 64-bit unsigned integer, got {seed!r}")
    for field in ("reps", "tv_grid_max", "shifted_k_max", "cutoff_k") + SWEEP_LIMITS:
        _positive_int(config, field)
    _positive_int(config, "jobs", allow_none=True)
    _positive_int(config, "t_max", allow_none=True)
    for field in SWEEP_LIMITS:
        if config[field] > 300:
            raise ConfigError(field, "must be at most 300")
    if config.get("log_level") not in LOG_LEVELS:
        raise ConfigError("log_level", f"must be one of {', '.join(LOG_LEVELS)}")
    grid = config.get("stochastic_grid") or []
    for entry in grid:
        if len(entry) != 2 or not 0 < entry[1] < entry[0]:
            raise ConfigError("stochastic_grid", f"entries must be [n, k] with 0 < k < n, got {entry!r}")
    scale = config.get("kappa_scale") or []
    if len(scale) != 4 or any(s <= 0 for s in scale):
        raise ConfigError("kappa_scale", "expected four positive constants")
    return config


def load_config():
    ensure_dirs()
    config = load_raw_config()

    # Environment variables override config
    env_out = os.environ.get("URNCUT_OUT_DIR")
    if env_out:
        config["out_dir"] = os.path.expanduser(env_out)

    env_jobs = os.environ.get("URNCUT_JOBS")
    if env_jobs:
        try:
            config["jobs"] = int(env_jobs)
        except ValueError:
            raise ConfigError("URNCUT_JOBS", f"expected an integer, got {env_jobs!r}")

    env_level = os.environ.get("URNCUT_LOG_LEVEL")
    if env_level:
        config["log_level"] = env_level.upper()

    if config.get("jobs") is None:
        config["jobs"] = default_jobs()

    return validate_config(config)
