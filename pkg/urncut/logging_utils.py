import logging
import os

from urncut import config


_DEF_LOG_NAME = "urncut"
_DEF_LOG_FILE = "urncut.log"


def get_logger(name=_DEF_LOG_NAME):
    """Return a configured logger that writes to ~/.urncut/urncut.log by default."""
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger

    log_path = os.environ.get("URNCUT_LOG_PATH", os.path.join(config.URNCUT_DIR, _DEF_LOG_FILE))
    level_name = os.environ.get("URNCUT_LOG_LEVEL", "INFO").upper()
    level = getattr(logging, level_name, logging.INFO)

    logger.setLevel(level)
    try:
        os.makedirs(os.path.dirname(log_path) or ".", exist_ok=True)
        handler = logging.FileHandler(log_path)
    except OSError:
        # read-only home (CI sandboxes): keep warnings visible on stderr
        handler = logging.StreamHandler()
        handler.setLevel(logging.WARNING)
    formatter = logging.Formatter("%(asctime)s %(levelname)s %(name)s %(message)s")
    handler.setFormatter(formatter)
    logger.addHandler(handler)
    logger.propagate = False

    return logger


def set_log_level(level_name):
    """Apply a level name to every urncut logger created so far."""
    level = getattr(logging, str(level_name).upper(), logging.INFO)
    for name in list(logging.Logger.manager.loggerDict):
        if name == _DEF_LOG_NAME or name.startswith(_DEF_LOG_NAME + "."):
            logging.getLogger(name).setLevel(level)
    return level
