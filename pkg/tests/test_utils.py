import logging
import os

import pytest
from hypothesis import given, strategies as st

from urncut.logging_utils import get_logger, set_log_level
from urncut.utils import coerce_number, default_jobs, fan_out, format_float, parse_int_list


def test_coerce_number_int():
    assert coerce_number("10") == 10
    assert isinstance(coerce_number("10"), int)
    assert coerce_number("-3") == -3


def test_coerce_number_float():
    assert coerce_number("0.25") == 0.25
    assert coerce_number("1e-3") == 0.001


def test_coerce_number_passthrough():
    assert coerce_number("extremes") == "extremes"
    assert coerce_number(5) == 5


def test_parse_int_list():
    assert parse_int_list("250,500,1000") == [250, 500, 1000]
    assert parse_int_list(" 7 ") == [7]
    assert parse_int_list(12) == [12]
    assert parse_int_list([1, 2]) == [1, 2]


@pytest.mark.parametrize("raw", ["", ",", "1,2.5", "a,b"])
def test_parse_int_list_rejects(raw):
    with pytest.raises(ValueError):
        parse_int_list(raw)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips(value):
    assert float(format_float(value)) == value


def test_default_jobs_positive():
    assert default_jobs() == (os.cpu_count() or 1)


def test_fan_out_serial_preserves_order():
    assert fan_out(abs, [-3, 2, -1]) == [3, 2, 1]


def test_fan_out_parallel_preserves_order():
    assert fan_out(abs, list(range(-6, 0)), jobs=2) == [6, 5, 4, 3, 2, 1]


def test_set_log_level_reaches_package_loggers(tmp_path, monkeypatch):
    monkeypatch.setenv("URNCUT_LOG_PATH", str(tmp_path / "urncut.log"))
    mine = get_logger("urncut.level-check")
    other = logging.getLogger("elsewhere.level-check")
    before = other.level
    try:
        assert set_log_level("error") == logging.ERROR
        assert mine.level == logging.ERROR
        assert logging.getLogger("urncut.mixing").level == logging.ERROR
        assert other.level == before
    finally:
        set_log_level("INFO")
    assert mine.level == logging.INFO
