import io
import logging
import os

import pytest

from config import RunConfig
from heights.errors import ParseError
from logger import get_log_directory, get_run_logger, setup_logging


@pytest.fixture
def restore_logging():
    yield
    setup_logging()


def test_run_logger_prefixes_the_run_id(restore_logging):
    stream = io.StringIO()
    setup_logging(level='INFO', stream=stream)
    get_run_logger('1a2b3c4d').info("densities at p=%d", 2)
    line = stream.getvalue().strip()
    assert line.endswith('[INFO] [run=1a2b3c4d] densities at p=2')
    assert get_log_directory() is None


def test_hourly_log_file(tmp_path, restore_logging):
    setup_logging(log_dir=str(tmp_path / 'logs'), level='DEBUG', stream=io.StringIO())
    assert get_log_directory() == str(tmp_path / 'logs')
    get_run_logger('feedf00d').warning("class cap close")
    for handler in logging.getLogger().handlers:
        handler.flush()
    files = os.listdir(tmp_path / 'logs')
    assert len(files) == 1
    assert files[0].startswith('heights_') and files[0].endswith('.log')
    assert '[run=feedf00d] class cap close' in (tmp_path / 'logs' / files[0]).read_text()


def test_setup_is_idempotent(restore_logging):
    setup_logging(stream=io.StringIO())
    setup_logging(stream=io.StringIO())
    assert len(logging.getLogger().handlers) == 1


def test_no_stream_handler_when_stream_is_none(capsys, restore_logging):
    setup_logging(stream=None)
    assert [type(h) for h in logging.getLogger().handlers] == [logging.NullHandler]
    get_run_logger('deadbeef').error("report failed")
    assert capsys.readouterr().err == ''


def test_config_overrides_skip_none():
    cfg = RunConfig().with_overrides(seed=7, mc_samples=None)
    assert cfg.seed == 7
    assert cfg.mc_samples == RunConfig().mc_samples
    assert cfg.as_dict()['seed'] == 7


def test_config_file_errors(tmp_path):
    with pytest.raises(ParseError):
        RunConfig.from_file(str(tmp_path / 'missing.env'))
    path = tmp_path / 'bad.env'
    path.write_text('MC_SAMPLES=lots\n')
    with pytest.raises(ParseError):
        RunConfig.from_file(str(path))


def test_config_file_accepts_hex_and_lowercase_keys(tmp_path):
    path = tmp_path / 'run.env'
    path.write_text('seed=0xBEEF\nGREEN_ITERS=30\nOUTPUT_FORMAT=pretty\n')
    cfg = RunConfig.from_file(str(path))
    assert cfg.seed == 0xBEEF
    assert cfg.green_iters == 30
    assert cfg.output_format == 'pretty'
