"""Tests for structured logging."""

import io
import json
import logging

from fastskip.core.logging import JSONFormatter, get_logger, setup_logging


class TestJSONFormatter:
    def test_extra_fields_become_keys(self):
        record = logging.LogRecord(
            "fastskip.training", logging.INFO, __file__, 1, "train_step", (), None
        )
        record.step = 100
        record.transducer_loss = 3.25
        payload = json.loads(JSONFormatter().format(record))
        assert payload["msg"] == "train_step"
        assert payload["level"] == "INFO"
        assert payload["logger"] == "fastskip.training"
        assert payload["step"] == 100
        assert payload["transducer_loss"] == 3.25
        assert "lineno" not in payload

    def test_unserializable_values_are_stringified(self):
        record = logging.LogRecord("x", logging.INFO, __file__, 1, "m", (), None)
        record.path = object()
        payload = json.loads(JSONFormatter().format(record))
        assert payload["path"].startswith("<object")


class TestSetupLogging:
    def test_json_lines_to_stream(self):
        stream = io.StringIO()
        setup_logging(level="INFO", json_format=True, stream=stream)
        get_logger("fastskip.evaluation").info("evaluation", extra={"cer": 0.125})
        payload = json.loads(stream.getvalue().strip())
        assert payload["msg"] == "evaluation"
        assert payload["cer"] == 0.125

    def test_level_filters(self):
        stream = io.StringIO()
        setup_logging(level="WARNING", json_format=True, stream=stream)
        get_logger("fastskip").info("hidden")
        assert stream.getvalue() == ""

    def test_text_format(self):
        stream = io.StringIO()
        setup_logging(level="INFO", json_format=False, stream=stream)
        get_logger("fastskip").info("plain")
        assert "[INFO] fastskip: plain" in stream.getvalue()

    def test_environment_defaults(self, monkeypatch):
        monkeypatch.setenv("FASTSKIP_LOG_LEVEL", "ERROR")
        monkeypatch.setenv("FASTSKIP_LOG_JSON", "0")
        logger = setup_logging(stream=io.StringIO())
        assert logger.level == logging.ERROR
        assert not isinstance(logger.handlers[0].formatter, JSONFormatter)
