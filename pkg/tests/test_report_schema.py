import json
import os

import jsonschema
import pytest

from paa.analysis import analyze
from paa.cli import main
from paa.domain import AnalysisConfig
from paa.pcc import export_certificate
from paa.syntax import parse

from corpus import generate_corpus

SCHEMA_DIR = os.path.join(os.path.dirname(__file__), "..", "schemas")


@pytest.fixture(scope="module")
def report_schema():
    with open(os.path.join(SCHEMA_DIR, "report.schema.json")) as fh:
        return json.load(fh)


@pytest.fixture(scope="module")
def cert_schema():
    with open(os.path.join(SCHEMA_DIR, "certificate.schema.json")) as fh:
        return json.load(fh)


def test_structured_reports_valid_across_corpus(tmp_path, capsys, report_schema):
    for name, src in generate_corpus():
        path = tmp_path / f"{name}.sdl"
        path.write_text(src, encoding="utf-8")
        assert main(["analyze", str(path), "--format", "structured"]) == 0
        doc = json.loads(capsys.readouterr().out)
        jsonschema.validate(doc, report_schema)


def test_certificates_valid_across_corpus(cert_schema):
    for name, src in generate_corpus():
        program = parse(src)
        cert = json.loads(export_certificate(analyze(program), program,
                                             AnalysisConfig()))
        jsonschema.validate(cert, cert_schema)


def test_timing_variant_still_valid(tmp_path, capsys, report_schema):
    path = tmp_path / "tiny.sdl"
    path.write_text("machines { m0 } var a on m0[1]; begin m0 { x_1 := &a; }",
                    encoding="utf-8")
    assert main(["analyze", str(path), "--format", "structured", "--timing"]) == 0
    doc = json.loads(capsys.readouterr().out)
    jsonschema.validate(doc, report_schema)
