import csv
from pathlib import Path

import pytest

from pqec import compiler
from pqec.config import STUDIES
from pqec.harness import FIXTURE_DIR, HarnessError, _study_of, load_suite, run_regression

RESET_LIBRARY_FIXTURES = {"reset_ad_fit", "dynamics"}


def test_every_study_has_a_fixture():
    studies = {_study_of(fx.config) for fx in load_suite()}
    assert studies == set(STUDIES)


def test_clean_build_passes():
    report = run_regression()
    assert report.passed, report.format()


def test_lambda_unit_perturbation_breaks_only_reset_fixtures(monkeypatch):
    monkeypatch.setattr(compiler, "LAMBDA_UNIT", compiler.LAMBDA_UNIT * 0.9)
    report = run_regression()
    assert set(report.failed) == RESET_LIBRARY_FIXTURES


def test_missing_fixture_files(tmp_path):
    with pytest.raises(HarnessError):
        load_suite(tmp_path)
    (tmp_path / "index.toml").write_text("[ghost]\npolicy = \"exact\"\n")
    with pytest.raises(HarnessError, match="missing config"):
        load_suite(tmp_path)


def test_missing_golden_is_reported(tmp_path):
    (tmp_path / "index.toml").write_text("[dephasing_fit]\n")
    (tmp_path / "dephasing_fit.toml").write_text((FIXTURE_DIR / "dephasing_fit.toml").read_text())
    with pytest.raises(HarnessError, match="missing golden"):
        run_regression(load_suite(tmp_path))


def test_traceability_table_covers_every_criterion():
    root = Path(__file__).resolve().parents[1]
    with open(root / "docs" / "traceability.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["criterion"]) for r in rows] == list(range(1, 14))
    for r in rows:
        tests = [r["acceptance_test"], *filter(None, r["supporting_tests"].split(";"))]
        for ref in tests:
            path, name = ref.split("::")
            assert f"def {name}(" in (root / path).read_text(), ref
        for fx in filter(None, r["fixtures"].split(";")):
            assert (FIXTURE_DIR / f"{fx}.toml").is_file(), fx
