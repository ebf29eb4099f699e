"""Golden-data regression over the shipped study fixtures.

Each ``fixtures/<name>.toml`` is an ordinary CLI config; ``fixtures/index.toml``
assigns it a tolerance policy. ``exact`` compares output files byte for byte.
``numeric`` parses CSV and JSON and compares numbers with ``rtol``/``atol``
while strings and structure must match exactly.

Run ``python -m pqec.harness`` to check, ``--regenerate`` to rewrite goldens.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import cli

FIXTURE_DIR = Path(__file__).parent / "fixtures"


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class GoldenFixture:
    name: str
    config: Path
    golden: Path
    policy: str = "exact"
    rtol: float = 0.0
    atol: float = 0.0


@dataclass
class FixtureResult:
    name: str
    passed: bool
    diffs: list = field(default_factory=list)


@dataclass
class RegressionReport:
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failed(self) -> list[str]:
        return [r.name for r in self.results if not r.passed]

    def format(self) -> str:
        lines = []
        for r in self.results:
            lines.append(f"{'PASS' if r.passed else 'FAIL'} {r.name}")
            lines.extend(f"    {d}" for d in r.diffs[:20])
            if len(r.diffs) > 20:
                lines.append(f"    ... {len(r.diffs) - 20} more")
        return "\n".join(lines)


def load_suite(directory: Path = FIXTURE_DIR) -> list[GoldenFixture]:
    index_path = directory / "index.toml"
    if not index_path.is_file():
        raise HarnessError(f"missing fixture index {index_path}")
    index = tomllib.loads(index_path.read_text())
    suite = []
    for name in sorted(index):
        entry = index[name]
        cfg = directory / f"{name}.toml"
        if not cfg.is_file():
            raise HarnessError(f"fixture {name}: missing config {cfg}")
        policy = entry.get("policy", "exact")
        if policy not in ("exact", "numeric"):
            raise HarnessError(f"fixture {name}: unknown policy {policy!r}")
        suite.append(GoldenFixture(name, cfg, directory / "golden" / name, policy,
                                   float(entry.get("rtol", 0.0)), float(entry.get("atol", 0.0))))
    return suite


def _study_of(config: Path) -> str:
    study = tomllib.loads(config.read_text()).get("study")
    if study is None:
        raise HarnessError(f"{config}: fixtures must declare a top-level study")
    return study


def execute(fixture: GoldenFixture, out_root: Path) -> Path:
    """Run one fixture through the CLI; returns its output directory."""
    study = _study_of(fixture.config)
    stdout, stderr = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
        code = cli.main([study, "--config", str(fixture.config), "--out", str(out_root),
                         "--override", f'label="{fixture.name}"'])
    if code != 0:
        raise HarnessError(f"fixture {fixture.name}: CLI exited {code}: {stderr.getvalue().strip()}")
    return out_root / study / fixture.name


def _close(a: float, b: float, rtol: float, atol: float) -> bool:
    if math.isnan(a) and math.isnan(b):
        return True
    return abs(a - b) <= atol + rtol * abs(b)


def _compare_values(a, b, path: str, fx: GoldenFixture, diffs: list) -> None:
    if isinstance(b, dict):
        if not isinstance(a, dict) or set(a) != set(b):
            diffs.append(f"{path}: keys differ")
            return
        for k in sorted(b):
            _compare_values(a[k], b[k], f"{path}.{k}", fx, diffs)
    elif isinstance(b, list):
        if not isinstance(a, list) or len(a) != len(b):
            diffs.append(f"{path}: length differs")
            return
        for i, (x, y) in enumerate(zip(a, b)):
            _compare_values(x, y, f"{path}[{i}]", fx, diffs)
    elif isinstance(b, (int, float)) and not isinstance(b, bool):
        if not isinstance(a, (int, float)) or isinstance(a, bool) \
                or not _close(float(a), float(b), fx.rtol, fx.atol):
            diffs.append(f"{path}: {a!r} != {b!r}")
    elif a != b:
        diffs.append(f"{path}: {a!r} != {b!r}")


def _as_number(cell: str):
    try:
        return float(cell)
    except ValueError:
        return cell


def _compare_file(got: Path, want: Path, fx: GoldenFixture, diffs: list) -> None:
    if fx.policy == "exact":
        if got.read_bytes() != want.read_bytes():
            diffs.append(f"{want.name}: bytes differ")
        return
    if want.suffix == ".json":
        _compare_values(json.loads(got.read_text()), json.loads(want.read_text()),
                        want.name, fx, diffs)
    elif want.suffix == ".csv":
        rows_a = [[_as_number(c) for c in r] for r in csv.reader(io.StringIO(got.read_text()))]
        rows_b = [[_as_number(c) for c in r] for r in csv.reader(io.StringIO(want.read_text()))]
        _compare_values(rows_a, rows_b, want.name, fx, diffs)
    elif got.read_bytes() != want.read_bytes():
        diffs.append(f"{want.name}: bytes differ")


def check(fixture: GoldenFixture, produced: Path) -> FixtureResult:
    if not fixture.golden.is_dir():
        raise HarnessError(f"fixture {fixture.name}: missing golden directory {fixture.golden}")
    diffs: list = []
    want = sorted(p.name for p in fixture.golden.iterdir())
    got = sorted(p.name for p in produced.iterdir())
    for name in sorted(set(want) ^ set(got)):
        diffs.append(f"{name}: {'missing from output' if name in want else 'unexpected output'}")
    for name in sorted(set(want) & set(got)):
        _compare_file(produced / name, fixture.golden / name, fixture, diffs)
    return FixtureResult(fixture.name, not diffs, diffs)


def run_regression(suite: list[GoldenFixture] | None = None) -> RegressionReport:
    """Run every fixture and compare against its golden outputs (in name order)."""
    suite = load_suite() if suite is None else suite
    results = []
    with tempfile.TemporaryDirectory() as tmp:
        for fx in suite:
            try:
                produced = execute(fx, Path(tmp))
            except HarnessError as exc:
                results.append(FixtureResult(fx.name, False, [str(exc)]))
                continue
            results.append(check(fx, produced))
    return RegressionReport(results)


def regenerate(suite: list[GoldenFixture] | None = None) -> None:
    suite = load_suite() if suite is None else suite
    with tempfile.TemporaryDirectory() as tmp:
        for fx in suite:
            produced = execute(fx, Path(tmp))
            if fx.golden.exists():
                shutil.rmtree(fx.golden)
            shutil.copytree(produced, fx.golden)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="python -m pqec.harness",
                                     description="golden-data regression over study fixtures")
    parser.add_argument("--regenerate", action="store_true", help="rewrite golden outputs")
    parser.add_argument("--only", action="append", default=[], help="run only these fixtures")
    args = parser.parse_args(argv)
    try:
        suite = load_suite()
        if args.only:
            suite = [fx for fx in suite if fx.name in args.only]
        if args.regenerate:
            regenerate(suite)
            print(f"regenerated {len(suite)} fixture(s)")
            return 0
        report = run_regression(suite)
    except HarnessError as exc:
        print(f"harness error: {exc}", file=sys.stderr)
        return 2
    print(report.format())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
