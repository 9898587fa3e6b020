#!/usr/bin/env python3
"""
ScenarioHarness: drives the mfmc CLI against an isolated run ledger and
collects the metrics an acceptance scenario checks.

Usage:
    from benchmarks.harness import ScenarioHarness
    with tempfile.TemporaryDirectory() as tmp:
        h = ScenarioHarness(Path(tmp))
        rows = h.cir("configs/pulse_r100.scn", "--set", "K=20000")
        h.metric("peak_i", max(range(len(rows)), key=lambda i: rows[i]["g"]))
        print(h.metrics())
"""

import csv
import os
import subprocess
import sys
from pathlib import Path
from typing import Dict, List, Tuple

from mfmc.cli import build_model
from mfmc.markov_kernel import TransitionModel
from mfmc.scenario import Scenario, load_scenario, parse_overrides

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"
PYTHON = sys.executable


class CliError(RuntimeError):
    def __init__(self, args, returncode: int, stderr: str):
        super().__init__(f"mfmc {' '.join(args)} exited {returncode}: {stderr.strip()[:300]}")
        self.returncode = returncode


class ScenarioHarness:
    def __init__(self, tmp_dir: Path, name: str = "scenario"):
        self.tmp_dir = Path(tmp_dir)
        self.name = name
        self._calls = 0
        self._metrics: Dict[str, float] = {}
        self._env = {**os.environ, "MFMC_DB_DIR": str(self.tmp_dir / "ledger")}
        self.last_stderr = ""

    # ------------------------------------------------------------------
    # CLI execution
    # ------------------------------------------------------------------

    def cli(self, *args: str, check: bool = True) -> subprocess.CompletedProcess:
        proc = subprocess.run(
            [PYTHON, "-m", "mfmc", *args],
            capture_output=True,
            text=True,
            env=self._env,
            cwd=REPO,
        )
        self.last_stderr = proc.stderr
        if check and proc.returncode != 0:
            raise CliError(args, proc.returncode, proc.stderr)
        return proc

    def _out(self, suffix: str) -> Path:
        self._calls += 1
        return self.tmp_dir / f"{self.name}-{self._calls:03d}.{suffix}"

    # ------------------------------------------------------------------
    # Convenience wrappers
    # ------------------------------------------------------------------

    def run(self, scenario: str, *flags: str) -> List[dict]:
        out = self._out("csv")
        self.cli("run", scenario, "-o", str(out), *flags)
        return read_rows(out)

    def cir(self, scenario: str, *flags: str) -> List[dict]:
        out = self._out("csv")
        self.cli("cir", scenario, "-o", str(out), *flags)
        return read_rows(out)

    def equilibrium(self, scenario: str, *flags: str) -> Dict[str, float]:
        proc = self.cli("equilibrium", scenario, *flags)
        header, values = proc.stdout.strip().splitlines()[:2]
        return dict(zip(header.split(","), (float(v) for v in values.split(","))))

    def pbs(self, scenario: str, *flags: str) -> Path:
        """Returns the CSV path so callers can compare bytes across runs."""
        out = self._out("csv")
        self.cli("pbs", scenario, "-o", str(out), *flags)
        return out

    def sweep(self, sweep: str, *flags: str) -> List[dict]:
        out_dir = self._out("d")
        self.cli("sweep", sweep, str(out_dir), *flags)
        return read_rows(out_dir / "summary.csv", numeric=False)

    # ------------------------------------------------------------------
    # In-process access (for checks the CLI does not expose)
    # ------------------------------------------------------------------

    def load(self, scenario: str, *overrides: str) -> Tuple[Scenario, TransitionModel]:
        loaded = load_scenario(REPO / scenario, parse_overrides(list(overrides)))
        return loaded, build_model(loaded.cfg)

    # ------------------------------------------------------------------
    # Metrics
    # ------------------------------------------------------------------

    def metric(self, key: str, value: float) -> None:
        self._metrics[key] = float(value)

    def metrics(self) -> Dict[str, float]:
        return dict(self._metrics)


def read_rows(path: Path, numeric: bool = True) -> List[dict]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if numeric:
        rows = [{k: float(v) for k, v in r.items()} for r in rows]
    return rows
