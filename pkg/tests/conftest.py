"""Shared fixtures: command-line runs reused across test modules.

The CLI is exercised in process through ``cli.main`` so the acceptance
tests read back exactly the artifacts a user would get, and the repeat
runs double as the determinism check.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from toda_spectra import cli

REPO_ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = REPO_ROOT / "configs"


def read_csv(path):
    """Parse a CLI CSV into {column: ndarray}, float where possible."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").split("\n")
             if ln]
    header = lines[0].split(",")
    raw = {h: [] for h in header}
    for ln in lines[1:]:
        parts = ln.split(",")
        assert len(parts) == len(header), f"ragged row in {path}: {ln!r}"
        for h, tok in zip(header, parts):
            raw[h].append(tok)
    out = {}
    for h, toks in raw.items():
        try:
            out[h] = np.array([float(t) for t in toks])
        except ValueError:
            out[h] = np.array(toks)
    return out


def read_summary(out_dir, command):
    with open(Path(out_dir) / f"{command}_summary.json",
              encoding="utf-8") as fh:
        return json.load(fh)


def timed_cli(argv):
    """Run the CLI in process; return (exit_code, wall_seconds)."""
    t0 = time.perf_counter()
    code = cli.main([str(a) for a in argv])
    return code, time.perf_counter() - t0


def _repeat_run(tmp_path_factory, stem, argv):
    runs = []
    for tag in ("first", "second"):
        out = tmp_path_factory.mktemp(f"{stem}_{tag}")
        code, secs = timed_cli(argv + ["--out", out])
        assert code == 0, f"{argv[0]} run exited {code}"
        runs.append((out, secs))
    return runs


@pytest.fixture(scope="session")
def scan_runs(tmp_path_factory):
    """Near-critical {3,6} block-spectrum scan, run twice."""
    return _repeat_run(
        tmp_path_factory, "nearcrit",
        ["scan", "--config", CONFIG_DIR / "scan_near_critical.ini",
         "--threads", "1"])


@pytest.fixture(scope="session")
def lg_onemode_runs(tmp_path_factory):
    """Injection trajectory from (r, a) = (1, 0.05) on {2}, run twice."""
    return _repeat_run(
        tmp_path_factory, "lg_mom",
        ["lg", "--config", CONFIG_DIR / "lg_onemode.ini"])


@pytest.fixture(scope="session")
def lg_slice_runs(tmp_path_factory):
    """Declared slice crossing the critical value, run twice."""
    return _repeat_run(
        tmp_path_factory, "lg_slice",
        ["lg", "--config", CONFIG_DIR / "lg_demo.ini"])


@pytest.fixture(scope="session")
def lg_circle_run(tmp_path_factory):
    """Same injection driver with a_2 = 0: the exact expanding circle."""
    out = tmp_path_factory.mktemp("lg_circle")
    code, secs = timed_cli(
        ["lg", "--config", CONFIG_DIR / "lg_onemode.ini", "--out", out,
         "--set", "lg.a0=0.0", "--set", "lg.detect=false"])
    assert code == 0, f"lg circle run exited {code}"
    return out, secs
