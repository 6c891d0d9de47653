"""Full-size acceptance criteria. Each test prints one PASS/FAIL line."""

import os
import time
from pathlib import Path

import pytest

from conftest import ACCEPTANCE_LINES
from modflow import checks, cli

ROOT = Path(__file__).resolve().parents[1]
pytestmark = pytest.mark.acceptance


def report(number: int, res: checks.SuiteResult, budget: float, seconds: float = None):
    seconds = res.seconds if seconds is None else seconds
    within = seconds < budget
    passed = res.passed and within
    tag = "PASS" if passed else "FAIL"
    body = ", ".join(f"{k}={checks._fmt(v)}" for k, v in res.stats.items())
    line = f"[{tag}] criterion {number:>2} {res.name}: {body} ({seconds:.1f}s, budget {budget:.0f}s)"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert res.passed, line
    assert within, line


@pytest.fixture(scope="module")
def path_sample():
    prior, sources, fs, grid = checks.default_mc_setup()
    t0 = time.perf_counter()
    sample = checks.simulate_sample(prior, sources, fs, grid, 100000, 3)
    return sample, time.perf_counter() - t0


def test_reduction_identity():
    report(1, checks.reduction_identity(1000, seed=1, tol=1e-12), 30)


def test_bayes_oracle():
    report(2, checks.bayes_oracle(1000, seed=2, tol=1e-10), 30)


def test_martingale(path_sample):
    sample, sim_seconds = path_sample
    res = checks.martingale(sample)
    report(3, res, 300, sim_seconds + res.seconds)


def test_supermartingale(path_sample):
    sample, sim_seconds = path_sample
    res = checks.supermartingale(sample)
    report(4, res, 300, sim_seconds + res.seconds)


def test_jump_law():
    report(5, checks.jump_law(100000, seed=5, tol=0.01), 120)


def test_euler_convergence():
    report(6, checks.euler_convergence(200, seed=6), 300)


def test_feynman_kac_residual():
    report(7, checks.fk_residual(401, tol=1e-3, min_ratio=3.0), 120)


def test_call_price():
    report(8, checks.call_price_suite(10, 1000000, seed=8), 600)


def test_asymmetry():
    report(9, checks.asymmetry_suite(1000, seed=9), 120)


def test_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv("MODFLOW_SEED", raising=False)
    t0 = time.perf_counter()
    pricing = tmp_path / "pricing.cfg"
    pricing.write_text((ROOT / "configs" / "pricing.cfg").read_text()
                       .replace("pricing.mc_paths = 1000000", "pricing.mc_paths = 200000"))
    max_threads = max(os.cpu_count() or 1, 2)
    jobs = [("simulate", ROOT / "configs" / "default.cfg"), ("asymmetry", ROOT / "configs" / "default.cfg"),
            ("price", pricing)]
    identical = 0
    for command, cfg in jobs:
        blobs = []
        for threads in (1, 1, max_threads):
            out = tmp_path / f"{command}_{threads}_{len(blobs)}.csv"
            assert cli.main([command, str(cfg), "--threads", str(threads), "--out", str(out)]) == 0
            blobs.append(out.read_bytes())
        identical += blobs[0] == blobs[1] == blobs[2]
    res = checks.SuiteResult("determinism", identical == len(jobs),
                             {"commands": len(jobs), "identical": identical, "max_threads": max_threads})
    report(10, res, 120, time.perf_counter() - t0)
