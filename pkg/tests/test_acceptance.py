"""One test per acceptance criterion; each records a PASS/FAIL line with its measurements."""

from __future__ import annotations

import json
import subprocess
import sys
import time

import pytest

from bose2d import verify

from .conftest import ACCEPTANCE_LINES

RUNTIME_LIMITS = {1: 1.0, 2: 30.0, 5: 120.0, 7: 60.0, 10: 5.0}


def _summary(measured: dict) -> str:
    text = json.dumps(measured, default=str)
    return text if len(text) <= 300 else text[:297] + "..."


def record(number: int, check: verify.Check, elapsed: float) -> None:
    limit = RUNTIME_LIMITS.get(number)
    in_time = limit is None or elapsed < limit
    status = "PASS" if check.passed and in_time else "FAIL"
    timing = f"{elapsed:.2f}s" + (f" (limit {limit:.0f}s)" if limit else "")
    line = (f"{status} criterion {number:2d} [{check.name}] tolerance: {check.tolerance}; "
            f"time {timing}; measured {_summary(check.measured)}")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert check.passed, line
    assert in_time, line


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def test_criterion_01_scattering_length_dual_method():
    record(1, *timed(verify.check_scattering_length_methods))


def test_criterion_02_eigenvalue_asymptotics():
    verify._SWEEP_CACHE.clear()
    record(2, *timed(verify.check_eigenvalue_asymptotics))


def test_criterion_03_intvf_asymptotics():
    record(3, *timed(verify.check_intvf_asymptotics))


def test_criterion_04_far_field():
    record(4, *timed(verify.check_far_field))


def test_criterion_05_scattering_identity():
    record(5, *timed(verify.check_scattering_identity_n8))


def test_criterion_06_coefficient_bounds():
    record(6, *timed(verify.check_coefficient_bounds))


def test_criterion_07_i_ell_invariance():
    record(7, *timed(verify.check_i_ell))


def test_criterion_08_energy_forms():
    record(8, *timed(verify.check_energy_forms))


def test_criterion_09_large_r():
    record(9, *timed(verify.check_large_r))


def test_criterion_10_ed_single_pair():
    record(10, *timed(verify.check_ed_pair))


def test_criterion_11_gp_slice():
    record(11, *timed(verify.check_gp_slice))


def test_criterion_12_spectrum():
    record(12, *timed(verify.check_spectrum))


@pytest.mark.slow
def test_criterion_13_determinism(tmp_path):
    outputs = []
    t0 = time.perf_counter()
    for i in range(2):
        path = tmp_path / f"report{i}.json"
        proc = subprocess.run([sys.executable, "-m", "bose2d", "verify", "--suite", "all",
                               "--out", str(path)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outputs.append(path.read_bytes())
    elapsed = (time.perf_counter() - t0) / 2
    identical = outputs[0] == outputs[1]
    ok = identical and elapsed < 600.0
    check = verify.Check("determinism", 13, ok, "byte-identical reports, full suite < 600 s",
                         {"identical": identical, "bytes": len(outputs[0]),
                          "seconds_per_run": round(elapsed, 2)})
    record(13, check, elapsed)
