"""Exit criteria for the package, one test per criterion.

Run alone with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""

import json
import math
import time

import numpy as np
import pytest

from spincorr.cli import main
from spincorr.estimators import AccumulatorState, conservation_residual, grouped_correlation, plain_correlation
from spincorr.eventlog import accumulate_file, write_events
from spincorr.models import (
    ConditionalKind,
    ModelSpec,
    SpinMagnitude,
    conservation_joint,
    lhv_linear_corr,
    qm_joint_prob,
    spin_s_corr,
)
from spincorr.optimizer import maximize_chsh
from spincorr.simulate import simulate_angles

GRID_181 = np.linspace(0.0, math.pi, 181)
SPINS = [SpinMagnitude(k) for k in (1, 2, 3, 4)]
KINDS = list(ConditionalKind)
SEED = 20040101


def cli_json(capsys, *argv):
    code = main([str(a) for a in argv])
    out, _ = capsys.readouterr()
    assert code == 0
    return json.loads(out)


def test_c1_conservation_implies_qm(record_criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for kind in KINDS:
        for t in GRID_181:
            for (a, b), p in conservation_joint(t, SpinMagnitude(1), kind).items():
                worst = max(worst, abs(p - qm_joint_prob(t, a, b)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 1.0
    record_criterion("C1 conservation => QM joint law (S=1/2)", ok, f"max cell diff {worst:.2e} (tol 1e-12), {dt:.2f}s")
    assert ok


def test_c2_spin_s_universality(record_criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for spin in SPINS:
        for kind in KINDS:
            for t in GRID_181:
                e = sum(a * b / 4 * p for (a, b), p in conservation_joint(t, spin, kind).items())
                worst = max(worst, abs(e - spin_s_corr(spin, t)))
    theta = math.pi / 3
    worst_z = 0.0
    for i, spin in enumerate(SPINS):
        for j, kind in enumerate(KINDS):
            model = ModelSpec.conservation(spin.two_s, kind)
            acc = AccumulatorState.from_batch(simulate_angles(model, 0.0, theta, 10**6, SEED, stream=2 * i + j))
            est = plain_correlation(acc)
            worst_z = max(worst_z, abs(est.value - spin_s_corr(spin, theta)) / est.se)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and worst_z <= 4.0 and dt < 60.0
    record_criterion(
        "C2 -cos(t)S(S+1)/3 for every S and conditional kind",
        ok,
        f"analytic max diff {worst:.2e} (tol 1e-12), Monte Carlo worst {worst_z:.2f} SE (tol 4), {dt:.1f}s",
    )
    assert ok


def _brute_force_max(corr_vec, step_deg):
    # direct evaluation at the real angle differences; a fixed at 0 by rotation invariance
    g = np.radians(np.arange(0.0, 360.0, step_deg))
    rel = lambda d: np.arccos(np.clip(np.cos(d), -1.0, 1.0))
    p_a = corr_vec(rel(g))
    first = np.abs(p_a[:, None] - p_a[None, :])
    best = -np.inf
    for ap in g:
        row = corr_vec(rel(ap - g))
        best = max(best, float((first + np.abs(row[:, None] + row[None, :])).max()))
    return best


def test_c3_chsh_discrimination(record_criterion):
    t0 = time.perf_counter()
    qm = maximize_chsh(lambda t: -math.cos(t))
    lhv = maximize_chsh(lhv_linear_corr)
    oracle_qm = _brute_force_max(lambda t: -np.cos(t), 0.5)
    oracle_lhv = _brute_force_max(lambda t: -1.0 + 2.0 * t / math.pi, 0.5)
    dt = time.perf_counter() - t0
    ok = (
        abs(qm.m_value - 2.82843) <= 1e-4
        and abs(qm.m_value - oracle_qm) <= 1e-4
        and lhv.m_value <= 2.0 + 1e-9
        and oracle_lhv <= 2.0 + 1e-9
        and abs(lhv.m_value - oracle_lhv) <= 1e-6
        and dt < 120.0
    )
    record_criterion(
        "C3 CHSH maximum: -cos vs linear LHV",
        ok,
        f"-cos M={qm.m_value:.8f} (oracle {oracle_qm:.8f}), linear M={lhv.m_value:.12f} "
        f"(oracle {oracle_lhv:.12f}), {dt:.1f}s",
    )
    assert ok


def test_c4_conservation_audit(record_criterion):
    t0 = time.perf_counter()
    grid = [math.radians(15 * i) for i in range(13)]
    strict = [ModelSpec.qm()] + [ModelSpec.conservation(1, k) for k in KINDS]
    broad = [ModelSpec.conservation(s, k) for s in (2, 3, 4) for k in KINDS]
    worst_abs, nullity_ok = 0.0, True
    for m_idx, model in enumerate(strict + broad):
        for i, t in enumerate(grid):
            acc = AccumulatorState.from_batch(simulate_angles(model, 0.0, t, 10**6, SEED, stream=100 * m_idx + i))
            audit = conservation_residual(acc, t, normalized=True)
            if model in strict:
                worst_abs = max(worst_abs, audit.max_abs)
            nullity_ok &= audit.consistent(4.0)
    lhv60 = conservation_residual(
        AccumulatorState.from_batch(simulate_angles(ModelSpec.lhv(), 0.0, math.pi / 3, 10**6, SEED, stream=1)),
        math.pi / 3,
        normalized=True,
    ).residual(1).value
    lhv0 = conservation_residual(
        AccumulatorState.from_batch(simulate_angles(ModelSpec.lhv(), 0.0, 0.0, 10**6, SEED, stream=2)),
        0.0,
        normalized=True,
    ).residual(1).value
    dt = time.perf_counter() - t0
    ok = worst_abs < 0.005 and nullity_ok and abs(lhv60 - 0.1667) <= 0.01 and abs(lhv0) <= 0.004 and dt < 120.0
    record_criterion(
        "C4 conservation audit",
        ok,
        f"QM / S=1/2 max |r|={worst_abs:.5f} (tol 0.005), S>=1 all within 4 SE: {nullity_ok}, "
        f"LHV r+(60deg)={lhv60:.4f} (0.1667+-0.01), r+(0)={lhv0:.4f} (+-0.004), {dt:.1f}s",
    )
    assert ok


def test_c5_correlation_curves(capsys, record_criterion):
    t0 = time.perf_counter()
    worst_z, endpoints_ok = 0.0, True
    for model in ("qm", "lhv"):
        rows = cli_json(capsys, "scan", "--model", model, "--grid-step-deg", 5, "--events", 10**5,
                        "--seed", SEED, "--normalized")["rows"]
        assert len(rows) == 37
        for r in rows:
            diff = abs(r["estimate"] - r["analytic"])
            if r["se"] == 0.0:
                endpoints_ok &= diff == 0.0
            else:
                worst_z = max(worst_z, diff / r["se"])
        by_deg = {round(r["theta_deg"]): r["analytic"] for r in rows}
        endpoints_ok &= by_deg[0] == -1.0 and abs(by_deg[90]) <= 1e-15 and by_deg[180] == 1.0
    dt = time.perf_counter() - t0
    ok = worst_z <= 4.0 and endpoints_ok and dt < 60.0
    record_criterion("C5 correlation curves vs analytic (37 angles)", ok,
                     f"worst {worst_z:.2f} SE (tol 4), endpoints exact: {endpoints_ok}, {dt:.1f}s")
    assert ok


def test_c6_estimator_laws(tmp_path, record_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    # balanced synthetic sets: every A-group holds the same count
    balanced_worst = 0.0
    for spin in SPINS:
        lattice = spin.lattice()
        for _ in range(50):
            per = int(rng.integers(1, 40))
            a = np.repeat(lattice, per)
            b = rng.choice(lattice, a.size)
            perm = rng.permutation(a.size)
            acc = AccumulatorState.from_arrays(None, None, spin, a[perm], b[perm])
            if acc.n >= 2:
                balanced_worst = max(balanced_worst, abs(grouped_correlation(acc).value - plain_correlation(acc).value))
    # concatenation vs merge, bit-exact through files
    model = ModelSpec.conservation(3, "adjacent")
    batch = simulate_angles(model, 0.0, 1.1, 30_000, SEED)
    recs = list(batch.records())
    write_events(recs[:12_345], tmp_path / "a.csv", model=model, seed=SEED)
    write_events(recs[12_345:], tmp_path / "b.csv", model=model, seed=SEED)
    write_events(recs, tmp_path / "ab.csv", model=model, seed=SEED)
    merged = accumulate_file(tmp_path / "a.csv").merge(accumulate_file(tmp_path / "b.csv"))
    whole = accumulate_file(tmp_path / "ab.csv")
    merge_ok = merged == whole and plain_correlation(merged) == plain_correlation(whole)
    # byte-identical files across runs and worker counts
    bytes_ok = True
    for m in (ModelSpec.qm(), ModelSpec.lhv(), model):
        blobs = []
        for run, workers in enumerate((1, 1, 4)):
            p = tmp_path / f"{m.variant.value}{run}.csv"
            write_events(simulate_angles(m, 0.0, 0.7, 200_000, SEED, workers=workers), p, model=m, seed=SEED)
            blobs.append(p.read_bytes())
        bytes_ok &= blobs[0] == blobs[1] == blobs[2]
    dt = time.perf_counter() - t0
    ok = balanced_worst <= 1e-12 and merge_ok and bytes_ok and dt < 60.0
    record_criterion(
        "C6 estimator laws",
        ok,
        f"grouped-plain max diff {balanced_worst:.1e} (tol 1e-12), merge bit-exact: {merge_ok}, "
        f"files byte-identical: {bytes_ok}, {dt:.1f}s",
    )
    assert ok


def test_c7_end_to_end_chsh(capsys, record_criterion):
    t0 = time.perf_counter()
    qm = cli_json(capsys, "chsh", "--model", "qm", "--events", 10**6, "--seed", SEED)
    lhv = cli_json(capsys, "chsh", "--model", "lhv", "--events", 10**6, "--seed", SEED)
    dt = time.perf_counter() - t0
    ok = 2.79 <= qm["M"] <= 2.87 and 1.94 <= lhv["M"] <= 2.06 and dt < 120.0
    record_criterion(
        "C7 statistical CHSH from events",
        ok,
        f"QM M={qm['M']:.4f}+-{qm['se']:.4f} in [2.79, 2.87] ({qm['verdict']}), "
        f"LHV M={lhv['M']:.4f}+-{lhv['se']:.4f} in [1.94, 2.06] ({lhv['verdict']}), {dt:.1f}s",
    )
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
