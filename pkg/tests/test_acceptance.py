"""Exit criteria. Each test records one PASS/FAIL line, printed in the terminal summary."""
import itertools
import time

import numpy as np
import pytest

from qeraser.analysis import CELLS, compare_empirical, tally, visibility
from qeraser.cli import main
from qeraser.hilbert import Register, overlap
from qeraser.measurement import (
    ProjectiveMeasurement,
    collapse,
    conditional_probability,
    joint_probability,
    outcome_probability,
    random_measurement,
    random_state,
)
from qeraser.montecarlo import ChoicePolicy, Ordering, RunConfig, run_trials
from qeraser.optics import (
    ENV,
    SYS_POL,
    Choice,
    circular_route_state,
    elliptical_basis,
    elliptical_route_state,
    env_analyzer,
    full_eraser_state,
    interferometer_transfer,
    system_detectors,
    wheeler_mz,
)

RESULTS: list[str] = []
GRID = np.linspace(-np.pi, np.pi, 181)
TOL = 1e-12


def record(n: int, name: str, ok: bool, detail: str) -> None:
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {name}: {detail}")
    assert ok, detail


def test_01_coincidence_reproduction():
    t0 = time.perf_counter()
    env, sys_ = env_analyzer(Choice.ONE), system_detectors()
    worst = 0.0
    for th in GRID:
        psi = full_eraser_state(th)
        a = th / 2 + np.pi / 4
        closed = {("D1", "D3"): 0.5 * np.sin(a) ** 2, ("D2", "D3"): 0.5 * np.cos(a) ** 2,
                  ("D1", "D4"): 0.5 * np.cos(a) ** 2, ("D2", "D4"): 0.5 * np.sin(a) ** 2}
        for (e, s), p in closed.items():
            worst = max(worst, abs(joint_probability(psi, env, e, sys_, s) - p))
    elapsed = time.perf_counter() - t0
    record(1, "coincidence reproduction", worst < TOL and elapsed < 1.0,
           f"max dev {worst:.2e} (< 1e-12), {elapsed:.3f} s (< 1 s)")


def test_02_choice0_flatness():
    env, sys_ = env_analyzer(Choice.ZERO), system_detectors()
    worst = 0.0
    for th in GRID:
        for psi in (full_eraser_state(th), elliptical_route_state(th)):
            for e, s in CELLS:
                worst = max(worst, abs(joint_probability(psi, env, e, sys_, s) - 0.25))
    record(2, "choice-0 flatness", worst < TOL, f"max |p_ij - 0.25| = {worst:.2e}")


def test_03_marginal_flatness():
    sys_ = system_detectors()
    worst = 0.0
    for th in GRID:
        psi = full_eraser_state(th)
        for choice in Choice:
            env = env_analyzer(choice)
            for s in ("D3", "D4"):
                p = sum(joint_probability(psi, env, e, sys_, s) for e in ("D1", "D2"))
                worst = max(worst, abs(p - 0.5), abs(outcome_probability(psi, sys_, s) - 0.5))
    record(3, "marginal flatness", worst < TOL, f"max |p(Dj) - 0.5| = {worst:.2e}")


def test_04_route_equivalence():
    rng = np.random.default_rng(4)
    worst = 0.0
    for th in rng.uniform(-np.pi, np.pi, 50):
        worst = max(worst, 1 - overlap(circular_route_state(th), elliptical_route_state(th)))
    record(4, "route equivalence", worst < TOL, f"max 1 - |overlap| = {worst:.2e} over 50 random theta")


def test_05_elliptical_pbs():
    worst = 0.0
    for th in GRID:
        m = interferometer_transfer(th).matrix
        b = elliptical_basis(th, SYS_POL)
        worst = max(worst, abs(abs((m @ b.vectors[0])[0]) - 1), abs(abs((m @ b.vectors[1])[1]) - 1))
    record(5, "elliptical-PBS property", worst < TOL, f"max | |<port|M|E>| - 1 | = {worst:.2e}")


def test_06_order_independence():
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        da, db = (int(d) for d in rng.choice([2, 3, 4], size=2))
        ra = Register("A", tuple(f"a{k}" for k in range(da)))
        rb = Register("B", tuple(f"b{k}" for k in range(db)))
        psi = random_state((ra, rb), rng)
        ma, mb = random_measurement(ra, rng), random_measurement(rb, rng)
        for K, L in itertools.product(ma.labels, mb.labels):
            pj = joint_probability(psi, ma, K, mb, L)
            pa = outcome_probability(psi, ma, K) * conditional_probability(psi, (ma, K), (mb, L))
            pb = outcome_probability(psi, mb, L) * conditional_probability(psi, (mb, L), (ma, K))
            worst = max(worst, abs(pj - pa), abs(pj - pb))
    elapsed = time.perf_counter() - t0
    record(6, "order independence", worst < TOL and elapsed < 10.0,
           f"max |p_KL - p_K p_(L|K)| = {worst:.2e}, {elapsed:.2f} s (< 10 s)")


@pytest.mark.parametrize("ordering", list(Ordering))
def test_07_monte_carlo_convergence(ordering):
    n = 1_000_000
    t0 = time.perf_counter()
    table = tally(run_trials(RunConfig(np.pi / 2, ChoicePolicy.FIXED1, ordering, n, seed=42)))[1]
    elapsed = time.perf_counter() - t0
    se = np.sqrt(0.25 / n)
    z13 = (table.counts[("D1", "D3")] / n - 0.5) / se
    z24 = (table.counts[("D2", "D4")] / n - 0.5) / se
    forbidden = table.counts[("D2", "D3")] + table.counts[("D1", "D4")]
    ok = abs(z13) < 4 and abs(z24) < 4 and forbidden == 0 and elapsed < 60
    record(7, f"Monte Carlo convergence [{ordering.value}]", ok,
           f"z13 {z13:+.2f}, z24 {z24:+.2f}, forbidden counts {forbidden}, {elapsed:.2f} s (< 60 s)")


@pytest.mark.parametrize("theta, choice", [(np.pi / 3, 1), (np.pi / 3, 0), (-2.0, 1)])
def test_08_ordering_equivalence(theta, choice):
    n = 1_000_000
    policy = ChoicePolicy.FIXED1 if choice else ChoicePolicy.FIXED0
    tables = {o: tally(run_trials(RunConfig(theta, policy, o, n, seed=100 + k)))[choice]
              for k, o in enumerate(Ordering)}
    worst = 0.0
    for a, b in itertools.combinations(Ordering, 2):
        worst = max(worst, compare_empirical(tables[a], tables[b], sigma=5).max_abs_z)
    record(8, f"ordering equivalence [theta={theta:.3f}, choice {choice}]", worst < 5,
           f"max pairwise |z| = {worst:.2f} (< 5)")


def test_09_collapse_repeatability():
    worst = 0.0
    for th in GRID:
        post = collapse(elliptical_route_state(th), system_detectors(), "D3")
        meas = ProjectiveMeasurement.from_basis(elliptical_basis(th, ENV))
        worst = max(worst, 1 - outcome_probability(post, meas, "E"))
    record(9, "collapse repeatability", worst < TOL, f"max epsilon = {worst:.2e}")


def test_10_wheeler():
    removed = max(abs(p - 0.5) for ph in GRID for p in wheeler_mz(ph, False))
    inserted = [wheeler_mz(ph, True) for ph in GRID]
    completeness = max(abs(p1 + p2 - 1) for p1, p2 in inserted)
    vis = visibility([(ph, p1) for ph, (p1, _) in zip(GRID, inserted)])
    ok = removed < TOL and abs(vis - 1) < TOL and completeness < TOL
    record(10, "Wheeler scenario", ok,
           f"removed dev {removed:.2e}, visibility {vis:.15f}, max |p1+p2-1| {completeness:.2e}")


INVOCATIONS = [
    ["verify", "--format", "json"],
    ["simulate", "--theta", "pi/3", "--choice", "random", "--trials", "20000", "--seed", "9"],
    ["sweep", "--grid=-pi:pi:9", "--choice", "1", "--trials", "2000", "--seed", "2"],
    ["sweep", "--grid=-pi:pi:181", "--choice", "0", "--analytic-only", "--format", "json"],
    ["wheeler", "--grid=-pi:pi:181", "--inserted"],
    ["order-check", "--samples", "50", "--max-dim", "4", "--seed", "3"],
]


def test_11_determinism(tmp_path):
    mismatched = []
    for k, argv in enumerate(INVOCATIONS):
        outs = []
        for rep in range(2):
            path = tmp_path / f"{k}_{rep}.out"
            code = main(argv + ["--out", str(path)])
            assert code == 0, argv
            files = sorted(tmp_path.glob(f"{k}_{rep}.*"))
            outs.append([f.read_bytes() for f in files])
        if outs[0] != outs[1]:
            mismatched.append(argv[0])
    record(11, "determinism", not mismatched,
           f"{len(INVOCATIONS)} invocations repeated, mismatches: {mismatched or 'none'}")
