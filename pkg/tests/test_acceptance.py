"""End-to-end acceptance checks.

Each test records one PASS/FAIL line, printed in the terminal summary and
on stdout, then asserts the same condition.
"""

import itertools
import time

import numpy as np
import pytest
from scipy import stats

import conftest
from conftest import random_market
from oracles import fd_jacobian_diagonal, purchase_by_series
from trialoffer.dataset import builtin_examples, load_dataset
from trialoffer.equilibrium import (
    all_equilibria,
    equilibrium_for_support,
    expected_purchases_at,
    inner_equilibrium,
    optimal_static_ranking,
)
from trialoffer.experiments import parse_config, run_experiment
from trialoffer.metrics import efficiency_curve, mann_whitney_u, unpredictability
from trialoffer.model import (
    MarketSpec,
    Ranking,
    effective_quality,
    purchase_probabilities,
    purchase_probabilities_from_counts,
    quality_ranking,
)
from trialoffer.ode import decay_residual, integrate
from trialoffer.signals import Affine, Power, signal_values
from trialoffer.sim import Popularity, RunConfig, run_ensemble, world_rng


def report(number, ok, detail):
    line = f"ACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'} - {detail}"
    conftest.ACCEPTANCE_LINES[number] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module", autouse=True)
def warm_kernel():
    # compile (or load from cache) the simulation kernel outside the timed sections
    spec = MarketSpec([0.5, 0.4], [1, 1], [1, 1])
    run_ensemble(spec, RunConfig(Power(0.5), 10, policy=Popularity()), 1)
    run_ensemble(spec, RunConfig(Power(0.5), 10, time_convention="purchase"), 1)


def test_1_example_two_items():
    spec = builtin_examples()["example_7_1"]
    start = time.perf_counter()
    rank = quality_ranking(spec)
    eq = inner_equilibrium(spec, rank, 0.5)
    with_signal = expected_purchases_at(spec, rank, Power(0.5), eq.shares)
    without = expected_purchases_at(spec, rank, Affine(alpha=1.0, beta=0.0), eq.shares)
    elapsed = time.perf_counter() - start
    ok = abs(with_signal - 0.8286) <= 5e-4 and abs(without - 0.8615) <= 5e-4 and elapsed < 1e-3
    report(1, ok, f"with signal {with_signal:.6f}, without {without:.6f}, {elapsed * 1e3:.3f} ms")


def test_2_example_reordering():
    spec = builtin_examples()["example_7_2"]
    start = time.perf_counter()
    qrank = quality_ranking(spec)
    swapped = Ranking([0, 2, 1])
    q_value = expected_purchases_at(spec, qrank, Power(0.3), inner_equilibrium(spec, qrank, 0.3).shares)
    s_value = expected_purchases_at(spec, swapped, Power(0.3), inner_equilibrium(spec, swapped, 0.3).shares)
    best, best_value = optimal_static_ranking(spec, 0.3, method="exhaustive")
    elapsed = time.perf_counter() - start
    # 0.9154 is the four-digit rounding of the swapped value; the stated 5e-4 band applies
    ok = (
        abs(q_value - 0.8026) <= 5e-4
        and abs(s_value - 0.9154) <= 5e-4
        and best_value >= 0.9154 - 5e-4
        and best_value >= s_value - 1e-12
        and elapsed < 1e-2
    )
    report(
        2,
        ok,
        f"quality {q_value:.6f}, swapped {s_value:.6f}, search {best.sigma.tolist()} -> {best_value:.6f}, "
        f"{elapsed * 1e3:.2f} ms",
    )


def test_3_trace_formula():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    worst = 0.0
    checked = 0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        spec = random_market(rng, n)
        qbar = effective_quality(spec)
        for r in (0.5, 1.5, 2.0, 3.0):
            # sublinear boundary equilibria have no derivative, so r < 1 uses the full support
            sizes = [n] if r < 1 else range(1, n + 1)
            for size in sizes:
                Q = np.sort(rng.choice(n, size, replace=False))
                eq = equilibrium_for_support(spec, None, r, Q)
                fd_trace = fd_jacobian_diagonal(qbar, r, eq.shares).sum()
                worst = max(worst, abs(fd_trace - eq.trace))
                checked += 1
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 1.0
    report(3, ok, f"{checked} equilibria, max |trace - FD| = {worst:.2e}, {elapsed:.2f} s")


def test_4_sublinear_convergence():
    spec = builtin_examples()["five_song"]
    rank = quality_ranking(spec)
    start = time.perf_counter()
    parts = []
    ok = True
    for r in (0.1, 0.25, 0.5):
        phi_star = inner_equilibrium(spec, rank, r).shares
        cfg = RunConfig(Power(r), 100_000, time_convention="purchase", sample_stride=100_000, seed=4)
        finals = np.array([rec.final_shares for rec in run_ensemble(spec, cfg, 20)])
        mean_err = float(np.max(np.abs(finals.mean(axis=0) - phi_star)))
        close = int(np.sum(np.max(np.abs(finals - phi_star), axis=1) <= 0.05))
        ok &= mean_err <= 0.02 and close >= 18
        parts.append(f"r={r}: mean err {mean_err:.4f}, {close}/20 within 0.05")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 5.0
    report(4, ok, "; ".join(parts) + f"; {elapsed:.2f} s")


def test_5_superlinear_monopoly():
    spec = load_dataset().spec
    start = time.perf_counter()
    cfg = RunConfig(Power(1.25), 1_000_000, sample_stride=1_000_000, seed=7)
    finals = np.array([rec.final_shares for rec in run_ensemble(spec, cfg, 20)])
    elapsed = time.perf_counter() - start
    monopolies = int(np.sum(finals.max(axis=1) > 0.9))
    winners = sorted({int(k) + 1 for k in finals.argmax(axis=1)})
    ok = monopolies >= 16 and len(winners) >= 2 and elapsed < 120
    report(5, ok, f"{monopolies}/20 worlds with max share > 0.9, winners {winners}, {elapsed:.1f} s")


def test_6_unpredictability_ordering():
    spec = load_dataset(setting="anticorrelated").spec
    start = time.perf_counter()
    per_world = {}
    overall = {}
    for r in (0.5, 1.25):
        cfg = RunConfig(Power(r), 100_000, sample_stride=100_000, seed=11)
        st_ = unpredictability(np.array([rec.final_shares for rec in run_ensemble(spec, cfg, 40)]))
        per_world[r], overall[r] = st_.per_world, st_.overall
    res = mann_whitney_u(per_world[0.5], per_world[1.25], "a_less")
    elapsed = time.perf_counter() - start
    ok = res.pvalue < 0.05 and elapsed < 300
    report(6, ok, f"U(0.5)={overall[0.5]:.4f}, U(1.25)={overall[1.25]:.4f}, one-sided p={res.pvalue:.2e}, "
                  f"{elapsed:.1f} s")


def test_7_quality_ranking_dominates():
    start = time.perf_counter()
    parts = []
    ok = True
    for setting in ("independent", "anticorrelated"):
        spec = load_dataset(setting=setting).spec
        for r in (0.5, 1.0):
            totals = {}
            for name, policy in (("quality", None), ("popularity", Popularity())):
                kwargs = {} if policy is None else {"policy": policy}
                cfg = RunConfig(Power(r), 100_000, sample_stride=10_000, seed=17, **kwargs)
                totals[name] = float(efficiency_curve(run_ensemble(spec, cfg, 20)).mean_downloads[-1])
            ok &= totals["quality"] >= totals["popularity"]
            parts.append(f"{setting} r={r}: {totals['quality']:.0f} vs {totals['popularity']:.0f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 300
    report(7, ok, "; ".join(parts) + f"; {elapsed:.1f} s")


def test_8_decay_law():
    rng = np.random.default_rng(8)
    start = time.perf_counter()
    worst = {}
    relative = {}
    for r in (0.3, 0.5, 2.0):
        worst[r] = relative[r] = 0.0
        for _ in range(20):
            spec = random_market(rng, 3)
            traj = integrate(spec, None, Power(r), rng.dirichlet(np.ones(3)), 10.0, 0.005)
            qbar = effective_quality(spec)
            for i, j in itertools.combinations(range(3), 2):
                res = decay_residual(traj, spec, None, r, i, j)
                h_ij = traj.states[:, i] ** (1 - r) / qbar[i] - traj.states[:, j] ** (1 - r) / qbar[j]
                worst[r] = max(worst[r], res)
                relative[r] = max(relative[r], res / np.max(np.abs(h_ij)))
    spec = random_market(np.random.default_rng(80), 3)
    phi0 = np.array([0.5, 0.3, 0.2])
    hs = np.array([0.2, 0.1, 0.05, 0.025])
    res = [decay_residual(integrate(spec, None, Power(0.5), phi0, 10.0, h), spec, None, 0.5, 0, 1) for h in hs]
    order = float(np.polyfit(np.log(hs), np.log(res), 1)[0])
    elapsed = time.perf_counter() - start
    ok = all(w < 1e-5 for w in worst.values()) and order >= 3.5 and elapsed < 10
    detail = ", ".join(f"r={r}: {worst[r]:.2e} (relative {relative[r]:.1e})" for r in worst)
    report(8, ok, f"max residual {detail}; observed order {order:.2f}; {elapsed:.2f} s")


def test_9_property_suites():
    rng = np.random.default_rng(9)
    start = time.perf_counter()

    series = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        spec = random_market(rng, n)
        rank = Ranking(rng.permutation(n))
        phi = rng.dirichlet(np.ones(n))
        sig = Power(float(rng.uniform(0.1, 3)))
        oracle = purchase_by_series(spec.visibility[rank.sigma], spec.quality, signal_values(sig, spec.appeal, phi))
        series = max(series, float(np.max(np.abs(purchase_probabilities(spec, rank, sig, phi) - oracle))))

    spec3 = MarketSpec([0.9, 0.5, 0.7], [1, 1, 1], [0.6, 1.0, 0.8])
    phi = np.array([0.2, 0.3, 0.5])
    p = purchase_probabilities(spec3, None, Power(0.7), phi)
    draws = world_rng(9).random(150_000)
    items = np.minimum(np.searchsorted(np.cumsum(p), draws * p.sum(), side="right"), 2)
    kept = items[items != 2][:100_000]
    qbar = effective_quality(spec3)[:2]
    psi = phi[:2] / (1 - phi[2])
    w = qbar * psi**0.7
    chi_p = float(stats.chisquare(np.bincount(kept, minlength=2), w / w.sum() * kept.size).pvalue)

    scale = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        spec = random_market(rng, n)
        d = rng.uniform(0.01, 100, n)
        sig = Power(float(rng.uniform(0.1, 3)))
        a = purchase_probabilities_from_counts(spec, None, sig, d)
        b = purchase_probabilities_from_counts(spec, None, sig, float(rng.uniform(1e-6, 1e6)) * d)
        scale = max(scale, float(np.max(np.abs(a - b))))

    residual = 0.0
    monotone = True
    for _ in range(200):
        n = int(rng.integers(2, 7))
        spec = random_market(rng, n)
        r = float(rng.choice([0.2, 0.5, 0.8, 1.5, 2.5]))
        for eq in all_equilibria(spec, None, r):
            got = purchase_probabilities(spec, None, Power(r), eq.shares)
            residual = max(residual, float(np.max(np.abs(got - eq.shares))))
        if r < 1:
            inner = inner_equilibrium(spec, None, r).shares
            monotone &= bool(np.all(np.diff(inner[np.argsort(effective_quality(spec))]) >= 0))

    elapsed = time.perf_counter() - start
    ok = series < 1e-10 and chi_p > 0.01 and scale < 1e-12 and residual < 1e-12 and monotone and elapsed < 30
    report(
        9,
        ok,
        f"series {series:.1e}, submarket chi2 p={chi_p:.3f}, scale {scale:.1e}, "
        f"fixed-point {residual:.1e}, monotone {monotone}, {elapsed:.1f} s",
    )


def test_10_determinism(tmp_path):
    common = dict(
        kind="unpredictability_table",
        market="musiclab_anticorrelated",
        r_grid=[0.5, 1.25],
        worlds=8,
        iterations=20_000,
        sample_stride=5_000,
        seed=10,
    )
    trees = []
    for label, workers in (("a", 1), ("b", 1), ("c", 4)):
        out = tmp_path / label
        run_experiment(parse_config({**common, "output_dir": str(out), "workers": workers}))
        trees.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    eff = dict(common, kind="efficiency", market="musiclab_independent", policies=["quality", "popularity"])
    for label, workers in (("d", 1), ("e", 3)):
        out = tmp_path / label
        run_experiment(parse_config({**eff, "output_dir": str(out), "workers": workers}))
    eff_same = {p.name: p.read_bytes() for p in (tmp_path / "d").iterdir()} == {
        p.name: p.read_bytes() for p in (tmp_path / "e").iterdir()
    }
    ok = trees[0] == trees[1] == trees[2] and eff_same
    report(10, ok, f"{len(trees[0])} table files and efficiency outputs byte-identical across reruns and 1/3/4 workers")
