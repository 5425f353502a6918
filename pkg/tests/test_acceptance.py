"""End-to-end acceptance criteria, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line (also collected in the
terminal summary) and asserts the criterion at its stated tolerance.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from iafeedback.bitalloc import allocation_objective, brute_force_allocation, waterfill
from iafeedback.channel import NetworkConfig, complex_normal, generate_channels, make_rng, sample_distance_ratios
from iafeedback.harness import (
    ExperimentSpec,
    run_bound_verification,
    run_dof_experiment,
    run_lemma_verification,
    run_overhead_report,
    run_throughput_experiment,
)
from iafeedback.ia_core import (
    EigenSelection,
    alignment_error,
    exchange_factors,
    ia_precoders_chain,
    ia_precoders_exchange,
    interference_leakage,
    perturbed_v1,
    phase_aligned_error,
    sorted_eig,
    zf_filters,
)
from iafeedback.quantize import distortion_bound, random_unit_vectors, sample_rvq_sigma
from iafeedback.topology import TopologyKind, overhead, overhead_closed_form

pytestmark = pytest.mark.acceptance


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


# -- 1 ----------------------------------------------------------------------


def test_01_overhead_exactness(report):
    with Timer() as t:
        mismatches = []
        for d in (1, 2, 3):
            for K in range(4, 11):
                M = (K - 1) * d
                for kind in TopologyKind:
                    if overhead(kind, K, M, d).total != overhead_closed_form(kind, K, M, d):
                        mismatches.append((kind.value, K, d))
        rows = run_overhead_report(range(4, 11))
        k4 = (rows[0]["N_FF"], rows[0]["N_CF"], rows[0]["N_SF"], rows[0]["N_EX"])
        ratios = [r["N_FF"] / r["N_EX"] for r in rows]
    ok = not mismatches and k4 == (108, 39, 48, 27) and all(b > a for a, b in zip(ratios, ratios[1:]))
    report(1, "overhead exactness", ok,
           f"K=4 row {k4}; ledger mismatches {len(mismatches)}; N_FF/N_EX {ratios[0]:.1f} -> {ratios[-1]:.1f}; "
           f"{t.elapsed:.1f}s")
    assert ok


# -- 2 ----------------------------------------------------------------------


def test_02_alignment_and_zero_forcing(report):
    worst_align, worst_leak = 0.0, 0.0
    with Timer() as t:
        for K in (4, 5, 6):
            dist = sample_distance_ratios(K, 1.0, 3.0, K)
            cfg = NetworkConfig(K=K, M=K - 1, P=1e3, distances=dist)
            for seed in range(1000):
                r = generate_channels(cfg, seed)
                for ctor, scheme in ((ia_precoders_chain, "chain"), (ia_precoders_exchange, "exchange")):
                    V = ctor(cfg, r)
                    worst_align = max(worst_align, alignment_error(cfg, r, V, scheme))
                    leak = interference_leakage(cfg, r, V, zf_filters(cfg, r, V)).sum()
                    worst_leak = max(worst_leak, leak / (cfg.P * K))
    ok = worst_align < 1e-9 and worst_leak < 1e-15
    report(2, "closed-form IA alignment + ZF", ok,
           f"max alignment error {worst_align:.2e} (<1e-9); max leakage/(P K) {worst_leak:.2e} (<1e-15); "
           f"{t.elapsed:.1f}s")
    assert ok


# -- 3 ----------------------------------------------------------------------


def _ks_statistic(x, y):
    x, y = np.sort(x), np.sort(y)
    grid = np.concatenate([x, y])
    return float(np.max(np.abs(np.searchsorted(x, grid, "right") / x.size - np.searchsorted(y, grid, "right") / y.size)))


def test_03_rvq_distortion_law(report):
    from scipy.stats import ks_2samp

    n = 10_000
    crit = 1.628 * math.sqrt(2.0 / n)  # two-sample KS, alpha = 0.01
    details, ok = [], True
    with Timer() as t:
        for B in (4, 8, 12):
            rng = make_rng(1000 + B)
            explicit = np.empty(n)
            for i in range(n):
                # oracle: a fresh isotropic codebook for every trial
                cb = random_unit_vectors(rng, 2 ** B, 3)
                v = random_unit_vectors(rng, 1, 3)[0]
                explicit[i] = 1.0 - np.max(np.abs(cb.conj() @ v)) ** 2
            sampled = sample_rvq_sigma(3, B, make_rng(2000 + B), n)
            mean, se = explicit.mean(), explicit.std(ddof=1) / math.sqrt(n)
            bound = distortion_bound(3, B)
            D = ks_2samp(explicit, sampled).statistic
            assert D == pytest.approx(_ks_statistic(explicit, sampled))
            ok &= mean <= bound + 3 * se and D < crit
            details.append(f"B={B}: E[s]={mean:.3e}<=bound {bound:.3e}, KS D={D:.4f}<{crit:.4f}")
    report(3, "RVQ distortion bound + sampler KS", ok, "; ".join(details) + f"; {t.elapsed:.1f}s")
    assert ok and t.elapsed < 120


# -- 4 ----------------------------------------------------------------------


def test_04_residual_interference_bounds(report):
    spec = ExperimentSpec(trials=10_000, snr_db=(30.0,), seed=0, bound_bits=(8,))
    with Timer() as t:
        res = run_bound_verification(spec, lemma=False)
    resid = [c for c in res.checks if c.name == "residual_interference"]
    sparsity = [c for c in res.checks if c.name == "misalignment_sparsity"]
    ok = all(c.passed for c in resid + sparsity)
    worst = max(c.empirical / c.bound for c in resid)
    report(4, "residual-interference bounds (star, exchange; B=8)", ok,
           f"{sum(c.passed for c in resid)}/{len(resid)} receivers within bound+3SE, worst mean/bound {worst:.3f}; "
           f"max stray/total {max(c.empirical for c in sparsity):.1e} (<=1e-12); {t.elapsed:.1f}s")
    assert ok and t.elapsed < 300


# -- 5 ----------------------------------------------------------------------


def test_05_waterfill_optimality(report):
    rng = np.random.default_rng(5)
    worst = 0.0
    with Timer() as t:
        for i in range(1000):
            a = 10.0 ** rng.uniform(-2, 4, 4)
            bt = (8, 16, 20)[i % 3]
            w = allocation_objective(a, waterfill(a, bt, 3).integer.bits, 3)
            b = allocation_objective(a, brute_force_allocation(a, bt, 3).bits, 3)
            worst = max(worst, w / b)
        hand = waterfill([4, 1, 1, 1], 16, 3).integer.bits
    ok = worst <= 1.05 and hand == (7, 3, 3, 3)
    report(5, "water-filling vs brute force", ok,
           f"worst objective ratio {worst:.6f} (<=1.05) over 1000 instances; a=[4,1,1,1] -> {list(hand)}; "
           f"{t.elapsed:.1f}s")
    assert ok and t.elapsed < 60


# -- 6, 7 -------------------------------------------------------------------


@pytest.fixture(scope="module")
def throughput_table():
    spec = ExperimentSpec(K=4, M=3, snr_db=(30.0,), trials=2000, total_bits=16, seed=0)
    with Timer() as t:
        table = run_throughput_experiment(spec)
    return table, t.elapsed


def test_06_dynamic_beats_equal(report, throughput_table):
    table, elapsed = throughput_table
    parts, ok = [], True
    for topo in ("star", "exchange"):
        gap, se = table.paired_difference(30.0, (topo, "dynamic_waterfill"), (topo, "equal"))
        ok &= gap > 3 * se
        parts.append(f"{topo}: gap {gap:.3f} = {gap / se:.1f} SE")
    report(6, "dynamic > equal allocation (30 dB, B_T=16, 2000 paired trials)", ok,
           "; ".join(parts) + f"; {elapsed:.1f}s")
    assert ok and elapsed < 600


def test_07_exchange_beats_star(report, throughput_table):
    table, elapsed = throughput_table
    parts, ok = [], True
    for scheme in ("equal", "dynamic_waterfill"):
        gap, se = table.paired_difference(30.0, ("exchange", scheme), ("star", scheme))
        ok &= gap > 3 * se
        parts.append(f"{scheme}: gap {gap:.3f} = {gap / se:.1f} SE")
    report(7, "CSI exchange > star at equal B_T", ok, "; ".join(parts))
    assert ok


# -- 8 ----------------------------------------------------------------------


def test_08_dof_scaling(report):
    grid = tuple(float(x) for x in range(10, 41, 3))  # 10, 13, ..., 40 dB
    spec = ExperimentSpec(snr_db=grid, trials=1000, seed=0, distance_mode="fixed_ratio", ratio_low=2.0,
                          ratio_high=2.0, topologies=("exchange",), c_const=2.0,
                          schemes=("dof_centralized", "dof_distributed", "equal"), total_bits=16)
    with Timer() as t:
        res = run_dof_experiment(spec)
        control = run_dof_experiment(replace(spec, schemes=("equal",)), fit_window_db=10.0)
    slope = res.slope("exchange", "dof_centralized")
    steps = np.diff(res.total_bits[("exchange", "dof_centralized")])
    sat = control.slope("exchange", "equal")
    ok = abs(slope - 4) <= 0.4 and np.all(np.abs(steps - 8) <= 1) and sat < 2
    report(8, "DoF scaling with B_T* (C=2, ratio 2)", ok,
           f"slope {slope:.3f} (4 +/- 0.4; distributed {res.slope('exchange', 'dof_distributed'):.3f}); "
           f"dB_T* per 3 dB {sorted(set(steps.astype(int).tolist()))} (8 +/- 1); fixed B_T=16 slope over top "
           f"decade {sat:.3f} (<2); {t.elapsed:.1f}s")
    assert ok and t.elapsed < 900


# -- 9 ----------------------------------------------------------------------


def test_09_matrix_quantization_lemma(report):
    with Timer() as t:
        exact_err = {1e-4: [], 1e-6: []}
        first_err = {1e-4: [], 1e-6: []}
        cfg = NetworkConfig(K=4, M=3)
        for seed in range(500):
            r = generate_channels(cfg, seed)
            he_a, he_b = exchange_factors(r.H)
            v = sorted_eig(he_a @ he_b)[1][:, 0]
            dH = complex_normal(make_rng(10_000 + seed), (3, 3))
            dH /= np.linalg.norm(dH)
            for s in exact_err:
                first, exact = perturbed_v1(r, EigenSelection(), dH, s)
                exact_err[s].append(np.linalg.norm(phase_aligned_error(v, exact)) ** 2)
                first_err[s].append(np.linalg.norm(phase_aligned_error(v, first)) ** 2)
        ratio_exact = np.mean(exact_err[1e-4]) / np.mean(exact_err[1e-6])
        ratio_first = np.mean(first_err[1e-4]) / np.mean(first_err[1e-6])
        scaling_ok = all(100 / 3 <= x <= 300 for x in (ratio_exact, ratio_first))

        spec = ExperimentSpec(trials=2000, snr_db=(30.0,), seed=0, lemma_snr_db=(10.0, 20.0, 30.0))
        lemma = run_lemma_verification(spec)
    bound_checks = [c for c in lemma.checks if c.name == "eigenvector_error"]
    trend = [c for c in lemma.checks if c.name == "scaled_matrix_bits_residual"]
    ok = scaling_ok and all(c.passed for c in bound_checks + trend)
    trend_text = ", ".join(f"{c.bits}: {c.empirical:.2f} (limit {c.bound:.2f})" for c in trend)
    report(9, "matrix-quantization perturbation + scaled B_M trend", ok,
           f"||dv||^2 ratio sigma 1e-4/1e-6: exact {ratio_exact:.1f}, first-order {ratio_first:.1f} (100, x3); "
           f"eigen-error bound {sum(c.passed for c in bound_checks)}/{len(bound_checks)}; "
           f"residual trend {trend_text}; {t.elapsed:.1f}s")
    assert scaling_ok, "squared-error scaling"
    assert all(c.passed for c in bound_checks), "eigenvector error bound"
    assert all(c.passed for c in trend), "non-increasing residual with B_M = (M^2-1) log2 P"
    assert t.elapsed < 120


# -- 10 ---------------------------------------------------------------------


def test_10_determinism_across_workers(report):
    spec = ExperimentSpec(snr_db=(10.0, 30.0), trials=300, seed=11,
                          schemes=("equal", "dynamic_waterfill", "perfect_csi"))
    with Timer() as t:
        one = run_throughput_experiment(spec).to_csv()
        two = run_throughput_experiment(replace(spec, workers=2)).to_csv()
        again = run_throughput_experiment(spec).to_csv()
    ok = one == two == again
    report(10, "byte-identical CSV across worker counts", ok,
           f"workers 1 vs 2 vs rerun identical: {ok} ({len(one)} bytes); {t.elapsed:.1f}s")
    assert ok
