"""Exit criteria, one test per criterion, each printing a PASS/FAIL line."""

import time
from math import log2

import numpy as np
import pytest

from cohinfo.capacity import (coherent_information, coherent_information_via_purification,
                              delta_nonadditivity, optimize_ci_family, optimize_ci_general,
                              r_family, scan_delta, singularity_rate_regression,
                              singularity_rate_spectral, u_family, wv_family)
from cohinfo.channels import (amplitude_damping, complementary, depolarizing, identity_channel,
                              platypus, tensor)
from cohinfo.linalg import random_unitary
from cohinfo.states import (DensityMatrix, family_rho_r, family_rho_u, partial_trace,
                            random_density_matrix, tensor_states, von_neumann_entropy)
from cohinfo.tomography import (ic_projectors, mle_reconstruct, process_tomography,
                                simulate_counts)

M3 = platypus(3)
AD = amplitude_damping(0.5)
JOINT = tensor(M3, AD)
REFERENCE_OPTIMUM = np.array([0.44, 0.07, 0.27])

REPORT: list[str] = []


def report(n: int, ok: bool, detail: str) -> None:
    REPORT.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def h2(p):
    return 0.0 if p <= 0 or p >= 1 else -p * log2(p) - (1 - p) * log2(1 - p)


def ic_closed_form(u):
    out = (-(1 - u) * log2((1 - u) / 2) if u < 1 else 0.0) - (u * log2(u) if u > 0 else 0.0)
    return out - h2((1 - u) / 2)


def closed_form_max():
    """Dense vectorized scan of the closed form, refined by golden-section search."""
    u = np.linspace(1e-6, 1 - 1e-6, 10**6 + 1)
    out = -(1 - u) * np.log2((1 - u) / 2) - u * np.log2(u)
    p = (1 - u) / 2
    vals = out - (-p * np.log2(p) - (1 - p) * np.log2(1 - p))
    k = int(np.argmax(vals))
    lo, hi = u[k - 1], u[k + 1]
    g = (np.sqrt(5) - 1) / 2
    for _ in range(100):
        a, b = hi - g * (hi - lo), lo + g * (hi - lo)
        if ic_closed_form(a) > ic_closed_form(b):
            hi = b
        else:
            lo = a
    x = 0.5 * (lo + hi)
    return x, ic_closed_form(x)


def test_criterion_1_closed_form_agreement():
    start = time.perf_counter()
    us = np.linspace(0, 1, 101)
    err = max(abs(coherent_information(M3, family_rho_u(u)) - ic_closed_form(u)) for u in us)
    elapsed = time.perf_counter() - start
    report(1, err < 1e-9 and elapsed < 1.0,
           f"max |Ic - closed form| = {err:.2e} over 101 points, {elapsed:.2f}s")


@pytest.fixture(scope="module")
def single_channel_optimum():
    start = time.perf_counter()
    res = optimize_ci_family(M3, u_family())
    return res, time.perf_counter() - start


def test_criterion_2_single_channel_optimum(single_channel_optimum):
    res, elapsed = single_channel_optimum
    u_star, q_star = closed_form_max()
    u = res.best_params[0]
    ok = (abs(res.best_value - q_star) < 1e-6 and abs(u - 0.445) < 0.01
          and res.best_value >= 0.65 and elapsed < 5)
    report(2, ok, f"Q1(M3) = {res.best_value:.9f} (closed form {q_star:.9f}) at u = {u:.5f} "
                  f"(closed form {u_star:.5f}, reported 0.445), {elapsed:.2f}s")


def test_criterion_3_amplitude_damping_vanishes():
    start = time.perf_counter()
    res = optimize_ci_general(AD, restarts=32)
    elapsed = time.perf_counter() - start
    value = max(res.best_value, 0.0)
    ok = res.best_value >= -1e-6 and value <= 1e-6 and elapsed < 60
    report(3, ok, f"Q1(A_1/2) = {res.best_value:.2e} over 32 restarts, {elapsed:.1f}s")


def _joint_kraus_oracle():
    """Kraus operators of M3 (x) A_1/2 written out by hand, independent of the library."""
    k0 = np.zeros((3, 3))
    k0[0, 0], k0[2, 1] = 1 / np.sqrt(2), 1.0
    k1 = np.zeros((3, 3))
    k1[1, 0], k1[2, 2] = 1 / np.sqrt(2), 1.0
    a0 = np.array([[1.0, 0.0], [0.0, np.sqrt(0.5)]])
    a1 = np.array([[0.0, np.sqrt(0.5)], [0.0, 0.0]])
    return np.array([np.kron(m, a) for m in (k0, k1) for a in (a0, a1)])


def _batched_ci(kraus, rhos):
    out = np.einsum("kab,nbc,kdc->nad", kraus, rhos, kraus)
    env = np.einsum("iab,nbc,jac->nij", kraus, rhos, kraus)

    def ent(m):
        w = np.linalg.eigvalsh(m)
        w = np.where(w > 1e-12, w, 1.0)
        return -np.sum(w * np.log2(w), axis=1)

    return ent(out) - ent(env)


def grid_oracle_max(steps=101):
    kraus = _joint_kraus_oracle()
    grid = np.linspace(0, 1, steps)
    best, arg = -np.inf, None
    for r3 in grid:
        r1, r2 = np.meshgrid(grid, grid, indexing="ij")
        mask = r1 + r2 <= 1 + 1e-12
        r1, r2 = r1[mask], r2[mask]
        phi = np.zeros(6)
        phi[4], phi[3] = np.sqrt(1 - r3), np.sqrt(r3)  # |20> and |11>
        rhos = np.zeros((len(r1), 6, 6))
        rhos[:, 0, 0], rhos[:, 1, 1] = r1, r2
        rhos += np.clip(1 - r1 - r2, 0, None)[:, None, None] * np.outer(phi, phi)
        vals = _batched_ci(kraus, rhos)
        k = int(np.argmax(vals))
        if vals[k] > best:
            best, arg = vals[k], (r1[k], r2[k], r3)
    return best, np.array(arg)


def test_criterion_4_nonadditivity(single_channel_optimum):
    start = time.perf_counter()
    q_a = single_channel_optimum[0].best_value
    delta_ref = delta_nonadditivity(M3, AD, family_rho_r(*REFERENCE_OPTIMUM), q_a, 0.0)
    res = optimize_ci_family(JOINT, r_family())
    delta_max = res.best_value - q_a
    grid_best, grid_arg = grid_oracle_max()
    grid_delta = grid_best - q_a
    elapsed = time.perf_counter() - start
    dev = np.max(np.abs(res.best_params - REFERENCE_OPTIMUM))
    ok = (delta_ref > 1e-4 and dev <= 0.02 and abs(delta_max - grid_delta) <= 1e-5
          and delta_max >= grid_delta - 1e-12 and elapsed < 600)
    report(4, ok, f"Delta(0.44,0.07,0.27) = {delta_ref:.6f}; ideal Delta_max = {delta_max:.7f} "
                  f"at {np.round(res.best_params, 4).tolist()} (grid oracle {grid_delta:.7f} "
                  f"at {np.round(grid_arg, 2).tolist()}); reported measurement 0.042+-0.002; "
                  f"{elapsed:.1f}s")


@pytest.mark.parametrize("axis, fixed, reference", [
    (0, (0.07, 0.27), (0.37, 0.51)),
    (1, (0.44, 0.27), (0.0, 0.14)),
    (2, (0.44, 0.07), (0.14, 0.46)),
])
def test_criterion_5_positivity_regions(axis, fixed, reference, single_channel_optimum):
    start = time.perf_counter()
    q_a = single_channel_optimum[0].best_value
    curve = scan_delta(M3, AD, r_family(), axis, fixed, grid_points=1001, q_a=q_a, q_b=0.0)
    ts = np.array([t for t, _ in curve])
    ds = np.array([d for _, d in curve])
    # the positive run containing the reference optimum value of this coordinate
    centre = int(np.argmin(np.abs(ts - REFERENCE_OPTIMUM[axis])))
    lo = hi = centre
    while lo > 0 and ds[lo - 1] > 0:
        lo -= 1
    while hi < len(ds) - 1 and ds[hi + 1] > 0:
        hi += 1
    positive = ds[centre] > 0
    a, b = ts[lo], ts[hi]
    overlap = max(0.0, min(b, reference[1]) - max(a, reference[0]))
    frac = overlap / (reference[1] - reference[0])
    elapsed = time.perf_counter() - start
    name = f"r{axis + 1}"
    report(5, positive and overlap > 0 and frac >= 0.5 and elapsed < 120,
           f"{name}: ideal Delta > 0 on [{a:.3f}, {b:.3f}], covers {100 * frac:.0f}% of "
           f"reference interval [{reference[0]}, {reference[1]}], {elapsed:.1f}s")


def test_criterion_6_singularity_rates():
    start = time.perf_counter()
    u, wv = u_family(), wv_family(0.27)
    cases = {
        "M3 output": (M3, u),
        "M3 env": (complementary(M3), u),
        "joint output": (JOINT, wv),
        "joint env": (complementary(JOINT), wv),
    }
    spec = {k: singularity_rate_spectral(ch, fam).x for k, (ch, fam) in cases.items()}
    reg = {k: singularity_rate_regression(ch, fam).x for k, (ch, fam) in cases.items()}
    elapsed = time.perf_counter() - start
    ok = (abs(spec["M3 output"] - 1) <= 0.002 and spec["M3 env"] == 0.0
          and abs(spec["joint output"] - 1) <= 0.002
          and all(abs(spec[k] - reg[k]) <= 0.03 for k in cases)
          and spec["joint output"] > 5 * spec["joint env"] > 0
          and reg["joint output"] > 5 * reg["joint env"] > 0
          and elapsed < 30)
    detail = "; ".join(f"{k}: spectral {spec[k]:.4f}, regression {reg[k]:.4f}" for k in cases)
    report(6, ok, f"{detail} (reference 0.998, none, 0.943, 0.096); {elapsed:.1f}s")


def test_criterion_7_purification_identity():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    pool = [M3, AD, amplitude_damping(0.2), JOINT, tensor(M3, amplitude_damping(0.8)),
            identity_channel(2), identity_channel(3), depolarizing(0.4, 2)]
    worst = 0.0
    for _ in range(100):
        ch = pool[int(rng.integers(len(pool)))]
        rho = random_density_matrix(ch.d_in, rng, rank=int(rng.integers(1, ch.d_in + 1)))
        worst = max(worst, abs(coherent_information(ch, rho)
                               - coherent_information_via_purification(ch, rho)))
    elapsed = time.perf_counter() - start
    report(7, worst < 1e-8 and elapsed < 30,
           f"max |Ic direct - Ic purified| = {worst:.2e} over 100 pairs, {elapsed:.2f}s")


def test_criterion_8_tomography_pipeline():
    start = time.perf_counter()
    exact = [process_tomography(ch).fidelity for ch in (M3, JOINT)]
    noisy_m3 = [process_tomography(M3, shots=10**5, seed=s).fidelity for s in range(20)]
    noisy_joint = [process_tomography(JOINT, shots=10**5, seed=s).fidelity for s in range(20)]
    monotone = True
    rng = np.random.default_rng(8)
    for d in (2, 3, 6):
        ps = ic_projectors(d)
        for seed in range(3):
            rho = random_density_matrix(d, rng, rank=int(rng.integers(1, d + 1)))
            hist = mle_reconstruct(simulate_counts(rho, ps, 10**4, seed), ps, track=True).history
            monotone &= bool(np.all(np.diff(hist) >= 0))
    elapsed = time.perf_counter() - start
    med_m3, med_joint = float(np.median(noisy_m3)), float(np.median(noisy_joint))
    ok = (all(abs(f - 1) <= 1e-6 for f in exact) and med_m3 >= 0.99 and med_joint >= 0.97
          and monotone and elapsed < 600)
    report(8, ok, f"noiseless F = {exact[0]:.8f}, {exact[1]:.8f}; median F at 1e5 shots: "
                  f"M3 {med_m3:.4f} (reference 0.997+-0.003), joint {med_joint:.4f} "
                  f"(reference 0.983+-0.003); likelihood monotone: {monotone}; {elapsed:.1f}s")


def test_criterion_9_property_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    ok = True
    for _ in range(50):
        a, b = random_density_matrix(2, rng), random_density_matrix(3, rng)
        s_ab = von_neumann_entropy(tensor_states(a, b))
        ok &= abs(s_ab - von_neumann_entropy(a) - von_neumann_entropy(b)) < 1e-8
        u = random_unitary(3, rng)
        ok &= abs(von_neumann_entropy(DensityMatrix(u @ b.mat @ u.conj().T, (3,)))
                  - von_neumann_entropy(b)) < 1e-8
    for ch in (M3, AD, JOINT, depolarizing(0.3, 3), tensor(AD, M3)):
        for derived in (tensor(ch, AD), complementary(ch)):
            k = derived.kraus
            ok &= np.allclose(np.einsum("kai,kaj->ij", k.conj(), k), np.eye(derived.d_in),
                              atol=1e-9)
    for _ in range(20):
        rho = random_density_matrix(4, rng, dims=(2, 2))
        brute = np.array([[sum(rho.mat[2 * i + k, 2 * j + k] for k in range(2))
                           for j in range(2)] for i in range(2)])
        ok &= np.allclose(partial_trace(rho, [0]).mat, brute, atol=1e-14)
    ps = ic_projectors(3)
    rho = random_density_matrix(3, rng)
    ok &= np.array_equal(simulate_counts(rho, ps, 1000, 5).counts,
                         simulate_counts(rho, ps, 1000, 5).counts)
    ok &= np.array_equal(process_tomography(AD, 1000, seed=2).choi.mat,
                         process_tomography(AD, 1000, seed=2).choi.mat)
    elapsed = time.perf_counter() - start
    report(9, bool(ok) and elapsed < 60, f"property checks {'green' if ok else 'red'}, "
                                         f"{elapsed:.2f}s")
