"""Simulated state and process tomography with multinomial shot noise.

Measurements are complete orthonormal settings (every outcome of a basis is
recorded), reconstruction is the diluted R rho R maximum-likelihood iteration,
and error bars come from multinomial resampling of the observed frequencies.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import reduce
from math import prod
from typing import Callable, Sequence

import numpy as np

from .capacity import _parallel_map
from .channels import (Channel, ChoiMatrix, apply_matrix, as_kraus, choi, identity_channel,
                       process_fidelity, tensor)
from .linalg import hermitian_eig
from .states import DensityMatrix, density, project_psd, purify, von_neumann_entropy


@dataclass(frozen=True, eq=False)
class ProjectorSet:
    """Measurement settings and the d^2 probe directions they are built around.

    ``settings[s]`` is a unitary whose columns are the outcome vectors of setting s.
    """

    dims: tuple[int, ...]
    settings: np.ndarray
    probes: np.ndarray

    @property
    def dim(self) -> int:
        return prod(self.dims)

    @property
    def n_settings(self) -> int:
        return self.settings.shape[0]

    @property
    def vectors(self) -> np.ndarray:
        """All outcome vectors, shape (n_settings * dim, dim), setting-major."""
        return self.settings.transpose(0, 2, 1).reshape(-1, self.dim)

    @property
    def projectors(self) -> np.ndarray:
        v = self.vectors
        return np.einsum("na,nb->nab", v, v.conj())

    def gram_rank(self, tol: float = 1e-9) -> int:
        p = self.projectors.reshape(len(self.vectors), -1)
        return int(np.linalg.matrix_rank(p.conj() @ p.T, tol=tol))

    def probe_states(self) -> list[DensityMatrix]:
        return [DensityMatrix(np.outer(v, v.conj()), self.dims) for v in self.probes]


def ic_projectors(d: int) -> ProjectorSet:
    """Computational basis plus, for each j<k, the bases {(|j> +- |k>)/sqrt2} and
    {(|j> +- i|k>)/sqrt2} completed by the remaining basis kets."""
    d = int(d)
    if not 2 <= d <= 8:
        raise ValueError(f"ic_projectors supports 2 <= d <= 8, got {d}")
    eye = np.eye(d, dtype=complex)
    settings = [eye]
    probes = [eye[j] for j in range(d)]
    for phase in (1.0, 1j):
        for j, k in itertools.combinations(range(d), 2):
            u = eye.copy()
            u[:, j] = (eye[j] + phase * eye[k]) / np.sqrt(2)
            u[:, k] = (eye[j] - phase * eye[k]) / np.sqrt(2)
            settings.append(u)
            probes.append(u[:, j].copy())
    return ProjectorSet((d,), np.array(settings), np.array(probes))


def product_projectors(dims: Sequence[int]) -> ProjectorSet:
    """Tensor products of local ``ic_projectors`` settings, as for separately measured photons."""
    local = [ic_projectors(d) for d in dims]
    settings = [reduce(np.kron, combo) for combo in itertools.product(*(p.settings for p in local))]
    probes = [reduce(np.kron, combo) for combo in itertools.product(*(p.probes for p in local))]
    return ProjectorSet(tuple(int(d) for d in dims), np.array(settings), np.array(probes))


@dataclass(frozen=True, eq=False)
class CountRecord:
    """Outcome counts per setting, shape (n_settings, dim).

    Counts are integers for sampled data; noiseless records hold the expected
    (real-valued) counts shots * p.
    """

    counts: np.ndarray
    shots_per_setting: int
    seed: int | None

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.counts.sum(axis=1, keepdims=True)

    def to_json(self, ps: ProjectorSet) -> str:
        def enc(v):
            return [[float(z.real), float(z.imag)] for z in v]

        settings = [{"projectors": [enc(ps.settings[s][:, o]) for o in range(ps.dim)],
                     "counts": [c.item() if isinstance(c, np.generic) else c
                                for c in self.counts[s]]}
                    for s in range(ps.n_settings)]
        return json.dumps({"dim": ps.dim, "dims": list(ps.dims), "settings": settings,
                           "shots": self.shots_per_setting, "seed": self.seed})


def count_record_from_json(text: str) -> tuple[CountRecord, ProjectorSet]:
    data = json.loads(text)
    dim = int(data["dim"])
    dims = tuple(data.get("dims", [dim]))
    settings, counts = [], []
    for entry in data["settings"]:
        vecs = np.array([[complex(re, im) for re, im in v] for v in entry["projectors"]])
        settings.append(vecs.T)
        counts.append(entry["counts"])
    arr = np.array(counts)
    if np.all(arr == np.round(arr)):
        arr = arr.astype(np.int64)
    ps = ProjectorSet(dims, np.array(settings), np.zeros((0, dim), dtype=complex))
    return CountRecord(arr, int(data["shots"]), data["seed"]), ps


def probabilities(rho: np.ndarray, ps: ProjectorSet) -> np.ndarray:
    """Born probabilities <v|rho|v> per setting, shape (n_settings, dim)."""
    v = ps.vectors
    p = np.einsum("nb,nb->n", v.conj() @ rho, v).real
    return p.reshape(ps.n_settings, ps.dim)


def _setting_probabilities(rho: DensityMatrix, ps: ProjectorSet) -> np.ndarray:
    if rho.dim != ps.dim:
        raise ValueError(f"state dimension {rho.dim} does not match projectors ({ps.dim})")
    p = np.clip(probabilities(rho.mat, ps), 0.0, None)
    sums = p.sum(axis=1, keepdims=True)
    if np.max(np.abs(sums - 1)) > 1e-6:
        raise ValueError("measurement probabilities do not sum to one within 1e-6")
    return p / sums


def simulate_counts(rho: DensityMatrix, ps: ProjectorSet, shots: int, seed: int) -> CountRecord:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = _setting_probabilities(rho, ps)
    rng = np.random.default_rng(seed)
    return CountRecord(rng.multinomial(shots, p), int(shots), int(seed))


def expected_counts(rho: DensityMatrix, ps: ProjectorSet, shots: int) -> CountRecord:
    """Noiseless record: counts equal to shots * p exactly."""
    return CountRecord(shots * _setting_probabilities(rho, ps), int(shots), None)


@dataclass
class ReconstructionResult:
    rho_hat: DensityMatrix
    log_likelihood: float
    iterations: int
    converged: bool
    mc_std_entropy: float = 0.0
    history: list[float] = field(default_factory=list, repr=False)


def _log_likelihood(freq: np.ndarray, p: np.ndarray) -> float:
    mask = freq > 0
    return float(np.sum(freq[mask] * np.log(np.maximum(p[mask], 1e-300))))


def mle_reconstruct(counts: CountRecord, ps: ProjectorSet, max_iter: int = 5000,
                    tol: float = 1e-10, alpha: float = 0.5,
                    track: bool = False) -> ReconstructionResult:
    """Diluted R rho R iteration from the maximally mixed state.

    The log-likelihood is reported per shot (divided by the total count) so that
    ``tol`` is independent of the sample size. If a diluted step would lower the
    likelihood, the step size is halved until it does not.
    """
    if counts.counts.shape != (ps.n_settings, ps.dim):
        raise ValueError("count record does not match the projector set")
    d = ps.dim
    v = ps.vectors
    freq = (counts.counts / counts.counts.sum()).reshape(-1)
    n_settings = ps.n_settings
    rho = np.eye(d, dtype=complex) / d

    vc = v.conj()

    def probs(r):
        return np.einsum("nb,nb->n", vc @ r, v).real

    p = probs(rho)
    ll = _log_likelihood(freq, p)
    history = [ll] if track else []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = np.divide(freq, p, out=np.zeros_like(freq), where=p > 0) * n_settings
        R = (v.T * w) @ vc
        step = R @ rho @ R
        step /= np.trace(step).real
        a = alpha
        while True:
            cand = (1 - a) * rho + a * step
            pc = probs(cand)
            llc = _log_likelihood(freq, pc)
            if llc >= ll or a < 1e-8:
                break
            a *= 0.5
        gain = llc - ll
        if gain < 0:
            converged = True
            break
        rho, p, ll = cand, pc, llc
        if track:
            history.append(ll)
        if gain < tol:
            converged = True
            break
    rho_hat = project_psd(0.5 * (rho + rho.conj().T), ps.dims)
    return ReconstructionResult(rho_hat, ll, it, converged, history=history)


def linear_inversion(counts: CountRecord, ps: ProjectorSet) -> DensityMatrix:
    """Least-squares state estimate from frequencies, projected onto the PSD cone."""
    proj = ps.projectors.reshape(len(ps.vectors), -1)
    f = counts.frequencies.reshape(-1)
    x, *_ = np.linalg.lstsq(proj.conj(), f.astype(complex), rcond=None)
    m = x.reshape(ps.dim, ps.dim)
    return project_psd(0.5 * (m + m.conj().T), ps.dims)


def resample_counts(counts: CountRecord, rng: np.random.Generator) -> CountRecord:
    n = counts.counts.sum(axis=1)
    totals = np.rint(n).astype(np.int64)
    freq = counts.frequencies
    sampled = np.array([rng.multinomial(t, f) for t, f in zip(totals, freq)])
    return CountRecord(sampled, counts.shots_per_setting, counts.seed)


def monte_carlo_samples(counts: CountRecord, ps: ProjectorSet, resamples: int,
                        statistic: Callable[[DensityMatrix], float] = von_neumann_entropy,
                        seed: int = 0, resample: bool = True, max_iter: int = 5000,
                        tol: float = 1e-10, workers: int | None = None) -> np.ndarray:
    """Statistic of the MLE estimate over multinomially resampled count records.

    Resample k draws from ``SeedSequence([seed, k])``, so results do not depend on
    execution order. With ``resample=False`` the observed record is reused as is.
    """
    if resamples < 2:
        raise ValueError("need at least 2 resamples")

    def one(k):
        rec = counts
        if resample:
            rec = resample_counts(counts, np.random.default_rng(np.random.SeedSequence([seed, k])))
        return statistic(mle_reconstruct(rec, ps, max_iter=max_iter, tol=tol).rho_hat)

    return np.array(_parallel_map(one, range(resamples), workers))


def monte_carlo_errors(counts: CountRecord, ps: ProjectorSet, resamples: int = 100,
                       statistic: Callable[[DensityMatrix], float] = von_neumann_entropy,
                       seed: int = 0, resample: bool = True, max_iter: int = 5000,
                       tol: float = 1e-10, workers: int | None = None) -> float:
    """Monte Carlo standard deviation (ddof=1) of ``statistic`` (entropy by default)."""
    vals = monte_carlo_samples(counts, ps, resamples, statistic, seed, resample,
                               max_iter, tol, workers)
    return float(np.std(vals - vals[0], ddof=1))


def reconstruct_with_errors(counts: CountRecord, ps: ProjectorSet, resamples: int = 100,
                            seed: int = 0, **kwargs) -> ReconstructionResult:
    res = mle_reconstruct(counts, ps, **kwargs)
    res.mc_std_entropy = monte_carlo_errors(counts, ps, resamples, seed=seed, **kwargs)
    return res


@dataclass
class CoherentInfoEstimate:
    """Tomographic estimate of S(out) - S(out + reference) with Monte Carlo spreads."""

    output_entropy: float
    joint_entropy: float
    value: float
    std_output: float
    std_joint: float
    std_value: float
    output_counts: CountRecord = field(repr=False)
    joint_counts: CountRecord = field(repr=False)


def estimate_coherent_information(ch: Channel, rho: DensityMatrix, shots: int, seed: int,
                                  resamples: int = 20, max_iter: int = 5000,
                                  tol: float = 1e-10,
                                  workers: int | None = None) -> CoherentInfoEstimate:
    """Measure Ic the way the experiment does: tomography of ch(rho) and of
    (ch (x) id)(psi) for a purification psi of rho."""
    k = as_kraus(ch)
    psi = purify(rho)
    joint = tensor(k, identity_channel(psi.dims[-1]))
    out_state = density(apply_matrix(k, rho.mat), k.out_dims)
    joint_state = density(apply_matrix(joint, np.outer(psi.vec, psi.vec.conj())),
                          k.out_dims + (psi.dims[-1],))
    ps_out = product_projectors(_measurable(out_state.dims))
    ps_joint = product_projectors(_measurable(joint_state.dims))
    seeds = np.random.SeedSequence(seed).generate_state(2)
    c_out = simulate_counts(_relabel(out_state, ps_out), ps_out, shots, int(seeds[0]))
    c_joint = simulate_counts(_relabel(joint_state, ps_joint), ps_joint, shots, int(seeds[1]))
    s_out = von_neumann_entropy(mle_reconstruct(c_out, ps_out, max_iter, tol).rho_hat)
    s_joint = von_neumann_entropy(mle_reconstruct(c_joint, ps_joint, max_iter, tol).rho_hat)
    mc_out = monte_carlo_samples(c_out, ps_out, resamples, seed=seed, max_iter=max_iter,
                                 tol=tol, workers=workers)
    mc_joint = monte_carlo_samples(c_joint, ps_joint, resamples, seed=seed + 1,
                                   max_iter=max_iter, tol=tol, workers=workers)
    return CoherentInfoEstimate(s_out, s_joint, s_out - s_joint,
                                float(np.std(mc_out, ddof=1)), float(np.std(mc_joint, ddof=1)),
                                float(np.std(mc_out - mc_joint, ddof=1)), c_out, c_joint)


def _measurable(dims: Sequence[int]) -> tuple[int, ...]:
    # one-dimensional subsystems carry no information and have no IC set
    kept = tuple(d for d in dims if d > 1)
    return kept or (1,)


def _relabel(rho: DensityMatrix, ps: ProjectorSet) -> DensityMatrix:
    return DensityMatrix(rho.mat, ps.dims)


@dataclass
class ProcessTomographyResult:
    choi: ChoiMatrix
    fidelity: float
    outputs: list[DensityMatrix] = field(repr=False)
    converged: bool = True


GRAM_CONDITION_LIMIT = 1e8


def process_tomography(channel: Channel, shots: int | None = None, seed: int = 0,
                       max_iter: int = 5000, tol: float = 1e-10,
                       workers: int | None = None) -> ProcessTomographyResult:
    """Probe-state process tomography.

    Each of the d_in^2 probe states of ``ic_projectors(d_in)`` is sent through the
    channel and its output reconstructed by MLE (or taken exactly when ``shots`` is
    None). The Choi matrix follows by linear inversion over the probe basis, is
    projected onto the PSD cone, and is then congruence-rescaled so that
    Tr_out J = I/d_in holds exactly.
    """
    k = as_kraus(channel)
    d_in, d_out = k.d_in, k.d_out
    if d_in > 6:
        raise ValueError(f"process tomography supports d_in <= 6, got {d_in}")
    probes = ic_projectors(d_in).probes
    vec_probes = np.array([np.outer(p, p.conj()).reshape(-1) for p in probes])
    if np.linalg.cond(vec_probes) > GRAM_CONDITION_LIMIT:
        raise ValueError("probe states are ill-conditioned")
    ps_out = ic_projectors(d_out) if d_out <= 8 else None
    if shots is not None and ps_out is None:
        raise ValueError(f"output dimension {d_out} too large for state tomography")
    seeds = np.random.SeedSequence(seed).generate_state(len(probes), dtype=np.uint64)

    def reconstruct(idx):
        p = probes[idx]
        out = apply_matrix(k, np.outer(p, p.conj()))
        if shots is None:
            return density(out, (d_out,)), True
        state = density(out, (d_out,))
        rec = mle_reconstruct(simulate_counts(state, ps_out, shots, int(seeds[idx])), ps_out,
                              max_iter=max_iter, tol=tol)
        return rec.rho_hat, rec.converged

    results = _parallel_map(reconstruct, range(len(probes)), workers)
    outputs = np.array([r[0].mat for r in results])
    # coefficients c[jk, p] with |j><k| = sum_p c[jk, p] probe_p
    coeff = np.linalg.solve(vec_probes.T, np.eye(d_in * d_in)).T
    lam = np.einsum("xp,pab->xab", coeff, outputs).reshape(d_in, d_in, d_out, d_out)
    j = lam.transpose(0, 2, 1, 3).reshape(d_in * d_out, d_in * d_out) / d_in
    j = 0.5 * (j + j.conj().T)
    w, v = hermitian_eig(j)
    w = np.clip(w, 0.0, None)
    j = (v * (w / w.sum())) @ v.conj().T
    j = _trace_preserving_rescale(j, d_in, d_out)
    est = ChoiMatrix(density(j, (d_in, d_out)), d_in, d_out)
    fid = process_fidelity(est, choi(k))
    return ProcessTomographyResult(est, fid, [r[0] for r in results],
                                   all(r[1] for r in results))


def _trace_preserving_rescale(j: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    t = np.einsum("iaja->ij", j.reshape(d_in, d_out, d_in, d_out))
    w, v = hermitian_eig(t)
    if w[-1] <= 0:
        return j
    a = (v * (1.0 / np.sqrt(d_in * w))) @ v.conj().T
    big = np.kron(a, np.eye(d_out))
    return big @ j @ big.conj().T
