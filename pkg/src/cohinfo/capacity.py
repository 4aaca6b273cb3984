"""Coherent information, its maximization, log-singularity rates and nonadditivity."""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .channels import (Channel, apply_matrix, as_kraus, environment_matrix,
                       identity_channel, tensor)
from .states import (DensityMatrix, density, entropy_of_spectrum, family_rho_r,
                     family_rho_u, family_rho_wv, purify)
from .linalg import hermitian_eigvals


@dataclass(frozen=True)
class StateFamily:
    """Parameterized input states with box bounds and an optional extra feasibility test."""

    name: str
    generator: Callable[..., DensityMatrix]
    bounds: tuple[tuple[float, float], ...]
    feasible: Callable[..., bool] | None = None

    @property
    def arity(self) -> int:
        return len(self.bounds)

    def contains(self, params: Sequence[float]) -> bool:
        if len(params) != self.arity:
            return False
        if any(not lo <= p <= hi for p, (lo, hi) in zip(params, self.bounds)):
            return False
        return self.feasible is None or bool(self.feasible(*params))

    def __call__(self, *params: float) -> DensityMatrix:
        return self.generator(*params)


def u_family() -> StateFamily:
    return StateFamily("u", family_rho_u, ((0.0, 1.0),))


def wv_family(v: float) -> StateFamily:
    """rho(w, v) with v held fixed; the free parameter is w."""
    family_rho_wv(0.0, v)  # validates v
    return StateFamily(f"wv:{v}", lambda w: family_rho_wv(w, v), ((0.0, 1.0),))


def r_family() -> StateFamily:
    return StateFamily("r", family_rho_r, ((0.0, 1.0),) * 3,
                       feasible=lambda r1, r2, r3: r1 + r2 <= 1.0)


def diagonal_family(d: int, i: int = 0, j: int = 1) -> StateFamily:
    """(1-t)|i><i| + t|j><j|."""
    def gen(t):
        m = np.zeros((d, d))
        m[i, i], m[j, j] = 1 - t, t
        return DensityMatrix(m, (d,))
    return StateFamily(f"diag{d}", gen, ((0.0, 1.0),))


@dataclass
class OptimizationResult:
    best_params: np.ndarray
    best_value: float
    evaluations: int
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)


def _check_dims(ch: Channel, rho: DensityMatrix):
    if rho.dim != ch.d_in:
        raise ValueError(f"input dimension {rho.dim} does not match channel d_in={ch.d_in}")


def output_entropy(ch: Channel, rho: DensityMatrix) -> float:
    _check_dims(ch, rho)
    return entropy_of_spectrum(hermitian_eigvals(apply_matrix(ch, rho.mat)))


def environment_entropy(ch: Channel, rho: DensityMatrix) -> float:
    _check_dims(ch, rho)
    return entropy_of_spectrum(hermitian_eigvals(environment_matrix(ch, rho.mat)))


def coherent_information(ch: Channel, rho: DensityMatrix) -> float:
    """S(ch(rho)) - S(ch^c(rho)) in bits; may be negative."""
    return output_entropy(ch, rho) - environment_entropy(ch, rho)


def coherent_information_via_purification(ch: Channel, rho: DensityMatrix) -> float:
    """S(ch(rho)) - S((ch (x) id)(psi)) with psi a purification of rho.

    The second term is the entropy of output plus reference, which equals the
    environment entropy because the global state is pure.
    """
    _check_dims(ch, rho)
    psi = purify(rho)
    ref_dim = psi.dims[-1]
    joint = tensor(ch, identity_channel(ref_dim))
    state = np.outer(psi.vec, psi.vec.conj())
    s_joint = entropy_of_spectrum(hermitian_eigvals(apply_matrix(joint, state)))
    return output_entropy(ch, rho) - s_joint


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("COHINFO_THREADS", "1")))
    except ValueError:
        return 1


def _parallel_map(fn, items, workers: int | None = None) -> list:
    items = list(items)
    workers = _threads() if workers is None else max(1, workers)
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _family_objective(ch: Channel, family: StateFamily):
    def value(params) -> float:
        if not family.contains(params):
            return -np.inf
        return coherent_information(ch, family(*params))
    return value


def _initial_simplex(x0: np.ndarray, bounds, edge: float) -> np.ndarray:
    pts = [x0]
    for k, (lo, hi) in enumerate(bounds):
        p = x0.copy()
        # step inward when the default step would leave the box
        p[k] = x0[k] + edge if x0[k] + edge <= hi else x0[k] - edge
        if not lo <= p[k] <= hi:
            p[k] = 0.5 * (lo + hi)
        pts.append(p)
    return np.array(pts)


def _nelder_mead(fun, x0, bounds=None, edge=0.05, xtol=1e-7, max_evals=5000):
    """Minimize with fixed Nelder-Mead coefficients (1, 2, 0.5, 0.5).

    scipy's xatol bounds the max coordinate distance to the best vertex, so
    half the requested diameter is passed to keep the full diameter below xtol.
    """
    x0 = np.asarray(x0, dtype=float)
    if bounds is None:
        simplex = x0 + np.vstack([np.zeros(x0.size), edge * np.eye(x0.size)])
    else:
        simplex = _initial_simplex(x0, bounds, edge)
    res = minimize(fun, x0, method="Nelder-Mead", bounds=bounds,
                   options=dict(initial_simplex=simplex, xatol=xtol / 2, fatol=np.inf,
                                maxfev=max_evals, maxiter=10 * max_evals, adaptive=False))
    return res


def optimize_ci_family(ch: Channel, family: StateFamily, grid_points: int = 51,
                       max_evals: int = 5000, xtol: float = 1e-7,
                       workers: int | None = None) -> OptimizationResult:
    """Grid search then Nelder-Mead refinement of coherent information over a family."""
    probe = family(*[lo for lo, _ in family.bounds])
    if probe.dim != ch.d_in:
        raise ValueError(f"family {family.name!r} has dimension {probe.dim}, "
                         f"channel expects {ch.d_in}")
    value = _family_objective(ch, family)
    axes = [np.linspace(lo, hi, grid_points) for lo, hi in family.bounds]
    grid = [p for p in itertools.product(*axes) if family.contains(p)]
    values = _parallel_map(value, grid, workers)
    best = int(np.argmax(values))
    x0 = np.array(grid[best])

    def neg(x):
        return -value(x)

    res = _nelder_mead(neg, x0, bounds=list(family.bounds), xtol=xtol, max_evals=max_evals)
    x = np.clip(res.x, [b[0] for b in family.bounds], [b[1] for b in family.bounds])
    best_value = value(x)
    if best_value < values[best]:
        x, best_value = x0, values[best]
    return OptimizationResult(x, float(best_value), len(grid) + int(res.nfev),
                              bool(res.success))


def state_from_cholesky(params: np.ndarray, d: int) -> np.ndarray:
    """rho = L L^H / Tr(L L^H) with L lower triangular; d^2 real parameters."""
    params = np.asarray(params, dtype=float)
    L = np.zeros((d, d), dtype=complex)
    L[np.diag_indices(d)] = params[:d]
    lo = np.tril_indices(d, -1)
    m = len(lo[0])
    L[lo] = params[d:d + m] + 1j * params[d + m:d + 2 * m]
    rho = L @ L.conj().T
    return rho / np.trace(rho).real


def optimize_ci_general(ch: Channel, restarts: int = 8, seed: int = 0,
                        max_evals: int = 5000, xtol: float = 1e-7,
                        workers: int | None = None) -> OptimizationResult:
    """Multi-start Nelder-Mead over all input states; the result is a lower bound on Q1."""
    d = ch.d_in
    if d > 8:
        raise ValueError(f"general optimization supports d_in <= 8, got {d}")
    dims = as_kraus(ch).in_dims

    def value(x) -> float:
        m = state_from_cholesky(x, d)
        if not np.all(np.isfinite(m)):
            return -np.inf
        return coherent_information(ch, density(m, dims))

    starts = np.random.default_rng(seed).standard_normal((restarts, d * d))

    def run(x0):
        return _nelder_mead(lambda x: -value(x), x0, xtol=xtol, max_evals=max_evals)

    results = _parallel_map(run, starts, workers)
    scores = np.array([value(r.x) for r in results])
    order = np.argsort(-scores, kind="stable")
    top = results[order[0]]
    converged = restarts < 2 or abs(scores[order[0]] - scores[order[1]]) < 1e-5
    return OptimizationResult(np.asarray(top.x), float(scores[order[0]]),
                              int(sum(r.nfev for r in results)), bool(converged),
                              history=[float(s) for s in scores])


@dataclass(frozen=True)
class SingularityEstimate:
    """Log-singularity strength x in dS/de ~ -x log2 e."""

    x: float
    method: str
    fit_residual: float
    eps_window: tuple[float, float]


def _family_entropy(ch: Channel, family: StateFamily, eps: float) -> float:
    return entropy_of_spectrum(hermitian_eigvals(apply_matrix(ch, family(eps).mat)))


def _require_1d(family: StateFamily):
    if family.arity != 1:
        raise ValueError(f"singularity rates need a 1-parameter family, got arity {family.arity}")


def singularity_rate_regression(ch: Channel, family: StateFamily,
                                eps_window: tuple[float, float] = (1e-4, 1e-1),
                                points: int = 40) -> SingularityEstimate:
    """Regress dS/de against -log2(e) on log-spaced points; slope is x.

    Pass ``complementary(ch)`` to measure the environment side. Derivatives use
    second-order centered differences on the nonuniform grid, one-sided at the ends.
    """
    _require_1d(family)
    lo, hi = map(float, eps_window)
    (blo, bhi), = family.bounds
    if not (0 < lo < hi) or lo < blo or hi > bhi:
        raise ValueError(f"degenerate or out-of-bounds window {eps_window}")
    eps = np.geomspace(lo, hi, points)
    s = np.array([_family_entropy(ch, family, e) for e in eps])
    if not np.all(np.isfinite(s)):
        raise ValueError("entropy evaluation failed along the family")
    # shifting by s[0] keeps a constant curve exactly flat under the stencil weights
    ds = np.gradient(s - s[0], eps)
    design = np.column_stack([-np.log2(eps), np.ones_like(eps)])
    coef, *_ = np.linalg.lstsq(design, ds, rcond=None)
    resid = ds - design @ coef
    return SingularityEstimate(float(coef[0]), "regression",
                               float(np.sqrt(np.mean(resid**2))), (lo, hi))


def singularity_rate_spectral(ch: Channel, family: StateFamily,
                              eps: tuple[float, float] = (1e-6, 2e-6)) -> SingularityEstimate:
    """Sum of growth rates of eigenvalues that rise linearly from zero.

    An eigenvalue counts when it doubles (ratio in [1.9, 2.1]) between the two
    probe points and exceeds 1e-10 at the first.
    """
    _require_1d(family)
    e1, e2 = eps
    l1 = hermitian_eigvals(apply_matrix(ch, family(e1).mat))
    l2 = hermitian_eigvals(apply_matrix(ch, family(e2).mat))
    ratio = np.divide(l2, l1, out=np.zeros_like(l1), where=np.abs(l1) > 0)
    growing = (l1 > 1e-10) & (ratio >= 1.9) & (ratio <= 2.1)
    rates = l1[growing] / e1
    # residual: deviation of the selected eigenvalues from exact doubling
    resid = float(np.sqrt(np.mean((l2[growing] - 2 * l1[growing]) ** 2))) if growing.any() else 0.0
    return SingularityEstimate(float(rates.sum()), "spectral", resid, (float(e1), float(e2)))


def delta_nonadditivity(ch_a: Channel, ch_b: Channel, joint_input: DensityMatrix,
                        q_a: float, q_b: float) -> float:
    """Ic(ch_a (x) ch_b, joint_input) - q_a - q_b."""
    joint = tensor(ch_a, ch_b)
    return coherent_information(joint, joint_input) - q_a - q_b


def scan_delta(ch_a: Channel, ch_b: Channel, family: StateFamily, axis: int,
               fixed: Sequence[float], grid_points: int = 101, q_a: float = 0.0,
               q_b: float = 0.0, span: tuple[float, float] | None = None,
               workers: int | None = None) -> list[tuple[float, float]]:
    """Delta along one family parameter with the other two held at ``fixed``.

    ``span`` defaults to the axis bounds; points where the family is infeasible
    (e.g. r1 + r2 > 1) are skipped. Output is in ascending parameter order.
    """
    if family.arity != 3 or axis not in (0, 1, 2):
        raise ValueError("scan_delta needs a 3-parameter family and axis in {0, 1, 2}")
    fixed = [float(f) for f in fixed]
    if len(fixed) != 2:
        raise ValueError("exactly two fixed parameter values are required")
    others = [k for k in range(3) if k != axis]
    for k, f in zip(others, fixed):
        lo, hi = family.bounds[k]
        if not lo <= f <= hi:
            raise ValueError(f"fixed value {f} outside bounds {family.bounds[k]}")
    lo, hi = span if span is not None else family.bounds[axis]
    if lo > hi or lo < family.bounds[axis][0] or hi > family.bounds[axis][1]:
        raise ValueError(f"scan span {(lo, hi)} outside bounds {family.bounds[axis]}")
    joint = tensor(ch_a, ch_b)

    def params_at(t):
        p = [0.0] * 3
        p[axis] = float(t)
        for k, f in zip(others, fixed):
            p[k] = f
        return p

    ts = [t for t in np.linspace(lo, hi, grid_points) if family.contains(params_at(t))]

    def delta(t):
        return coherent_information(joint, family(*params_at(t))) - q_a - q_b

    return list(zip((float(t) for t in ts), _parallel_map(delta, ts, workers)))
