"""Density matrices, purification, entropy, and the parameterized input families."""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np

from .linalg import as_matrix, hermitian_eig, hermitian_eigvals, hermitian_function

STATE_TOL = 1e-9
# eigenvalues at or below this contribute nothing to the entropy
ENTROPY_CLAMP = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, PSD, unit-trace matrix with subsystem dimension labels."""

    mat: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        mat = as_matrix(self.mat)
        dims = tuple(int(d) for d in self.dims)
        if mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got {mat.shape}")
        if any(d < 1 for d in dims) or prod(dims) != mat.shape[0]:
            raise ValueError(f"dims {dims} do not match matrix size {mat.shape[0]}")
        if np.max(np.abs(mat - mat.conj().T)) > STATE_TOL:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(mat).real
        if abs(tr - 1) > STATE_TOL:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        if hermitian_eigvals(mat)[-1] < -STATE_TOL:
            raise ValueError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "mat", _freeze(0.5 * (mat + mat.conj().T)))
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def eigvals(self) -> np.ndarray:
        return hermitian_eigvals(self.mat)

    def __matmul__(self, other: "DensityMatrix") -> "DensityMatrix":
        return tensor_states(self, other)


@dataclass(frozen=True, eq=False)
class PureState:
    vec: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        vec = np.asarray(self.vec, dtype=complex).ravel()
        dims = tuple(int(d) for d in self.dims)
        if prod(dims) != vec.size:
            raise ValueError(f"dims {dims} do not match vector length {vec.size}")
        if abs(np.linalg.norm(vec) - 1) > 1e-10:
            raise ValueError("state vector is not normalized")
        object.__setattr__(self, "vec", _freeze(vec))
        object.__setattr__(self, "dims", dims)

    def density(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.vec, self.vec.conj()), self.dims)


def project_psd(mat, dims: Sequence[int] | None = None) -> DensityMatrix:
    """Clip negative eigenvalues and renormalize the trace."""
    mat = as_matrix(mat)
    w, v = hermitian_eig(mat)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        raise ValueError("matrix has no positive part")
    out = (v * (w / w.sum())) @ v.conj().T
    return DensityMatrix(out, tuple(dims) if dims is not None else (mat.shape[0],))


def density(mat, dims: Sequence[int] | None = None) -> DensityMatrix:
    """Build a DensityMatrix, projecting tiny boundary violations back onto the PSD cone.

    States whose minimum eigenvalue lies in [-1e-9, 0) are clipped and renormalized;
    anything worse is rejected by the DensityMatrix invariants.
    """
    mat = as_matrix(mat)
    dims = tuple(dims) if dims is not None else (mat.shape[0],)
    w = hermitian_eigvals(mat)
    if -STATE_TOL <= w[-1] < 0:
        return project_psd(mat, dims)
    return DensityMatrix(mat, dims)


def ket(index: int | Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Computational basis vector |i_1 i_2 ...> on the given subsystems."""
    dims = tuple(dims)
    idx = (index,) if isinstance(index, (int, np.integer)) else tuple(index)
    v = np.zeros(prod(dims), dtype=complex)
    v[np.ravel_multi_index(idx, dims)] = 1.0
    return v


def pure(vec, dims: Sequence[int] | None = None) -> DensityMatrix:
    vec = np.asarray(vec, dtype=complex).ravel()
    vec = vec / np.linalg.norm(vec)
    return DensityMatrix(np.outer(vec, vec.conj()), tuple(dims) if dims else (vec.size,))


def maximally_mixed(d: int) -> DensityMatrix:
    return DensityMatrix(np.eye(d) / d, (d,))


def tensor_states(*states: DensityMatrix) -> DensityMatrix:
    mat = states[0].mat
    dims = list(states[0].dims)
    for s in states[1:]:
        mat = np.kron(mat, s.mat)
        dims.extend(s.dims)
    return DensityMatrix(mat, tuple(dims))


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None,
                          dims: Sequence[int] | None = None) -> DensityMatrix:
    """Random state from a complex Ginibre matrix (Hilbert-Schmidt measure at full rank)."""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, tuple(dims) if dims else (d,))


def entropy_of_spectrum(eigenvalues) -> float:
    """-sum(l log2 l) over eigenvalues above the clamp threshold."""
    w = np.asarray(eigenvalues, dtype=float)
    if w.size and w.min() < -STATE_TOL:
        raise ValueError(f"negative eigenvalue {w.min():.3e} in entropy evaluation")
    w = w[w > ENTROPY_CLAMP]
    return float(-np.sum(w * np.log2(w)))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Von Neumann entropy in bits."""
    return entropy_of_spectrum(rho.eigvals())


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on the subsystems listed in ``keep`` (kept in their original order)."""
    dims = rho.dims
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep set must be non-empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"subsystem index out of range for dims {dims}")
    t = rho.mat.reshape(dims + dims)
    # einsum labels: row index i, column index n+i; traced subsystems share a label
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out = [i for i in keep] + [i + n for i in keep]
    red = np.einsum(t, row + col, out)
    kd = tuple(dims[i] for i in keep)
    d = prod(kd)
    return DensityMatrix(red.reshape(d, d), kd)


def permute_subsystems(rho: DensityMatrix, order: Sequence[int]) -> DensityMatrix:
    """Reorder subsystems; ``order[k]`` is the old index placed at position k."""
    dims = rho.dims
    n = len(dims)
    order = list(order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"{order} is not a permutation of {n} subsystems")
    t = rho.mat.reshape(dims + dims).transpose(order + [n + i for i in order])
    d = rho.dim
    return DensityMatrix(t.reshape(d, d), tuple(dims[i] for i in order))


def purify(rho: DensityMatrix) -> PureState:
    """|psi> = sum_i sqrt(l_i) |v_i> (x) |i>, reference dimension = numerical rank."""
    w, v = hermitian_eig(rho.mat)
    mask = w > ENTROPY_CLAMP
    w, v = w[mask], v[:, mask]
    w = w / w.sum()
    rank = int(mask.sum())
    vec = (v * np.sqrt(w)).reshape(-1)
    return PureState(vec / np.linalg.norm(vec), rho.dims + (rank,))


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    return hermitian_function(mat, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    if rho.dim != sigma.dim:
        raise ValueError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    s = _sqrtm_psd(rho.mat)
    inner = s @ sigma.mat @ s
    w = np.clip(hermitian_eigvals(inner), 0.0, None)
    return float(min(1.0, np.sum(np.sqrt(w)) ** 2))


def _check_unit(name: str, x: float) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name}={x} outside [0, 1]")
    return x


def family_rho_u(u: float) -> DensityMatrix:
    """(1-u)|0><0| + u|2><2| on a qutrit."""
    u = _check_unit("u", u)
    return DensityMatrix(np.diag([1 - u, 0.0, u]), (3,))


def _xi(v: float) -> np.ndarray:
    # sqrt(1-v)|20> + sqrt(v)|11> on dims (3, 2)
    return np.sqrt(1 - v) * ket((2, 0), (3, 2)) + np.sqrt(v) * ket((1, 1), (3, 2))


def family_rho_wv(w: float, v: float) -> DensityMatrix:
    """(1-w)|00><00| + w|xi><xi| with |xi> = sqrt(1-v)|20> + sqrt(v)|11>."""
    w, v = _check_unit("w", w), _check_unit("v", v)
    e00 = ket((0, 0), (3, 2))
    xi = _xi(v)
    mat = (1 - w) * np.outer(e00, e00) + w * np.outer(xi, xi.conj())
    return DensityMatrix(mat, (3, 2))


def family_rho_r(r1: float, r2: float, r3: float) -> DensityMatrix:
    """r1|00><00| + r2|01><01| + (1-r1-r2)|phi><phi|, |phi> = sqrt(1-r3)|20> + sqrt(r3)|11>."""
    r1, r2, r3 = float(r1), float(r2), float(r3)
    if r1 < 0 or r2 < 0 or r1 + r2 > 1 + 1e-12:
        raise ValueError(f"(r1, r2) = ({r1}, {r2}) outside the probability simplex")
    _check_unit("r3", r3)
    e00, e01 = ket((0, 0), (3, 2)), ket((0, 1), (3, 2))
    phi = _xi(r3)
    rest = max(0.0, 1 - r1 - r2)
    mat = r1 * np.outer(e00, e00) + r2 * np.outer(e01, e01) + rest * np.outer(phi, phi.conj())
    return DensityMatrix(mat, (3, 2))
