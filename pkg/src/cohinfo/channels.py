"""CPTP channels in Kraus and isometry form.

Environment conventions: the complementary channel of a Kraus channel uses the
canonical environment basis (Kraus index ``i`` maps to ``|i>``). For an isometry
``G`` the row index is ``output * d_env + env``. Tensor products order Kraus
operators as ``(i, j) -> i * n2 + j``, so the environment of ``tensor(a, b)`` is
laid out ``[env_a, env_b]`` and ``complementary(tensor(a, b))`` coincides with
``tensor(complementary(a), complementary(b))`` without any permutation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import prod
from typing import Union

import numpy as np

from .linalg import MAX_DIM, as_matrix
from .states import DensityMatrix, density, fidelity

COMPLETENESS_TOL = 1e-9
PRUNE_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Operator-sum channel. ``kraus`` has shape (n, d_out, d_in)."""

    kraus: np.ndarray
    in_dims: tuple[int, ...]
    out_dims: tuple[int, ...]
    env_dims: tuple[int, ...] | None = None

    def __post_init__(self):
        ops = np.asarray(self.kraus, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        in_dims = tuple(int(d) for d in self.in_dims)
        out_dims = tuple(int(d) for d in self.out_dims)
        if ops.ndim != 3 or ops.shape[1:] != (prod(out_dims), prod(in_dims)):
            raise ValueError(f"Kraus operators of shape {ops.shape[1:]} do not match "
                             f"dims in={in_dims} out={out_dims}")
        if not np.all(np.isfinite(ops)):
            raise ValueError("Kraus operators have non-finite entries")
        keep = np.linalg.norm(ops, axis=(1, 2)) >= PRUNE_TOL
        if not keep.any():
            raise ValueError("channel needs at least one Kraus operator")
        env_dims = self.env_dims
        if not keep.all():
            ops = ops[keep]
            env_dims = None
        if env_dims is None or prod(env_dims) != ops.shape[0]:
            env_dims = (ops.shape[0],)
        gram = np.einsum("kai,kaj->ij", ops.conj(), ops)
        err = np.max(np.abs(gram - np.eye(ops.shape[2])))
        if err > COMPLETENESS_TOL:
            raise ValueError(f"Kraus operators are not trace preserving (error {err:.2e})")
        object.__setattr__(self, "kraus", _frozen(ops))
        object.__setattr__(self, "in_dims", in_dims)
        object.__setattr__(self, "out_dims", out_dims)
        object.__setattr__(self, "env_dims", tuple(env_dims))

    @property
    def d_in(self) -> int:
        return self.kraus.shape[2]

    @property
    def d_out(self) -> int:
        return self.kraus.shape[1]

    @property
    def d_env(self) -> int:
        return self.kraus.shape[0]

    @property
    def kraus_ops(self) -> list[np.ndarray]:
        return list(self.kraus)

    @cached_property
    def _complement(self) -> "KrausChannel":
        # F_o[e, i] = K_e[o, i]
        ops = self.kraus.transpose(1, 0, 2)
        return KrausChannel(ops, self.in_dims, self.env_dims)


@dataclass(frozen=True, eq=False)
class IsometryChannel:
    """Stinespring form: ``isometry`` maps d_in -> d_out * d_env (output index major)."""

    isometry: np.ndarray
    d_in: int
    d_out: int
    d_env: int

    def __post_init__(self):
        g = as_matrix(self.isometry)
        if g.shape != (self.d_out * self.d_env, self.d_in):
            raise ValueError(f"isometry shape {g.shape} does not match "
                             f"({self.d_out}*{self.d_env}, {self.d_in})")
        err = np.max(np.abs(g.conj().T @ g - np.eye(self.d_in)))
        if err > COMPLETENESS_TOL:
            raise ValueError(f"G^H G != I (error {err:.2e})")
        object.__setattr__(self, "isometry", _frozen(g))

    @property
    def in_dims(self) -> tuple[int, ...]:
        return (self.d_in,)

    @property
    def out_dims(self) -> tuple[int, ...]:
        return (self.d_out,)

    @cached_property
    def _kraus(self) -> KrausChannel:
        return kraus_from_isometry(self)


Channel = Union[KrausChannel, IsometryChannel]


def kraus_from_isometry(ch: IsometryChannel) -> KrausChannel:
    """K_e = (I (x) <e|) G."""
    g = ch.isometry.reshape(ch.d_out, ch.d_env, ch.d_in)
    return KrausChannel(g.transpose(1, 0, 2), (ch.d_in,), (ch.d_out,))


def isometry_from_kraus(ch: KrausChannel) -> IsometryChannel:
    """G = sum_i K_i (x) |i>_env."""
    n, d_out, d_in = ch.kraus.shape
    g = ch.kraus.transpose(1, 0, 2).reshape(d_out * n, d_in)
    return IsometryChannel(g, d_in, d_out, n)


def as_kraus(ch: Channel) -> KrausChannel:
    if isinstance(ch, IsometryChannel):
        return ch._kraus
    if isinstance(ch, KrausChannel):
        return ch
    raise TypeError(f"not a channel: {type(ch).__name__}")


def _check_unit(name, x):
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name}={x} outside [0, 1]")
    return x


def platypus(d: int) -> IsometryChannel:
    """Platypus isometry: |0> -> sum_{i<d-1} |i>|i>/sqrt(d-1), |j> -> |d-1>|j-1>."""
    d = int(d)
    if d < 3:
        raise ValueError(f"platypus channel needs d >= 3, got {d}")
    de = d - 1
    g = np.zeros((d * de, d), dtype=complex)
    for i in range(d - 1):
        g[i * de + i, 0] = 1 / np.sqrt(d - 1)
    for j in range(1, d):
        g[(d - 1) * de + (j - 1), j] = 1.0
    return IsometryChannel(g, d, d, de)


def amplitude_damping(gamma: float) -> KrausChannel:
    gamma = _check_unit("gamma", gamma)
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]])
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
    return KrausChannel(np.stack([k0, k1]), (2,), (2,))


def identity_channel(d: int) -> KrausChannel:
    d = int(d)
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    return KrausChannel(np.eye(d)[None], (d,), (d,))


def erasure(p: float, d: int) -> KrausChannel:
    """With probability p replace the input by the flag state |d> (output dimension d+1)."""
    p, d = _check_unit("p", p), int(d)
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    keep = np.zeros((d + 1, d))
    keep[:d, :d] = np.eye(d) * np.sqrt(1 - p)
    ops = [keep]
    for i in range(d):
        k = np.zeros((d + 1, d))
        k[d, i] = np.sqrt(p)
        ops.append(k)
    return KrausChannel(np.stack(ops), (d,), (d + 1,))


def depolarizing(p: float, d: int) -> KrausChannel:
    """(1-p) rho + p I/d using the d^2 generalized Pauli operators X^a Z^b."""
    p, d = _check_unit("p", p), int(d)
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    x = np.roll(np.eye(d), 1, axis=0)
    z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    ops = []
    for a in range(d):
        for b in range(d):
            w = 1 - p + p / d**2 if (a, b) == (0, 0) else p / d**2
            ops.append(np.sqrt(w) * np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b))
    return KrausChannel(np.stack(ops), (d,), (d,))


def apply_matrix(ch: Channel, rho: np.ndarray) -> np.ndarray:
    """Raw operator-sum action on a matrix (no validation of the result)."""
    k = as_kraus(ch).kraus
    return (k @ rho @ k.conj().transpose(0, 2, 1)).sum(axis=0)


def environment_matrix(ch: Channel, rho: np.ndarray) -> np.ndarray:
    """Complementary output in the canonical environment basis: E[i, j] = Tr(K_i rho K_j^H)."""
    k = as_kraus(ch).kraus
    return np.einsum("iac,jac->ij", k @ rho, k.conj())


def _via_isometry(ch: IsometryChannel, rho: np.ndarray, keep_output: bool) -> np.ndarray:
    g = ch.isometry
    big = (g @ rho @ g.conj().T).reshape(ch.d_out, ch.d_env, ch.d_out, ch.d_env)
    if keep_output:
        return np.einsum("aebe->ab", big)
    return np.einsum("aeaf->ef", big)


def apply(ch: Channel, rho: DensityMatrix) -> DensityMatrix:
    """Channel output. Isometry channels use Tr_env(G rho G^H), Kraus channels the operator sum."""
    if rho.dim != ch.d_in:
        raise ValueError(f"input dimension {rho.dim} does not match channel d_in={ch.d_in}")
    if isinstance(ch, IsometryChannel):
        out = _via_isometry(ch, rho.mat, keep_output=True)
    else:
        out = apply_matrix(ch, rho.mat)
    return density(out, ch.out_dims)


def complementary(ch: Channel) -> KrausChannel:
    """Channel to the environment of the (canonical) Stinespring dilation."""
    if isinstance(ch, IsometryChannel):
        g = ch.isometry.reshape(ch.d_out, ch.d_env, ch.d_in)
        return KrausChannel(g, (ch.d_in,), (ch.d_env,))
    return as_kraus(ch)._complement


def tensor(ch1: Channel, ch2: Channel) -> KrausChannel:
    """Parallel use with Kraus set {K_i (x) L_j}, subsystem order [ch1, ch2]."""
    a, b = as_kraus(ch1), as_kraus(ch2)
    if a.d_out * b.d_out > MAX_DIM or a.d_in * b.d_in > MAX_DIM:
        raise ValueError("tensor product exceeds the maximum supported dimension")
    ops = np.einsum("iab,jcd->ijacbd", a.kraus, b.kraus)
    n = a.d_env * b.d_env
    ops = ops.reshape(n, a.d_out * b.d_out, a.d_in * b.d_in)
    return KrausChannel(ops, a.in_dims + b.in_dims, a.out_dims + b.out_dims,
                        a.env_dims + b.env_dims)


@dataclass(frozen=True, eq=False)
class ChoiMatrix:
    """Normalized Choi state on dims [d_in, d_out]."""

    state: DensityMatrix
    d_in: int
    d_out: int

    @property
    def mat(self) -> np.ndarray:
        return self.state.mat

    def tp_error(self) -> float:
        """Max deviation of Tr_out(J) from I/d_in."""
        j = self.mat.reshape(self.d_in, self.d_out, self.d_in, self.d_out)
        red = np.einsum("iaja->ij", j)
        return float(np.max(np.abs(red - np.eye(self.d_in) / self.d_in)))


def choi(ch: Channel) -> ChoiMatrix:
    """(I (x) ch) applied to the normalized maximally entangled state."""
    k = as_kraus(ch).kraus
    d_in, d_out = k.shape[2], k.shape[1]
    # J[(i,a),(j,b)] = sum_k K[a,i] conj(K[b,j]) / d_in
    j = np.einsum("kai,kbj->iajb", k, k.conj()) / d_in
    state = density(j.reshape(d_in * d_out, d_in * d_out), (d_in, d_out))
    return ChoiMatrix(state, d_in, d_out)


def process_fidelity(a: ChoiMatrix, b: ChoiMatrix) -> float:
    if (a.d_in, a.d_out) != (b.d_in, b.d_out):
        raise ValueError(f"Choi dimension mismatch: {(a.d_in, a.d_out)} vs {(b.d_in, b.d_out)}")
    return fidelity(a.state, b.state)


def channel_from_spec(spec: str) -> Channel:
    """Parse ``platypus:d``, ``ad:gamma``, ``identity:d``, ``erasure:p,d``,
    ``depolarizing:p,d`` and ``tensor(specA,specB)`` (nestable)."""
    s = spec.strip().replace(" ", "")
    if s.startswith("tensor(") and s.endswith(")"):
        body = s[len("tensor("):-1]
        depth = 0
        for i, c in enumerate(body):
            if c == "(":
                depth += 1
            elif c == ")":
                depth -= 1
            elif c == "," and depth == 0:
                head, tail = body[:i], body[i + 1:]
                # the split must leave two full specs; "erasure:p,d" contains a comma itself
                try:
                    return tensor(channel_from_spec(head), channel_from_spec(tail))
                except ValueError:
                    continue
        raise ValueError(f"malformed tensor spec: {spec!r}")
    name, _, args = s.partition(":")
    parts = [a for a in args.split(",")] if args else []
    try:
        if name == "platypus" and len(parts) == 1:
            return platypus(_int(parts[0]))
        if name == "ad" and len(parts) == 1:
            return amplitude_damping(float(parts[0]))
        if name == "identity" and len(parts) == 1:
            return identity_channel(_int(parts[0]))
        if name == "erasure" and len(parts) == 2:
            return erasure(float(parts[0]), _int(parts[1]))
        if name == "depolarizing" and len(parts) == 2:
            return depolarizing(float(parts[0]), _int(parts[1]))
    except ValueError as exc:
        raise ValueError(f"invalid channel spec {spec!r}: {exc}") from None
    raise ValueError(f"unknown channel spec: {spec!r}")


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


__all__ = [
    "Channel", "ChoiMatrix", "IsometryChannel", "KrausChannel", "amplitude_damping",
    "apply", "apply_matrix", "as_kraus", "channel_from_spec", "choi", "complementary",
    "depolarizing", "environment_matrix", "erasure", "identity_channel",
    "isometry_from_kraus", "kraus_from_isometry", "platypus", "process_fidelity",
    "tensor",
]


