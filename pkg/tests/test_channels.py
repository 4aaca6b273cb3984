import numpy as np
import pytest

from cohinfo.capacity import environment_entropy, output_entropy
from cohinfo.channels import (ChoiMatrix, IsometryChannel, KrausChannel, amplitude_damping,
                              apply, channel_from_spec, choi, complementary, depolarizing,
                              erasure, identity_channel, isometry_from_kraus,
                              kraus_from_isometry, platypus, process_fidelity, tensor)
from cohinfo.states import (DensityMatrix, ket, maximally_mixed, pure, random_density_matrix,
                            tensor_states, von_neumann_entropy)

M3 = platypus(3)
AD = amplitude_damping(0.5)


def proj(i, d):
    m = np.zeros((d, d))
    m[i, i] = 1
    return DensityMatrix(m, (d,))


def constructors():
    return [platypus(3), platypus(4), amplitude_damping(0.3), amplitude_damping(0.5),
            identity_channel(3), erasure(0.4, 2), depolarizing(0.6, 3), tensor(M3, AD)]


def test_platypus3_isometry_columns():
    g = M3.isometry
    assert np.allclose(g[:, 0], (ket((0, 0), (3, 2)) + ket((1, 1), (3, 2))) / np.sqrt(2))
    assert np.allclose(g[:, 1], ket((2, 0), (3, 2)))
    assert np.allclose(g[:, 2], ket((2, 1), (3, 2)))


def test_platypus3_kraus_form():
    k = kraus_from_isometry(M3).kraus
    k0 = np.zeros((3, 3))
    k0[0, 0], k0[2, 1] = 1 / np.sqrt(2), 1
    k1 = np.zeros((3, 3))
    k1[1, 0], k1[2, 2] = 1 / np.sqrt(2), 1
    assert np.allclose(k[0], k0) and np.allclose(k[1], k1)


def test_platypus_isometry_and_bounds():
    g = platypus(4).isometry
    assert np.allclose(g.conj().T @ g, np.eye(4), atol=1e-12)
    with pytest.raises(ValueError):
        platypus(2)


def test_amplitude_damping_examples(rng):
    rho = random_density_matrix(2, rng)
    assert np.allclose(apply(amplitude_damping(0), rho).mat, rho.mat)
    assert np.allclose(apply(amplitude_damping(1), rho).mat, np.diag([1, 0]))
    assert np.allclose(apply(AD, proj(1, 2)).mat, np.eye(2) / 2)
    plus = pure([1, 1])
    assert np.allclose(apply(AD, plus).mat, [[0.75, 0.3536], [0.3536, 0.25]], atol=1e-4)
    with pytest.raises(ValueError):
        amplitude_damping(1.5)


def test_standard_channels(rng):
    rho = random_density_matrix(3, rng)
    assert np.allclose(apply(identity_channel(3), rho).mat, rho.mat)
    q = random_density_matrix(2, rng)
    assert np.allclose(apply(erasure(1, 2), q).mat, np.diag([0, 0, 1]))
    assert np.allclose(apply(depolarizing(1, 2), proj(0, 2)).mat, np.eye(2) / 2)
    p = 0.3
    assert np.allclose(apply(depolarizing(p, 3), rho).mat, (1 - p) * rho.mat + p * np.eye(3) / 3)
    assert np.allclose(apply(erasure(p, 3), rho).mat[:3, :3], (1 - p) * rho.mat)
    for bad in (lambda: erasure(-0.1, 2), lambda: depolarizing(0.5, 1)):
        with pytest.raises(ValueError):
            bad()


def test_apply_platypus():
    assert np.allclose(apply(M3, proj(0, 3)).mat, np.diag([0.5, 0.5, 0]))
    assert np.allclose(apply(M3, proj(1, 3)).mat, np.diag([0, 0, 1]))
    assert np.allclose(apply(M3, proj(2, 3)).mat, np.diag([0, 0, 1]))
    with pytest.raises(ValueError):
        apply(M3, maximally_mixed(2))


def test_stinespring_consistency(rng):
    for ch in constructors():
        iso = ch if isinstance(ch, IsometryChannel) else isometry_from_kraus(ch)
        kr = ch if isinstance(ch, KrausChannel) else kraus_from_isometry(ch)
        for _ in range(50):
            rho = random_density_matrix(ch.d_in, rng)
            assert np.allclose(apply(iso, rho).mat, apply(kr, rho).mat, atol=1e-10)


def test_kraus_completeness_after_operations():
    for ch in constructors():
        for derived in (tensor(ch, AD), complementary(ch), kraus_from_isometry(isometry_from_kraus(
                tensor(ch, identity_channel(2))))):
            k = derived.kraus
            assert np.allclose(np.einsum("kai,kaj->ij", k.conj(), k), np.eye(derived.d_in),
                               atol=1e-9)


def test_invalid_kraus_rejected():
    with pytest.raises(ValueError):
        KrausChannel(np.array([np.eye(2) * 0.9]), (2,), (2,))


def test_complementary_examples(rng):
    assert np.allclose(apply(complementary(M3), proj(0, 3)).mat, np.eye(2) / 2)
    env = apply(complementary(identity_channel(2)), random_density_matrix(2, rng))
    assert env.dim == 1 and von_neumann_entropy(env) == pytest.approx(0, abs=1e-12)


def test_double_complement_entropy(rng):
    for ch in constructors():
        cc = complementary(complementary(ch))
        for _ in range(10):
            rho = random_density_matrix(ch.d_in, rng)
            assert output_entropy(cc, rho) == pytest.approx(output_entropy(ch, rho), abs=1e-8)


def test_entropy_exchange_for_pure_inputs(rng):
    for ch in constructors():
        for _ in range(10):
            psi = random_density_matrix(ch.d_in, rng, rank=1)
            s_env = von_neumann_entropy(apply(complementary(ch), psi))
            assert von_neumann_entropy(apply(ch, psi)) == pytest.approx(s_env, abs=1e-8)


def test_complementary_fast_path_matches(rng):
    for ch in constructors():
        rho = random_density_matrix(ch.d_in, rng)
        assert environment_entropy(ch, rho) == pytest.approx(
            von_neumann_entropy(apply(complementary(ch), rho)), abs=1e-10)


def test_complement_of_tensor_matches_tensor_of_complements(rng):
    pairs = [(M3, AD), (AD, depolarizing(0.2, 2)), (erasure(0.3, 2), M3)]
    for a, b in pairs:
        lhs, rhs = complementary(tensor(a, b)), tensor(complementary(a), complementary(b))
        assert lhs.out_dims == rhs.out_dims
        for _ in range(10):
            rho = random_density_matrix(a.d_in * b.d_in, rng)
            l, r = apply(lhs, rho), apply(rhs, rho)
            assert np.allclose(l.mat, r.mat, atol=1e-10)
            assert von_neumann_entropy(l) == pytest.approx(von_neumann_entropy(r), abs=1e-8)


def test_tensor_examples(rng):
    ident = tensor(identity_channel(2), identity_channel(3))
    rho = random_density_matrix(6, rng, dims=(2, 3))
    assert np.allclose(apply(ident, rho).mat, rho.mat)
    joint = tensor(M3, AD)
    assert joint.kraus.shape == (4, 6, 6)
    assert joint.in_dims == (3, 2) and joint.out_dims == (3, 2)
    for _ in range(20):
        a, b = random_density_matrix(3, rng), random_density_matrix(2, rng)
        lhs = apply(joint, tensor_states(a, b))
        rhs = tensor_states(apply(M3, a), apply(AD, b))
        assert np.allclose(lhs.mat, rhs.mat, atol=1e-10)


def test_choi_examples():
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(choi(identity_channel(2)).mat, np.outer(phi, phi))
    assert np.allclose(choi(depolarizing(1, 2)).mat, np.eye(4) / 4)
    c = choi(AD)
    assert c.tp_error() < 1e-10
    j = c.mat.reshape(2, 2, 2, 2)
    assert np.allclose(np.einsum("iaja->ij", j), np.eye(2) / 2, atol=1e-10)


def test_process_fidelity_examples():
    assert process_fidelity(choi(M3), choi(M3)) == pytest.approx(1, abs=1e-10)
    f = process_fidelity(choi(identity_channel(2)), choi(depolarizing(1, 2)))
    assert f == pytest.approx(0.25, abs=1e-12)
    with pytest.raises(ValueError):
        process_fidelity(choi(M3), choi(AD))


@pytest.mark.parametrize("spec, d_in, d_out", [
    ("platypus:3", 3, 3), ("ad:0.5", 2, 2), ("identity:4", 4, 4), ("erasure:0.2,2", 2, 3),
    ("depolarizing:0.1,3", 3, 3), ("tensor(platypus:3,ad:0.5)", 6, 6),
    ("tensor(erasure:0.5,2,tensor(ad:0.1,identity:2))", 8, 12),
])
def test_channel_specs(spec, d_in, d_out):
    ch = channel_from_spec(spec)
    assert (ch.d_in, ch.d_out) == (d_in, d_out)


@pytest.mark.parametrize("spec", ["platypus:2", "ad:2", "foo:1", "tensor(ad:0.5)", "platypus:3.5"])
def test_bad_channel_specs(spec):
    with pytest.raises(ValueError):
        channel_from_spec(spec)


def test_choi_matrix_type():
    c = choi(M3)
    assert isinstance(c, ChoiMatrix) and c.state.dims == (3, 3)
