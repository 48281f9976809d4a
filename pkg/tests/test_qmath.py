import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ebchan import qmath
from ebchan.errors import BadSubsystemIndex, NotADensityMatrix, NotHermitian, WeightMismatch
from ebchan.qmath import DensityMatrix, PureState

from .oracles import binary_entropy, partial_trace_loops

BELL = np.array([1, 0, 0, 1]) / np.sqrt(2)


def test_entropy_known_values():
    assert qmath.von_neumann_entropy(DensityMatrix.maximally_mixed(2)) == pytest.approx(1.0, abs=1e-12)
    assert qmath.von_neumann_entropy(DensityMatrix.from_pure([0.6, 0.8j])) == pytest.approx(0.0, abs=1e-12)
    # direct -sum p log2 p for (3/4, 1/4)
    assert qmath.von_neumann_entropy(DensityMatrix(np.diag([0.75, 0.25]))) == pytest.approx(
        0.8112781244591328, abs=1e-12)
    assert binary_entropy(0.75) == pytest.approx(0.8112781244591328, abs=1e-15)


def test_entropy_clamps_tiny_negative_eigenvalue():
    rho = DensityMatrix(np.diag([1 + 5e-10, -5e-10]))
    assert qmath.von_neumann_entropy(rho) == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize("data", [
    np.diag([0.5, 0.6]),                  # trace
    np.array([[0.5, 0.1], [0.3, 0.5]]),   # not Hermitian
    np.diag([1.2, -0.2]),                 # negative eigenvalue
])
def test_invalid_density_matrices_rejected(data):
    with pytest.raises(NotADensityMatrix):
        DensityMatrix(data)


def test_not_hermitian_is_specific():
    with pytest.raises(NotHermitian):
        qmath.eig_psd(np.array([[0.5, 0.1], [0.3, 0.5]]))


def test_density_matrix_is_immutable():
    rho = DensityMatrix.maximally_mixed(2)
    with pytest.raises(ValueError):
        rho.data[0, 0] = 1.0
    with pytest.raises(AttributeError):
        rho.dims = (1, 2)


def test_pure_state_norm_checked():
    with pytest.raises(NotADensityMatrix):
        PureState([1.0, 1.0])


def test_tensor_product(rng):
    half = DensityMatrix.maximally_mixed(2)
    prod = qmath.tensor_product(half, half)
    assert prod.dims == (2, 2)
    assert np.allclose(prod.data, np.eye(4) / 4)
    a, b = qmath.random_pure_vector(2, rng), qmath.random_pure_vector(3, rng)
    pp = qmath.tensor_product(DensityMatrix.from_pure(a), DensityMatrix.from_pure(b))
    v = np.kron(a, b)
    assert np.allclose(pp.data, np.outer(v, v.conj()))
    ra, rb = qmath.random_density_matrix(2, rng), qmath.random_density_matrix(3, rng)
    lhs = qmath.von_neumann_entropy(qmath.tensor_product(ra, rb))
    assert lhs == pytest.approx(qmath.von_neumann_entropy(ra) + qmath.von_neumann_entropy(rb), abs=1e-10)


def test_partial_trace_examples(rng):
    ra, rb = qmath.random_density_matrix(2, rng), qmath.random_density_matrix(3, rng)
    red = qmath.partial_trace(qmath.tensor_product(ra, rb), [0])
    assert np.allclose(red.data, ra.data, atol=1e-12)
    bell = DensityMatrix.from_pure(BELL, [2, 2])
    assert np.allclose(qmath.partial_trace(bell, [1]).data, np.eye(2) / 2)


@pytest.mark.parametrize("dims,keep", [((2, 3), [0]), ((2, 3), [1]), ((2, 3, 2), [0, 2]), ((3, 2, 2), [1])])
def test_partial_trace_matches_index_sum(rng, dims, keep):
    d = int(np.prod(dims))
    rho = qmath.random_density_matrix(d, rng, dims=dims)
    fast = qmath.partial_trace(rho, keep).data
    slow = partial_trace_loops(rho.data, dims, keep)
    assert np.max(np.abs(fast - slow)) <= 1e-12


def test_partial_trace_composes(rng):
    rho = qmath.random_density_matrix(12, rng, dims=(2, 3, 2))
    stepwise = qmath.partial_trace(qmath.partial_trace(rho, [1, 2]), [0])
    once = qmath.partial_trace(rho, [1])
    assert np.array_equal(np.round(stepwise.data, 14), np.round(once.data, 14))


def test_partial_trace_bad_index():
    rho = DensityMatrix(np.eye(4) / 4, [2, 2])
    with pytest.raises(BadSubsystemIndex):
        qmath.partial_trace(rho, [2])
    with pytest.raises(BadSubsystemIndex):
        qmath.partial_trace(rho, [])


def test_eig_psd(rng):
    s = qmath.eig_psd(DensityMatrix.maximally_mixed(2))
    assert np.allclose(s.eigenvalues, [0.5, 0.5])
    s = qmath.eig_psd(DensityMatrix.from_pure([0, 1]))
    assert np.allclose(s.eigenvalues, [1, 0])
    rho = qmath.random_density_matrix(5, rng)
    s = qmath.eig_psd(rho)
    recon = (s.eigenvectors * s.eigenvalues) @ s.eigenvectors.conj().T
    assert np.linalg.norm(recon - rho.data) <= 1e-10
    assert np.all(np.diff(s.eigenvalues) <= 0)
    gram = s.eigenvectors.conj().T @ s.eigenvectors
    assert np.max(np.abs(gram - np.eye(5))) <= 1e-10


def test_purify(rng):
    pure = DensityMatrix.from_pure([0.6, 0.8])
    p = qmath.purify(pure)
    assert p.dims == (2, 2)
    assert np.allclose(qmath.partial_trace(p.projector(), [0]).data, pure.data)
    mixed = qmath.purify(DensityMatrix.maximally_mixed(2))
    assert np.allclose(qmath.partial_trace(mixed.projector(), [0]).data, np.eye(2) / 2)
    assert qmath.von_neumann_entropy(qmath.partial_trace(mixed.projector(), [1])) == pytest.approx(1.0)
    rho = qmath.random_density_matrix(3, rng)
    back = qmath.partial_trace(qmath.purify(rho).projector(), [0])
    assert np.linalg.norm(back.data - rho.data) <= 1e-10


def test_cq_embed(rng):
    g = qmath.random_density_matrix(2, rng)
    one = qmath.cq_embed([1.0], [g])
    assert one.dims == (2, 1)
    assert np.allclose(one.data, g.data)
    pure = DensityMatrix.from_pure([1, 0])
    assert qmath.von_neumann_entropy(qmath.cq_embed([0.5, 0.5], [pure, pure])) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(WeightMismatch):
        qmath.cq_embed([0.5, 0.6], [pure, pure])


def test_chain_rule_random(rng):
    for _ in range(20):
        m = rng.integers(1, 5)
        q = rng.dirichlet(np.ones(m))
        blocks = [qmath.random_density_matrix(3, rng) for _ in range(m)]
        lhs = qmath.von_neumann_entropy(qmath.cq_embed(q, blocks)) - qmath.shannon_entropy(q)
        rhs = sum(w * qmath.von_neumann_entropy(b) for w, b in zip(q, blocks))
        assert abs(lhs - rhs) <= 1e-9


def test_relative_entropy_basic(rng):
    rho = qmath.random_density_matrix(3, rng)
    assert qmath.relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-10)
    sigma = qmath.random_density_matrix(3, rng)
    assert qmath.relative_entropy(rho, sigma) > 0


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, d=st.integers(2, 6))
def test_entropy_range_and_unitary_invariance(seed, d):
    rng = np.random.default_rng(seed)
    rho = qmath.random_density_matrix(d, rng, rank=int(rng.integers(1, d + 1)))
    h = qmath.von_neumann_entropy(rho)
    assert -1e-12 <= h <= np.log2(d) + 1e-12
    u = qmath.random_unitary(d, rng)
    rotated = DensityMatrix(u @ rho.data @ u.conj().T)
    assert abs(qmath.von_neumann_entropy(rotated) - h) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=seeds, da=st.integers(2, 3), db=st.integers(2, 4))
def test_subadditivity_araki_lieb_and_purification_symmetry(seed, da, db):
    rng = np.random.default_rng(seed)
    rho = qmath.random_density_matrix(da * db, rng, dims=(da, db))
    h = qmath.von_neumann_entropy(rho)
    ha = qmath.von_neumann_entropy(qmath.partial_trace(rho, [0]))
    hb = qmath.von_neumann_entropy(qmath.partial_trace(rho, [1]))
    assert h <= ha + hb + 1e-9
    assert h >= abs(ha - hb) - 1e-9
    pure = DensityMatrix.from_pure(qmath.random_pure_vector(da * db, rng), (da, db))
    assert abs(qmath.von_neumann_entropy(qmath.partial_trace(pure, [0]))
               - qmath.von_neumann_entropy(qmath.partial_trace(pure, [1]))) <= 1e-10
