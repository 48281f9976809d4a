"""Density matrices, entropies and multipartite index bookkeeping.

Subsystems are ordered row-major: for dims ``(d1, d2, ..., dn)`` the basis
vector ``|i1 i2 ... in>`` sits at flat index ``((i1*d2 + i2)*d3 + ...)``, i.e.
the leftmost factor varies slowest. This is numpy's C order, so
``data.reshape(dims + dims)`` exposes the row and column multi-indices
directly and every tensor manipulation below relies on that.

Entropies are in bits.
"""
from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    BadSubsystemIndex,
    NotADensityMatrix,
    NotHermitian,
    WeightMismatch,
)

EPS_HERM = 1e-9
EPS_TRACE = 1e-9
EPS_PSD = 1e-9
PURE_NORM_TOL = 1e-12


def _as_dims(dims, d):
    if dims is None:
        return (d,)
    dims = tuple(int(x) for x in dims)
    if any(x < 1 for x in dims) or int(np.prod(dims)) != d:
        raise BadSubsystemIndex(f"dims {dims} do not multiply to {d}")
    return dims


def _frozen(arr):
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False, init=False)
class DensityMatrix:
    """A unit-trace PSD matrix together with its subsystem dimensions.

    Construction validates Hermiticity, trace and positivity against the module
    tolerances. ``check=False`` skips this; it exists for unnormalised
    objects such as the Choi matrix of a map that is not trace preserving.
    """

    data: np.ndarray
    dims: tuple

    def __init__(self, data, dims: Sequence[int] | None = None, check: bool = True):
        data = np.asarray(data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise NotADensityMatrix(f"expected a square matrix, got shape {data.shape}")
        dims = _as_dims(dims, data.shape[0])
        if check:
            _check_density(data)
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_pure(cls, vector, dims=None) -> "DensityMatrix":
        v = np.asarray(vector, dtype=complex).ravel()
        return cls(np.outer(v, v.conj()), dims)

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d) / d)

    def __repr__(self):
        return f"DensityMatrix(dims={self.dims})"


@dataclass(frozen=True, eq=False, init=False)
class PureState:
    vector: np.ndarray
    dims: tuple

    def __init__(self, vector, dims: Sequence[int] | None = None):
        v = np.asarray(vector, dtype=complex).ravel()
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > PURE_NORM_TOL:
            raise NotADensityMatrix(f"state vector has norm {norm!r}, expected 1")
        object.__setattr__(self, "vector", _frozen(v))
        object.__setattr__(self, "dims", _as_dims(dims, v.size))

    def projector(self) -> DensityMatrix:
        return DensityMatrix.from_pure(self.vector, self.dims)

    def __repr__(self):
        return f"PureState(dims={self.dims})"


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues in descending order; ``eigenvectors[:, k]`` belongs to ``eigenvalues[k]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _check_density(data):
    herm = np.linalg.norm(data - data.conj().T)
    if herm > EPS_HERM:
        raise NotHermitian(f"Hermiticity residual {herm:.3e} exceeds {EPS_HERM}")
    tr = np.trace(data).real
    if abs(tr - 1.0) > EPS_TRACE:
        raise NotADensityMatrix(f"trace {tr!r} differs from 1")
    lmin = np.linalg.eigvalsh((data + data.conj().T) / 2)[0]
    if lmin < -EPS_PSD:
        raise NotADensityMatrix(f"smallest eigenvalue {lmin:.3e} below -{EPS_PSD}")


def _matrix(rho):
    return rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


# --------------------------------------------------------------------------
# entropies
# --------------------------------------------------------------------------

def shannon_entropy(probs) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def entropy_from_eigenvalues(eigs, axis=-1):
    """Vectorised ``-sum(l log2 l)`` with negative round-off clipped to zero."""
    lam = np.clip(np.asarray(eigs, dtype=float), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(lam > 0, lam * np.log2(np.where(lam > 0, lam, 1.0)), 0.0)
    return -np.sum(terms, axis=axis)


def entropy_batch(mats) -> np.ndarray:
    """Entropies of a stack of Hermitian matrices, no validation."""
    return entropy_from_eigenvalues(np.linalg.eigvalsh(mats))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Von Neumann entropy ``-Tr rho log2 rho`` in bits.

    Eigenvalues in ``[-EPS_PSD, 0)`` are treated as exact zeros.

    >>> von_neumann_entropy(DensityMatrix.maximally_mixed(2))
    1.0
    """
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    lam = np.linalg.eigvalsh(rho.data)
    if lam[0] < -EPS_PSD:
        raise NotADensityMatrix(f"negative eigenvalue {lam[0]:.3e}")
    return float(entropy_from_eigenvalues(lam)) + 0.0


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix, floor: float = 1e-12) -> float:
    """Quantum relative entropy ``D(rho||sigma)`` in bits.

    Eigenvalues of ``sigma`` are clamped to ``floor`` so mismatched supports
    give a large finite number instead of infinity.
    """
    a, b = _matrix(rho), _matrix(sigma)
    la, va = np.linalg.eigh(a)
    lb, vb = np.linalg.eigh(b)
    log_b = (vb * np.log2(np.clip(lb, floor, None))) @ vb.conj().T
    cross = np.real(np.trace(a @ log_b))
    return float(-entropy_from_eigenvalues(la) - cross)


# --------------------------------------------------------------------------
# tensor structure
# --------------------------------------------------------------------------

def tensor_product(*states: DensityMatrix) -> DensityMatrix:
    """Kronecker product of density matrices; subsystem dims are concatenated."""
    if not states:
        raise BadSubsystemIndex("tensor_product needs at least one state")
    data = states[0].data
    dims = list(states[0].dims)
    for s in states[1:]:
        data = np.kron(data, s.data)
        dims.extend(s.dims)
    return DensityMatrix(data, dims, check=False)


def _normalize_keep(keep, n):
    if isinstance(keep, (int, np.integer)):
        keep = [keep]
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise BadSubsystemIndex("keep must name at least one subsystem")
    if keep[0] < 0 or keep[-1] >= n:
        raise BadSubsystemIndex(f"subsystem indices {keep} out of range for {n} subsystems")
    return keep


def partial_trace_array(data, dims, keep):
    """Partial trace on a raw (possibly batched) array.

    ``data`` may carry leading batch axes; the last two axes are the matrix.
    ``keep`` must already be sorted and valid.
    """
    dims = tuple(dims)
    n = len(dims)
    batch = data.shape[:-2]
    t = data.reshape(batch + dims + dims)
    letters = string.ascii_letters
    row = list(letters[:n])
    col = [letters[n + i] if i in keep else row[i] for i in range(n)]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    spec = "..." + "".join(row) + "".join(col) + "->..." + out
    dk = int(np.prod([dims[i] for i in keep]))
    return np.einsum(spec, t).reshape(batch + (dk, dk))


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduced state on the subsystems listed in ``keep`` (kept in original order)."""
    keep = _normalize_keep(keep, len(rho.dims))
    out = partial_trace_array(rho.data, rho.dims, keep)
    return DensityMatrix(out, [rho.dims[i] for i in keep], check=False)


def partial_transpose_array(data, dims, sys):
    """Transpose the subsystems in ``sys`` (row-major convention)."""
    dims = tuple(dims)
    n = len(dims)
    t = data.reshape(dims + dims)
    perm = list(range(2 * n))
    for i in sys:
        perm[i], perm[n + i] = n + i, i
    d = int(np.prod(dims))
    return t.transpose(perm).reshape(d, d)


def permute_subsystems_array(data, dims, order):
    """Reorder tensor factors: output factor ``k`` is input factor ``order[k]``."""
    dims = tuple(dims)
    n = len(dims)
    t = data.reshape(dims + dims)
    perm = list(order) + [n + i for i in order]
    d = int(np.prod(dims))
    return t.transpose(perm).reshape(d, d)


# --------------------------------------------------------------------------
# spectra and derived states
# --------------------------------------------------------------------------

def eig_psd(rho) -> Spectrum:
    """Eigendecomposition with descending eigenvalues, negatives clipped to 0."""
    data = _matrix(rho)
    herm = np.linalg.norm(data - data.conj().T)
    if herm > EPS_HERM:
        raise NotHermitian(f"Hermiticity residual {herm:.3e} exceeds {EPS_HERM}")
    lam, vec = np.linalg.eigh((data + data.conj().T) / 2)
    lam, vec = lam[::-1], vec[:, ::-1]
    return Spectrum(np.clip(lam, 0.0, None), vec)


def purify(rho: DensityMatrix) -> PureState:
    """Return ``sum_k sqrt(l_k) |v_k> (x) |k>`` on dims ``[d, d]``.

    The reference factor always has dimension ``d`` (not ``rank``), which keeps
    the dims bookkeeping uniform.
    """
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    spec = eig_psd(rho)
    d = rho.dim
    # sum_k sqrt(l_k) v_k (x) e_k, flattened row-major
    vec = (spec.eigenvectors * np.sqrt(spec.eigenvalues)).reshape(d * d)
    vec = vec / np.linalg.norm(vec)
    return PureState(vec, [d, d])


def cq_embed(weights, blocks: Sequence[DensityMatrix]) -> DensityMatrix:
    """Classical-quantum state ``sum_j q_j gamma_j (x) |j><j|``; flag register last."""
    q = np.asarray(weights, dtype=float)
    if q.ndim != 1 or len(q) != len(blocks) or len(q) == 0:
        raise WeightMismatch("need one weight per block")
    if abs(q.sum() - 1.0) > 1e-10 or np.any(q < -1e-12):
        raise WeightMismatch(f"weights sum to {q.sum()!r}, expected a probability vector")
    dims = blocks[0].dims
    if any(b.dims != dims for b in blocks):
        raise WeightMismatch("all blocks must share dims")
    m = len(q)
    d = blocks[0].dim
    out = np.zeros((d * m, d * m), dtype=complex)
    # row-major with flag last: entry (x, j; y, j) lives at (x*m + j, y*m + j)
    for j, (w, b) in enumerate(zip(q, blocks)):
        out[j::m, j::m] = w * b.data
    return DensityMatrix(out, list(dims) + [m], check=False)


# --------------------------------------------------------------------------
# random objects
# --------------------------------------------------------------------------

def random_pure_vector(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix with phase correction."""
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None, dims=None) -> DensityMatrix:
    """Random state from the induced (Hilbert-Schmidt for full rank) measure."""
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    return DensityMatrix((rho + rho.conj().T) / 2, dims)
