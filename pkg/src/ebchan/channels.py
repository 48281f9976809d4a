"""Channel representations: Kraus form, Holevo (measure-and-prepare) form, Choi matrices.

Entanglement-breaking channels are carried natively in Holevo form,
``Phi(rho) = sum_i Tr(X_i rho) theta_i``, because the separable decomposition
of ``(I (x) Phi)(rho_AB)`` is read off directly from the POVM. Kraus channels
can be tested for entanglement breaking only through the PPT test on their
Choi matrix.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from . import qmath
from .errors import BadParams, DimensionMismatch, InvalidHolevoForm
from .qmath import DensityMatrix, PureState

TP_TOL = 1e-9
DROP_EIG = 1e-12  # POVM / state eigencomponents below this are discarded


def _frozen(arr):
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False, init=False)
class KrausChannel:
    """CP map ``rho -> sum_k A_k rho A_k^dag``; ``kraus_ops`` has shape ``(K, d_out, d_in)``.

    Only shapes are checked here. Use :func:`validate_cpt` for trace
    preservation.
    """

    kraus_ops: np.ndarray
    d_in: int
    d_out: int

    def __init__(self, kraus_ops):
        ops = np.asarray(kraus_ops, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[0] == 0:
            raise BadParams(f"Kraus operators must stack to (K, d_out, d_in), got {ops.shape}")
        object.__setattr__(self, "kraus_ops", _frozen(ops))
        object.__setattr__(self, "d_out", int(ops.shape[1]))
        object.__setattr__(self, "d_in", int(ops.shape[2]))

    def to_kraus(self) -> "KrausChannel":
        return self

    def __repr__(self):
        return f"KrausChannel(d_in={self.d_in}, d_out={self.d_out}, rank={len(self.kraus_ops)})"


@dataclass(frozen=True, eq=False, init=False)
class HolevoFormChannel:
    """Measure-and-prepare channel built from a POVM and one output state per outcome."""

    povm: np.ndarray  # (m, d_in, d_in)
    outputs: tuple  # m DensityMatrix on d_out
    d_in: int
    d_out: int

    def __init__(self, povm, outputs: Sequence):
        X = np.asarray(povm, dtype=complex)
        if X.ndim != 3 or X.shape[1] != X.shape[2] or X.shape[0] == 0:
            raise InvalidHolevoForm(f"POVM must stack to (m, d, d), got {X.shape}")
        outs = tuple(o if isinstance(o, DensityMatrix) else DensityMatrix(o) for o in outputs)
        if len(outs) != X.shape[0]:
            raise InvalidHolevoForm(f"{X.shape[0]} POVM elements but {len(outs)} output states")
        d_out = outs[0].dim
        if any(o.dim != d_out for o in outs):
            raise InvalidHolevoForm("output states must share one dimension")
        d_in = X.shape[1]
        herm = max(np.linalg.norm(x - x.conj().T) for x in X)
        if herm > qmath.EPS_HERM:
            raise InvalidHolevoForm(f"POVM element not Hermitian (residual {herm:.3e})", herm)
        mins = [np.linalg.eigvalsh((x + x.conj().T) / 2)[0] for x in X]
        if min(mins) < -qmath.EPS_PSD:
            raise InvalidHolevoForm(f"POVM element has eigenvalue {min(mins):.3e}", -min(mins))
        resid = float(np.linalg.norm(X.sum(axis=0) - np.eye(d_in)))
        if resid > TP_TOL:
            raise InvalidHolevoForm(f"POVM sums to identity only within {resid:.6g}", resid)
        object.__setattr__(self, "povm", _frozen(X))
        object.__setattr__(self, "outputs", outs)
        object.__setattr__(self, "d_in", d_in)
        object.__setattr__(self, "d_out", d_out)

    def to_kraus(self) -> KrausChannel:
        return self._kraus

    @cached_property
    def _kraus(self):
        return holevo_to_kraus(self)

    def __repr__(self):
        return f"HolevoFormChannel(d_in={self.d_in}, d_out={self.d_out}, outcomes={len(self.outputs)})"


Channel = Union[KrausChannel, HolevoFormChannel]


@dataclass(frozen=True)
class ProductDecomposition:
    """Terms ``(q_j, a_j, b_j)`` with ``sum_j q_j |a_j><a_j| (x) |b_j><b_j|`` = target."""

    weights: np.ndarray
    a_states: tuple
    b_states: tuple

    def __len__(self):
        return len(self.weights)

    def reconstruct(self) -> np.ndarray:
        out = 0
        for q, a, b in zip(self.weights, self.a_states, self.b_states):
            v = np.kron(a.vector, b.vector)
            out = out + q * np.outer(v, v.conj())
        return out


@dataclass(frozen=True)
class CptDiagnostics:
    tp_residual: float
    choi_min_eig: float
    tol: float
    passed: bool


class EbStatus(enum.Enum):
    EB_CERTIFIED = "EB_certified"
    NOT_EB_CERTIFIED = "NOT_EB_certified"
    UNKNOWN = "UNKNOWN"


# --------------------------------------------------------------------------
# application
# --------------------------------------------------------------------------

def _check_input(ch, rho):
    if rho.dim != ch.d_in:
        raise DimensionMismatch(f"channel expects dimension {ch.d_in}, state has {rho.dim}")


def apply(ch: Channel, rho: DensityMatrix) -> DensityMatrix:
    """Output state of ``ch`` on ``rho``. Holevo-form channels go through :func:`holevo_apply`."""
    if isinstance(ch, HolevoFormChannel):
        return holevo_apply(ch, rho)
    _check_input(ch, rho)
    A = ch.kraus_ops
    out = np.einsum("kij,jl,kml->im", A, rho.data, A.conj())
    return DensityMatrix((out + out.conj().T) / 2)


def holevo_apply(hf: HolevoFormChannel, rho: DensityMatrix) -> DensityMatrix:
    _check_input(hf, rho)
    probs = np.real(np.einsum("kij,ji->k", hf.povm, rho.data))
    out = sum(p * th.data for p, th in zip(probs, hf.outputs))
    return DensityMatrix(out)


def apply_pure_batch(kraus_ops, vectors) -> np.ndarray:
    """Outputs for a stack of pure inputs: ``(..., d_in) -> (..., d_out, d_out)``."""
    K, d_out, d_in = kraus_ops.shape
    v = (vectors @ kraus_ops.reshape(K * d_out, d_in).T).reshape(vectors.shape[:-1] + (K, d_out))
    return np.swapaxes(v, -1, -2) @ v.conj()


# --------------------------------------------------------------------------
# conversions
# --------------------------------------------------------------------------

def _psd_terms(mat):
    """Eigen-components ``(l_k, v_k)`` of a PSD matrix with ``l_k >= DROP_EIG``."""
    lam, vec = np.linalg.eigh((mat + mat.conj().T) / 2)
    keep = lam >= DROP_EIG
    return lam[keep][::-1], vec[:, keep][:, ::-1]


def holevo_to_kraus(hf: HolevoFormChannel) -> KrausChannel:
    """Kraus operators ``sqrt(l_il) |t_il><x_ik|`` with ``x_ik`` scaled eigenvectors of ``X_i``."""
    ops = []
    for X, theta in zip(hf.povm, hf.outputs):
        mu, xv = _psd_terms(X)
        lam, tv = _psd_terms(theta.data)
        for m, x in zip(mu, xv.T):
            bra = np.sqrt(m) * x.conj()
            for l, t in zip(lam, tv.T):
                ops.append(np.sqrt(l) * np.outer(t, bra))
    if not ops:
        raise InvalidHolevoForm("POVM has no component above the drop threshold")
    return KrausChannel(np.array(ops))


def choi_array(ch: Channel) -> np.ndarray:
    """Unchecked normalised Choi matrix on ``[d_in, d_out]``."""
    A = ch.to_kraus().kraus_ops
    d_in, d_out = A.shape[2], A.shape[1]
    # (I (x) A_k)|Omega> has components A_k[b, a] / sqrt(d_in) at (a, b)
    vecs = np.transpose(A, (0, 2, 1)).reshape(len(A), d_in * d_out) / np.sqrt(d_in)
    return np.einsum("ki,kj->ij", vecs, vecs.conj())


def choi_matrix(ch: Channel) -> DensityMatrix:
    """``(I (x) ch)(|Omega><Omega|)`` with the maximally entangled state normalised to trace 1."""
    return DensityMatrix(choi_array(ch), [ch.d_in, ch.d_out], check=False)


def validate_cpt(ch: Channel, tol: float = TP_TOL) -> CptDiagnostics:
    A = ch.to_kraus().kraus_ops
    tp = float(np.linalg.norm(np.einsum("kji,kjl->il", A.conj(), A) - np.eye(A.shape[2])))
    J = choi_array(ch)
    lmin = float(np.linalg.eigvalsh((J + J.conj().T) / 2)[0])
    return CptDiagnostics(tp, lmin, tol, tp <= tol and lmin >= -tol)


def tensor_channels(psi: Channel, phi: Channel) -> KrausChannel:
    """Kraus set ``{A_j (x) B_k}`` acting on ``d_in(psi) * d_in(phi)``."""
    A = psi.to_kraus().kraus_ops
    B = phi.to_kraus().kraus_ops
    ops = np.einsum("aij,bkl->abikjl", A, B)
    K = len(A) * len(B)
    return KrausChannel(ops.reshape(K, A.shape[1] * B.shape[1], A.shape[2] * B.shape[2]))


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------

def _weyl_operators(d):
    """All ``d**2`` Heisenberg-Weyl unitaries ``X^a Z^b``."""
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
            for a in range(d) for b in range(d)]


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel(np.eye(d)[None])


def depolarizing_channel(p: float, d: int) -> KrausChannel:
    """``rho -> (1-p) rho + p I/d`` via the Weyl twirl."""
    if not 0.0 <= p <= 1.0 or d < 1:
        raise BadParams(f"depolarizing needs p in [0, 1] and d >= 1, got p={p}, d={d}")
    ws = _weyl_operators(d)
    ops = [np.sqrt(1 - p + p / d**2) * ws[0]]
    ops += [np.sqrt(p / d**2) * w for w in ws[1:]]
    return KrausChannel(np.array(ops))


def make_special(kind: str, **params) -> Channel:
    """Named channels.

    ``cq``: ``basis`` (rows are orthonormal input vectors) and ``outputs``.
    ``qc``: ``povm``; outputs are computational basis projectors.
    ``depolarizing``: ``p`` and ``d``. ``identity``: ``d``.
    """
    try:
        if kind == "identity":
            return identity_channel(int(params["d"]))
        if kind == "depolarizing":
            return depolarizing_channel(float(params["p"]), int(params["d"]))
        if kind == "cq":
            basis = np.asarray(params["basis"], dtype=complex)
            if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
                raise BadParams("cq basis must be a square array of row vectors")
            if np.linalg.norm(basis @ basis.conj().T - np.eye(len(basis))) > 1e-9:
                raise BadParams("cq basis is not orthonormal")
            povm = np.array([np.outer(b, b.conj()) for b in basis])
            return HolevoFormChannel(povm, params["outputs"])
        if kind == "qc":
            povm = np.asarray(params["povm"], dtype=complex)
            m = len(povm)
            outs = [DensityMatrix(np.diag(np.eye(m)[i])) for i in range(m)]
            return HolevoFormChannel(povm, outs)
    except KeyError as exc:
        raise BadParams(f"{kind} channel missing parameter {exc}") from None
    raise BadParams(f"unknown special channel kind {kind!r}")


def random_channel(kind: str, d_in: int, d_out: int, rank_or_terms: int, seed: int) -> Channel:
    """Seeded random channel.

    ``general``: Stinespring truncation of a Haar isometry ``C^d_in -> C^d_out (x) C^rank``.
    ``eb_holevo``: POVM ``X_i = S^-1/2 G_i S^-1/2`` from Wishart ``G_i = M_i M_i^dag``,
    ``S = sum G_i``, paired with Hilbert-Schmidt random output states.
    """
    if min(d_in, d_out, rank_or_terms) < 1:
        raise BadParams("dimensions and rank must be positive")
    rng = np.random.default_rng(seed)
    if kind == "general":
        if d_out * rank_or_terms < d_in:
            raise BadParams(f"rank {rank_or_terms} too small for an isometry from {d_in} into {d_out}")
        big = d_out * rank_or_terms
        V = qmath.random_unitary(big, rng)[:, :d_in]
        # V rows indexed (out, k) row-major; A_k[out, in] = V[out*rank + k, in]
        ops = V.reshape(d_out, rank_or_terms, d_in).transpose(1, 0, 2)
        return KrausChannel(ops)
    if kind == "eb_holevo":
        G = []
        for _ in range(rank_or_terms):
            M = rng.normal(size=(d_in, d_in)) + 1j * rng.normal(size=(d_in, d_in))
            G.append(M @ M.conj().T)
        S = sum(G)
        lam, U = np.linalg.eigh(S)
        s_inv = (U / np.sqrt(lam)) @ U.conj().T
        povm = [s_inv @ g @ s_inv for g in G]
        povm = [(x + x.conj().T) / 2 for x in povm]
        outs = [qmath.random_density_matrix(d_out, rng) for _ in range(rank_or_terms)]
        return HolevoFormChannel(np.array(povm), outs)
    raise BadParams(f"unknown random channel kind {kind!r}")


# --------------------------------------------------------------------------
# entanglement breaking
# --------------------------------------------------------------------------

def choi_partial_transpose_min_eig(ch: Channel) -> float:
    J = choi_array(ch)
    Jg = qmath.partial_transpose_array(J, (ch.d_in, ch.d_out), [1])
    return float(np.linalg.eigvalsh((Jg + Jg.conj().T) / 2)[0])


def is_entanglement_breaking(ch: Channel) -> EbStatus:
    """PPT test on the Choi matrix; conclusive only when ``d_in * d_out <= 6``."""
    if choi_partial_transpose_min_eig(ch) < -qmath.EPS_PSD:
        return EbStatus.NOT_EB_CERTIFIED
    if ch.d_in * ch.d_out <= 6:
        return EbStatus.EB_CERTIFIED
    return EbStatus.UNKNOWN


def separable_output_decomposition(hf: HolevoFormChannel, rho_ab: DensityMatrix) -> ProductDecomposition:
    """Product-state decomposition of ``(I (x) hf)(rho_ab)``.

    Each outcome contributes the conditional state
    ``Tr_B[(I (x) X_i) rho_ab]`` on A tensored with ``theta_i`` on B; both are
    split into eigenvectors and every cross term becomes one product state.
    """
    d_in = hf.d_in
    if rho_ab.dim % d_in != 0:
        raise DimensionMismatch(f"state dimension {rho_ab.dim} not divisible by channel input {d_in}")
    d_a = rho_ab.dim // d_in
    if len(rho_ab.dims) == 2 and rho_ab.dims[1] != d_in:
        raise DimensionMismatch(f"second subsystem has dimension {rho_ab.dims[1]}, channel expects {d_in}")
    t = rho_ab.data.reshape(d_a, d_in, d_a, d_in)
    weights, a_states, b_states = [], [], []
    for X, theta in zip(hf.povm, hf.outputs):
        # sigma[a, a'] = sum_{b, b'} rho[a b, a' b'] X[b', b]
        sigma = np.einsum("abcd,db->ac", t, X)
        mu, av = _psd_terms(sigma)
        lam, bv = _psd_terms(theta.data)
        for m, a in zip(mu, av.T):
            for l, b in zip(lam, bv.T):
                weights.append(m * l)
                a_states.append(PureState(a / np.linalg.norm(a)))
                b_states.append(PureState(b / np.linalg.norm(b)))
    return ProductDecomposition(np.array(weights), tuple(a_states), tuple(b_states))
