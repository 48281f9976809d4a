"""Solvers for minimum output entropy, Holevo capacity and entanglement of formation.

All solvers are multi-restart local searches. Restart ``r`` draws from its own
generator seeded with ``cfg.seed + r``; restarts run in lockstep as array
batches but never share random numbers, so each restart's trajectory does not
depend on how many others run alongside it. The best restart wins, ties going
to the lowest index.

Returned values are one-sided: a minimum found is an upper bound on the true
minimum, a maximum found a lower bound on the true maximum.
``OptResult.bound_direction`` records which.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qmath
from .channels import Channel, apply, apply_pure_batch, identity_channel, tensor_channels
from .errors import BadParams, DimensionMismatch
from .qmath import DensityMatrix, PureState, entropy_from_eigenvalues

UPPER = "upper"  # reported value >= true optimum (minimisation)
LOWER = "lower"  # reported value <= true optimum (maximisation)

_GROW = 1.5
_SHRINK = _GROW ** -0.25  # one-fifth success rule equilibrium
_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 32
    max_iters: int = 2000
    tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1 or not self.tol > 0:
            raise BadParams(f"restarts, max_iters and tol must be positive: {self}")

    def replace(self, **kw) -> "OptimizerConfig":
        return OptimizerConfig(**{**self.__dict__, **kw})


@dataclass(frozen=True, eq=False)
class Ensemble:
    probs: np.ndarray
    states: tuple

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if len(p) != len(self.states) or len(p) == 0:
            raise BadParams("ensemble needs one probability per state")
        if abs(p.sum() - 1.0) > 1e-10 or np.any(p < 0):
            raise BadParams(f"ensemble probabilities sum to {p.sum()!r}")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "states", tuple(self.states))

    def average(self) -> np.ndarray:
        return sum(p * np.outer(s.vector, s.vector.conj()) for p, s in zip(self.probs, self.states))


@dataclass(frozen=True, eq=False)
class PureDecomposition:
    """``rho = sum_i probs[i] |states[i]><states[i]|``."""

    probs: np.ndarray
    states: tuple

    def reconstruct(self) -> np.ndarray:
        return sum(p * np.outer(s.vector, s.vector.conj()) for p, s in zip(self.probs, self.states))


@dataclass(frozen=True, eq=False)
class OptResult:
    value: float
    argument: object
    iterations: int
    converged: bool
    restart_values: tuple
    bound_direction: str
    seed: int
    method: str = ""
    extra: dict = field(default_factory=dict)

    def spread(self, k: int = 3) -> float:
        """Gap between the best and the k-th best restart; a crude error estimate."""
        vals = np.sort(np.asarray(self.restart_values, dtype=float))
        if self.bound_direction == LOWER:
            vals = vals[::-1]
        top = vals[: min(k, len(vals))]
        return float(abs(top[-1] - top[0]))


def _rngs(cfg: OptimizerConfig):
    return [np.random.default_rng(cfg.seed + r) for r in range(cfg.restarts)]


def _complex_normal(rngs, shape):
    return np.stack([rng.normal(size=shape) + 1j * rng.normal(size=shape) for rng in rngs])


def _tangent_step(psi, noise, step):
    """Move unit vectors along random directions orthogonal to themselves (and their phase)."""
    noise = noise - psi * np.sum(psi.conj() * noise, axis=-1, keepdims=True)
    noise = noise / np.linalg.norm(noise, axis=-1, keepdims=True)
    new = psi + step[..., None] * noise
    return new / np.linalg.norm(new, axis=-1, keepdims=True)


def _kraus(ch):
    return ch.to_kraus().kraus_ops


# --------------------------------------------------------------------------
# Holevo quantity
# --------------------------------------------------------------------------

def holevo_chi(ch: Channel, ens: Ensemble) -> float:
    """``H(sum_i p_i ch(rho_i)) - sum_i p_i H(ch(rho_i))`` in bits."""
    if len(ens.states) > ch.d_in ** 2:
        raise BadParams(f"ensemble has {len(ens.states)} states, cap is d_in^2 = {ch.d_in ** 2}")
    for s in ens.states:
        if s.vector.size != ch.d_in:
            raise DimensionMismatch(f"ensemble state dimension {s.vector.size} != d_in {ch.d_in}")
    outs = [apply(ch, s.projector()) for s in ens.states]
    avg = DensityMatrix(sum(p * o.data for p, o in zip(ens.probs, outs)), check=False)
    return qmath.von_neumann_entropy(avg) - float(
        sum(p * qmath.von_neumann_entropy(o) for p, o in zip(ens.probs, outs)))


# --------------------------------------------------------------------------
# minimum output entropy
# --------------------------------------------------------------------------

def _minimise_on_sphere(objective, d, cfg, maximise=False, step0=0.5):
    """Lockstep (1+1) random search over unit vectors in C^d, one chain per restart.

    ``objective`` maps an ``(R, d)`` batch to ``(R,)`` values. A chain stops
    once its step length satisfies ``step**2 < tol``.
    """
    rngs = _rngs(cfg)
    R = cfg.restarts
    sign = -1.0 if maximise else 1.0
    psi = np.stack([qmath.random_pure_vector(d, rng) for rng in rngs])
    f = sign * objective(psi)
    step = np.full(R, step0)
    active = np.ones(R, dtype=bool)
    iters = np.zeros(R, dtype=int)
    stop = np.sqrt(cfg.tol)
    for _ in range(cfg.max_iters):
        noise = _complex_normal(rngs, d)
        if not active.any():
            break
        trial = _tangent_step(psi, noise, step)
        ft = sign * objective(trial)
        better = active & (ft < f)
        psi = np.where(better[:, None], trial, psi)
        f = np.where(better, ft, f)
        step = np.where(active, np.where(better, np.minimum(step * _GROW, 1.0), step * _SHRINK), step)
        iters += active
        active &= step >= stop
    return psi, sign * f, iters, ~active


def min_output_entropy(ch: Channel, cfg: OptimizerConfig | None = None) -> OptResult:
    """Smallest output entropy over pure inputs found by multi-restart random search."""
    cfg = cfg or OptimizerConfig()
    A = _kraus(ch)
    psi, vals, iters, conv = _minimise_on_sphere(
        lambda v: qmath.entropy_batch(apply_pure_batch(A, v)), ch.d_in, cfg)
    best = int(np.argmin(vals))
    state = PureState(psi[best])
    value = qmath.von_neumann_entropy(apply(ch, state.projector()))
    return OptResult(value, state, int(iters[best]), bool(conv[best]), tuple(float(v) for v in vals),
                     UPPER, cfg.seed, "sphere-random-search")


# --------------------------------------------------------------------------
# Holevo capacity
# --------------------------------------------------------------------------

class _ChiState:
    """Batched ensemble bookkeeping: outputs, their entropies and relative entropies to the mean."""

    def __init__(self, A, psi, p):
        self.A = A
        self.psi = psi
        self.p = p
        self.out = apply_pure_batch(A, psi)
        self.h = qmath.entropy_batch(self.out)
        self.refresh_mean()

    def refresh_mean(self):
        R, n, d, _ = self.out.shape
        mean = (self.p[:, None, :] @ self.out.reshape(R, n, d * d)).reshape(R, d, d)
        lam, vec = np.linalg.eigh(mean)
        log_lam = np.log2(np.clip(lam, _LOG_FLOOR, None))
        self.log_mean = (vec * log_lam[:, None, :]) @ np.swapaxes(vec.conj(), -1, -2)
        self.h_mean = entropy_from_eigenvalues(lam)
        self.div = self.divergence(self.out, self.h)

    def divergence(self, out, h):
        """``D(out_i || mean)`` with the current (frozen) mean."""
        R, n, d, _ = out.shape
        lt = np.swapaxes(self.log_mean, -1, -2).reshape(R, d * d, 1)
        return -h - np.real(out.reshape(R, n, d * d) @ lt)[..., 0]

    @property
    def chi(self):
        return self.h_mean - np.sum(self.p * self.h, axis=-1)


def _update_probs(st: _ChiState, tol, max_rounds=10):
    """Multiplicative update ``p_i <- p_i 2^{D_i} / Z`` to stationarity (capped per call)."""
    for _ in range(max_rounds):
        logw = np.log2(np.clip(st.p, 1e-300, None)) + st.div
        logw -= logw.max(axis=-1, keepdims=True)
        w = np.where(st.p > 0, np.exp2(logw), 0.0)
        new = w / w.sum(axis=-1, keepdims=True)
        delta = np.max(np.abs(new - st.p))
        st.p = new
        st.refresh_mean()
        if delta < tol:
            break


def chi_star(ch: Channel, cfg: OptimizerConfig | None = None) -> OptResult:
    """Holevo capacity lower bound over ensembles of ``d_in**2`` pure states.

    Each outer round runs the exact probability update for the current
    states, then proposes a random tangent move for every state. A move is
    kept if it raises that state's relative entropy to the frozen mean
    output (the first-order change of chi), and the whole round is rolled
    back if chi itself dropped.
    """
    cfg = cfg or OptimizerConfig()
    A = _kraus(ch)
    d = ch.d_in
    n = d * d
    rngs = _rngs(cfg)
    R = cfg.restarts
    psi = np.stack([np.stack([qmath.random_pure_vector(d, rng) for _ in range(n)]) for rng in rngs])
    st = _ChiState(A, psi, np.full((R, n), 1.0 / n))
    step = np.full((R, n), 0.5)
    active = np.ones(R, dtype=bool)
    iters = np.zeros(R, dtype=int)
    stop = np.sqrt(cfg.tol)
    for _ in range(cfg.max_iters):
        noise = _complex_normal(rngs, (n, d))
        if not active.any():
            break
        _update_probs(st, cfg.tol)
        chi_old = st.chi
        trial = _tangent_step(st.psi, noise, step)
        t_out = apply_pure_batch(A, trial)
        t_h = qmath.entropy_batch(t_out)
        gain = st.divergence(t_out, t_h) > st.div
        move = gain & active[:, None]
        cand = _ChiState(A, np.where(move[..., None], trial, st.psi), st.p)
        ok = cand.chi >= chi_old
        commit = ok[:, None] & move
        st = _ChiState(A, np.where(commit[..., None], trial, st.psi), st.p)
        grown = np.minimum(step * _GROW, 1.0)
        new_step = np.where(commit, grown, step * _SHRINK)
        step = np.where(active[:, None], new_step, step)
        iters += active
        active &= step.max(axis=-1) >= stop
    _update_probs(st, cfg.tol, max_rounds=1000)
    vals = st.chi
    best = int(np.argmax(vals))
    ens = Ensemble(st.p[best] / st.p[best].sum(), tuple(PureState(v) for v in st.psi[best]))
    value = holevo_chi(ch, ens)
    return OptResult(value, ens, int(iters[best]), bool(not active[best]),
                     tuple(float(v) for v in vals), LOWER, cfg.seed, "alternating-ba-random-search")


# --------------------------------------------------------------------------
# entanglement of formation
# --------------------------------------------------------------------------

def _bipartite_dims(rho):
    if len(rho.dims) != 2:
        raise DimensionMismatch(f"expected two subsystems, got dims {rho.dims}")
    return rho.dims


def _wootters_batch(rhos):
    """Closed-form two-qubit E_F of a stack of 4x4 density matrices."""
    yy = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])
    lam, vec = np.linalg.eigh(rhos)
    sq = np.einsum("...ik,...k,...jk->...ij", vec, np.sqrt(np.clip(lam, 0, None)), vec.conj())
    tilde = yy @ rhos.conj() @ yy
    m = sq @ tilde @ sq
    s = np.sqrt(np.clip(np.linalg.eigvalsh((m + np.swapaxes(m.conj(), -1, -2)) / 2), 0, None))
    s = np.sort(s, axis=-1)[..., ::-1]
    conc = np.clip(s[..., 0] - s[..., 1] - s[..., 2] - s[..., 3], 0.0, 1.0)
    x = (1 + np.sqrt(np.clip(1 - conc ** 2, 0, None))) / 2
    return entropy_from_eigenvalues(np.stack([x, 1 - x], axis=-1))


def concurrence_2x2(rho: DensityMatrix) -> float:
    yy = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])
    spec = qmath.eig_psd(rho)
    sq = (spec.eigenvectors * np.sqrt(spec.eigenvalues)) @ spec.eigenvectors.conj().T
    m = sq @ yy @ rho.data.conj() @ yy @ sq
    s = np.sort(np.sqrt(np.clip(np.linalg.eigvalsh((m + m.conj().T) / 2), 0, None)))[::-1]
    return float(max(0.0, s[0] - s[1] - s[2] - s[3]))


def eof_wootters_2x2(rho_ab: DensityMatrix) -> float:
    """Exact two-qubit entanglement of formation from the concurrence (bits).

    Only used as an independent check on :func:`entanglement_of_formation`.
    """
    if tuple(rho_ab.dims) != (2, 2):
        raise DimensionMismatch(f"Wootters formula needs dims (2, 2), got {rho_ab.dims}")
    return float(_wootters_batch(rho_ab.data[None])[0]) + 0.0


class _EofProblem:
    """Average reduced entropy of decompositions ``w_i = sum_k U_ik sqrt(l_k) e_k``."""

    def __init__(self, rho, rank_tol=1e-12):
        d_a, d_b = _bipartite_dims(rho)
        spec = qmath.eig_psd(rho)
        keep = spec.eigenvalues > rank_tol
        self.lam = spec.eigenvalues[keep]
        self.B = spec.eigenvectors[:, keep] * np.sqrt(self.lam)  # (n, r)
        self.r = int(keep.sum())
        self.m = self.r * self.r
        # reduce onto the smaller factor; the entropy is the same for pure states
        self.swap = d_a < d_b
        self.d_trace, self.d_keep = (d_b, d_a) if self.swap else (d_a, d_b)
        self.dims = (d_a, d_b)

    def vectors(self, U):
        W = U @ self.B.T  # (R, m, n)
        W = W.reshape(W.shape[:-1] + self.dims)
        if self.swap:
            W = np.swapaxes(W, -1, -2)
        return W  # (..., m, d_trace, d_keep)

    def value_and_parts(self, U):
        W = self.vectors(U)
        M = np.einsum("...ab,...ac->...bc", W, W.conj())
        lam, vec = np.linalg.eigh(M)
        p = np.real(np.trace(M, axis1=-2, axis2=-1))
        f = np.sum(entropy_from_eigenvalues(lam) - entropy_from_eigenvalues(p[..., None]), axis=-1)
        return f, W, lam, vec, p

    def value(self, U):
        return self.value_and_parts(U)[0]

    def gradient(self, U, W, lam, vec, p):
        """Euclidean gradient ``Gamma_ik = <b_k|(I (x) G_i)|w_i>``, ``G_i = -log2(M_i / p_i)``."""
        ratio = np.clip(lam, 1e-300, None) / np.clip(p, 1e-300, None)[..., None]
        G = -np.einsum("...ik,...k,...jk->...ij", vec, np.log2(ratio), vec.conj())
        GW = np.einsum("...bc,...ac->...ab", G, W)  # (I (x) G) w on the kept factor
        if self.swap:
            GW = np.swapaxes(GW, -1, -2)
        GW = GW.reshape(GW.shape[:-2] + (-1,))
        return np.einsum("nk,...mn->...mk", self.B.conj(), GW)


def _cayley(X, alpha):
    m = X.shape[-1]
    eye = np.eye(m)
    half = alpha[:, None, None] * X / 2
    return np.linalg.solve(eye - half, eye + half)


def entanglement_of_formation(rho_ab: DensityMatrix, cfg: OptimizerConfig | None = None) -> OptResult:
    """Upper bound on E_F by descent over isometric mixings of the eigenvectors.

    A decomposition of length ``m = rank**2`` is ``w_i = sum_k U_ik sqrt(l_k) e_k``
    for an ``m x rank`` isometry ``U``. Each restart starts from a Haar
    isometry and follows the Riemannian gradient with a Cayley retraction
    and an adaptive step length (doubled on success, halved on failure).
    """
    cfg = cfg or OptimizerConfig()
    prob = _EofProblem(rho_ab)
    r, m = prob.r, prob.m
    rngs = _rngs(cfg)
    R = cfg.restarts
    U = np.stack([qmath.random_unitary(m, rng)[:, :r] for rng in rngs])
    f, W, lam, vec, p = prob.value_and_parts(U)
    alpha = np.full(R, 1.0)
    active = np.ones(R, dtype=bool)
    iters = np.zeros(R, dtype=int)
    quiet = np.zeros(R, dtype=int)
    grad_old = direction = None
    fresh = np.ones(R, dtype=bool)  # gradient must be recomputed at the current point
    for _ in range(cfg.max_iters):
        if not active.any() or m == 1:
            break
        gam = prob.gradient(U, W, lam, vec, p)
        Y = gam @ np.swapaxes(U.conj(), -1, -2)
        grad = (Y - np.swapaxes(Y.conj(), -1, -2)) / 2  # Lie-algebra gradient
        if direction is None:
            direction = -grad
        else:
            # Polak-Ribiere in the Lie algebra; restart on non-descent
            num = np.real(np.sum(grad.conj() * (grad - grad_old), axis=(-2, -1)))
            den = np.real(np.sum(grad_old.conj() * grad_old, axis=(-2, -1)))
            beta = np.clip(num / np.where(den > 0, den, 1.0), 0.0, None)
            cg = -grad + beta[:, None, None] * direction
            descent = np.real(np.sum(cg.conj() * grad, axis=(-2, -1))) < 0
            cg = np.where(descent[:, None, None], cg, -grad)
            direction = np.where(fresh[:, None, None], cg, direction)
        grad_old = np.where(fresh[:, None, None], grad, grad_old) if grad_old is not None else grad
        gnorm = np.linalg.norm(grad, axis=(-2, -1))
        trial = _cayley(direction, alpha) @ U
        ft, Wt, lt, vt, pt = prob.value_and_parts(trial)
        better = active & (ft < f)
        sel = better[:, None, None]
        drop = f - ft
        U = np.where(sel, trial, U)
        W = np.where(sel[..., None], Wt, W)
        lam = np.where(sel, lt, lam)
        vec = np.where(sel[..., None], vt, vec)
        p = np.where(better[:, None], pt, p)
        f = np.where(better, ft, f)
        alpha = np.where(better, np.minimum(alpha * 2.0, 1e3), alpha * 0.5)
        fresh = better
        iters += active
        small = ~better | (drop < cfg.tol)
        quiet = np.where(active & small, quiet + 1, 0)
        done = (gnorm < cfg.tol) | (quiet >= 30) | (alpha < 1e-14)
        active &= ~done
    vals = f
    best = int(np.argmin(vals))
    Wb = U[best] @ prob.B.T
    probs = np.real(np.sum(Wb * Wb.conj(), axis=-1))
    keep = probs > 0
    states = tuple(PureState(w / np.linalg.norm(w), prob.dims) for w in Wb[keep])
    probs = probs[keep] / probs[keep].sum()
    dec = PureDecomposition(probs, states)
    value = float(sum(q * qmath.von_neumann_entropy(qmath.partial_trace(s.projector(), [1]))
                      for q, s in zip(probs, states)))
    return OptResult(value, dec, int(iters[best]), bool(not active[best] or m == 1),
                     tuple(float(v) for v in vals), UPPER, cfg.seed, "stiefel-descent")


def max_output_eof(phi: Channel, d_a: int, cfg: OptimizerConfig | None = None,
                   inner: OptimizerConfig | None = None) -> OptResult:
    """Largest ``E_F((I (x) phi)(|psi><psi|))`` found over pure inputs on ``d_a (x) d_in``.

    Two-qubit outputs are scored with the Wootters formula; larger outputs
    fall back to :func:`entanglement_of_formation` with the (cheaper)
    ``inner`` configuration. The value is a lower bound on the true maximum.
    """
    cfg = cfg or OptimizerConfig()
    if d_a < 2:
        raise BadParams("reference dimension d_a must be at least 2")
    joint = tensor_channels(identity_channel(d_a), phi).kraus_ops
    dims = (d_a, phi.d_out)
    if dims == (2, 2):
        method = "wootters"

        def objective(v):
            return _wootters_batch(apply_pure_batch(joint, v))
    else:
        method = "heuristic"
        inner = inner or OptimizerConfig(restarts=4, max_iters=300, tol=cfg.tol, seed=cfg.seed)

        def objective(v):
            outs = apply_pure_batch(joint, v)
            return np.array([entanglement_of_formation(
                DensityMatrix((o + o.conj().T) / 2, dims), inner).value for o in outs])
    psi, vals, iters, conv = _minimise_on_sphere(objective, d_a * phi.d_in, cfg, maximise=True)
    best = int(np.argmax(vals))
    state = PureState(psi[best], [d_a, phi.d_in])
    return OptResult(float(vals[best]) + 0.0, state, int(iters[best]), bool(conv[best]),
                     tuple(float(v) for v in vals), LOWER, cfg.seed, method)
