"""Three-state Lindblad model of the mirror-less cavity.

Basis order is ``(|+>, |k0>, |vac>)`` and superoperators act on
column-stacked density matrices, ``vec(A rho B) = (B^T kron A) vec(rho)``.
Rates are in inverse time units with hbar absorbed into ``g``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .spectral import EffectiveModel

PLUS, K0, VAC = 0, 1, 2
BASIS_LABELS = ("+", "k0", "vac")
STATE_INDEX = {"plus": PLUS, "k0": K0, "vac": VAC}

# rounding in V exp(D t) V^-1 grows like cond(V) * eps; above this limit
# the propagator switches to scipy's scaling-and-squaring expm
EIG_COND_LIMIT = 1e4

# dichotomic observable Q = |k0><k0| - |+><+| - |vac><vac|
Q_DIAG = np.array([-1.0, 1.0, -1.0])


def ket(index: int) -> np.ndarray:
    v = np.zeros(3, dtype=complex)
    v[index] = 1.0
    return v


def projector(index: int) -> np.ndarray:
    p = np.zeros((3, 3), dtype=complex)
    p[index, index] = 1.0
    return p


def transition(to: int, frm: int) -> np.ndarray:
    """``|to><frm|``."""
    op = np.zeros((3, 3), dtype=complex)
    op[to, frm] = 1.0
    return op


SIGMA_MINUS = transition(K0, PLUS)
PHOTON_LOSS = transition(VAC, K0)
POLARIZATION_LOSS = transition(VAC, PLUS)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v).reshape(3, 3, order="F")


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (3, 3):
            raise ValueError("density operator must be 3x3")
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise ValueError("density operator must be Hermitian")
        if abs(np.trace(m) - 1) > 1e-12:
            raise ValueError("density operator must have unit trace")
        if np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T))) < -1e-10:
            raise ValueError("density operator must be positive semidefinite")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def pure(cls, state: str | int) -> "DensityOperator":
        index = STATE_INDEX[state] if isinstance(state, str) else state
        return cls(projector(index))

    def population(self, index: int) -> float:
        return float(self.matrix[index, index].real)

    def to_json(self) -> dict:
        flat = self.matrix.reshape(-1)
        return {
            "basis": list(BASIS_LABELS),
            "layout": "row-major",
            "entries": [[float(z.real), float(z.imag)] for z in flat],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "DensityOperator":
        if tuple(payload["basis"]) != BASIS_LABELS or payload.get("layout", "row-major") != "row-major":
            raise ValueError("unsupported basis or layout")
        flat = np.array([complex(re, im) for re, im in payload["entries"]])
        return cls(flat.reshape(3, 3))


def _dissipator(c: np.ndarray) -> np.ndarray:
    eye = np.eye(3)
    cdc = c.conj().T @ c
    return np.kron(c.conj(), c) - 0.5 * np.kron(eye, cdc) - 0.5 * np.kron(cdc.T, eye)


@dataclass(frozen=True)
class Liouvillian:
    superoperator: np.ndarray
    rates: tuple[float, float, float]
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def g(self) -> float:
        return self.rates[0]

    @property
    def kappa(self) -> float:
        return self.rates[1]

    @property
    def gamma(self) -> float:
        return self.rates[2]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.superoperator @ vec(rho))

    def _eigen(self):
        if "eig" not in self._cache:
            evals, evecs = np.linalg.eig(self.superoperator)
            if np.linalg.cond(evecs) > EIG_COND_LIMIT:
                self._cache["eig"] = None
            else:
                self._cache["eig"] = (evals, evecs, np.linalg.inv(evecs))
        return self._cache["eig"]

    def propagator(self, t) -> np.ndarray:
        """``exp(L t)`` as a 9x9 matrix, or a stack of them for array ``t``."""
        t_arr = np.asarray(t, dtype=float)
        eig = self._eigen()
        if eig is None:
            # eigenvectors too ill-conditioned: scaling and squaring
            flat = np.array([scipy.linalg.expm(self.superoperator * s) for s in t_arr.reshape(-1)])
            return flat.reshape(t_arr.shape + (9, 9))
        evals, evecs, inv = eig
        phases = np.exp(np.multiply.outer(t_arr, evals))
        out = np.einsum("ij,...j,jk->...ik", evecs, phases, inv)
        # exact identity at t = 0 rather than V V^-1 with rounding
        out[t_arr == 0] = np.eye(9)
        return out


def build_liouvillian(model: EffectiveModel) -> Liouvillian:
    g, kappa, gamma = model.g, model.kappa, model.gamma
    if min(g, kappa, gamma) < 0:
        raise ValueError("rates must be non-negative")
    return _build(float(g), float(kappa), float(gamma))


@functools.lru_cache(maxsize=256)
def _build(g: float, kappa: float, gamma: float) -> Liouvillian:
    eye = np.eye(3)
    h = g * (SIGMA_MINUS + SIGMA_MINUS.conj().T)
    coherent = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    sup = coherent + kappa * _dissipator(PHOTON_LOSS) + gamma * _dissipator(POLARIZATION_LOSS)
    return Liouvillian(sup, (g, kappa, gamma))


def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)


def evolve(L: Liouvillian, rho0, t) -> np.ndarray:
    """``exp(L t)[rho0]`` for scalar or array ``t`` (no validation)."""
    return _apply_stack(L.propagator(t), _as_matrix(rho0))


def propagate(L: Liouvillian, rho0: DensityOperator, t: float) -> DensityOperator:
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return rho0
    rho = evolve(L, rho0, t)
    return DensityOperator(0.5 * (rho + rho.conj().T))


def population_correlator(L: Liouvillian, q_state: str, t):
    """``Tr[P_q exp(L t) |q><q|]`` for the prepared state ``|q>``."""
    index = STATE_INDEX[q_state]
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    rho = evolve(L, projector(index), t)
    return np.real(rho[..., index, index])


def jump_superoperator(L: Liouvillian, rho: np.ndarray) -> np.ndarray:
    """Photon-detection map ``kappa |vac><k0| rho |k0><vac|``."""
    return L.kappa * PHOTON_LOSS @ rho @ PHOTON_LOSS.conj().T


def jump_correlator(L: Liouvillian, t):
    """Trace of the detection map applied to ``exp(L t)[|k0><k0|]``.

    Divided by ``kappa`` this is the prepared-``|k0>`` population correlator.
    """
    if L.kappa == 0:
        raise ValueError("jump correlator is undefined for kappa = 0")
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    rho = evolve(L, projector(K0), t)
    detected = jump_superoperator(L, rho)
    return np.real(np.trace(detected, axis1=-2, axis2=-1))


def _eigenprojectors(sign: float = 1.0):
    q = sign * Q_DIAG
    return [(value, np.diag((q == value).astype(complex))) for value in (1.0, -1.0)]


def projective_two_time(L: Liouvillian, rho0, t1, t2, mode: str = "projective", sign: float = 1.0):
    """Two-time correlator ``<Q(t1 + t2) Q(t1)>`` of the dichotomic ``Q``.

    ``projective``: measure ``Q`` at ``t1``, collapse, evolve for ``t2`` and
    measure again, ``sum_mn q_m q_n Tr[P_n exp(L t2)(P_m rho(t1) P_m)]``.
    ``regression``: ``Re Tr[Q exp(L t2)(Q rho(t1))]``.
    ``t1`` and ``t2`` may be equal-shape arrays.
    """
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    if np.any(t1 < 0) or np.any(t2 < 0):
        raise ValueError("times must be non-negative")
    rho_t1 = evolve(L, _as_matrix(rho0), t1)
    prop = L.propagator(t2)
    q_diag = sign * Q_DIAG
    if mode == "regression":
        moved = q_diag[:, None] * rho_t1
        later = _apply_stack(prop, moved)
        return np.real(np.einsum("i,...ii->...", q_diag, later))
    if mode != "projective":
        raise ValueError(f"unknown correlator mode {mode!r}")
    total = np.zeros(np.broadcast(t1, t2).shape)
    for q_m, proj_m in _eigenprojectors(sign):
        collapsed = proj_m @ rho_t1 @ proj_m
        later = _apply_stack(prop, collapsed)
        populations = np.real(np.diagonal(later, axis1=-2, axis2=-1))
        total = total + q_m * populations @ q_diag
    return total


def _apply_stack(prop: np.ndarray, rho: np.ndarray) -> np.ndarray:
    v = np.swapaxes(rho, -1, -2).reshape(rho.shape[:-2] + (9,))
    out = np.einsum("...ij,...j->...i", prop, v)
    return np.swapaxes(out.reshape(out.shape[:-1] + (3, 3)), -1, -2)
