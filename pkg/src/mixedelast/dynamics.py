"""Time integration of the semidiscrete block ODE.

Crank-Nicolson (energy conserving for f = 0) and the 2-stage RadauIIA
method (third order, stiffly accurate, algebraically stable), plus the
third-order displacement reconstruction that consumes the RadauIIA
first-stage velocity derivative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .assembly import BlockSystem
from .errors import MixedElastError, SingularSystemError
from .statics import InitialData


@dataclass(frozen=True)
class ButcherTableau:
    """Runge-Kutta coefficients; row sums of A must equal c and sum(b) = 1."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if not np.allclose(self.A.sum(axis=1), self.c, atol=1e-15):
            raise MixedElastError("tableau row sums do not match the abscissae")
        if abs(self.b.sum() - 1.0) > 1e-15:
            raise MixedElastError("tableau weights must sum to 1")


RADAU2 = ButcherTableau(
    c=np.array([1.0 / 3.0, 1.0]),
    A=np.array([[5.0 / 12.0, -1.0 / 12.0], [3.0 / 4.0, 1.0 / 4.0]]),
    b=np.array([3.0 / 4.0, 1.0 / 4.0]),
)

CN = "cn"
RADAU2_NAME = "radau2"
SCHEMES = (CN, RADAU2_NAME)


@dataclass
class SemidiscreteState:
    """Coefficient vectors at one time: stress, velocity, rotation, displacement."""

    t: float
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    u: np.ndarray


@dataclass
class TrajectorySummary:
    final_state: SemidiscreteState
    times: np.ndarray
    energies: np.ndarray
    constraint_norms: np.ndarray
    alpha_norms: np.ndarray

    @property
    def max_constraint_rel(self) -> float:
        scale = np.maximum(self.alpha_norms, 1e-300)
        return float((self.constraint_norms / scale).max())


def _system_blocks(system: BlockSystem):
    cache = system._cache
    if "EG" not in cache:
        A, B, C, M = system.Amat, system.Bmat, system.Cmat, system.Mmat
        nM, nV, nK = system.dims
        E = sps.bmat([[A, None, C.T], [None, M, None], [C, None, None]], format="csr")
        G = sps.bmat(
            [[sps.csr_matrix((nM, nM)), -B.T, sps.csr_matrix((nM, nK))],
             [B, None, None],
             [sps.csr_matrix((nK, nM)), None, sps.csr_matrix((nK, nK))]],
            format="csr",
        )
        cache["EG"] = (E, G)
    return cache["EG"]


def _factorize(system: BlockSystem, scheme: str, dt: float):
    cache = system._cache.setdefault("factors", {})
    key = (scheme, dt)
    if key not in cache:
        E, G = _system_blocks(system)
        try:
            if scheme == CN:
                cache[key] = spla.splu((E - (dt / 2.0) * G).tocsc())
            else:
                a = RADAU2.A
                S = sps.bmat(
                    [[E - dt * a[0, 0] * G, -dt * a[0, 1] * G],
                     [-dt * a[1, 0] * G, E - dt * a[1, 1] * G]],
                    format="csc",
                )
                cache[key] = spla.splu(S)
        except RuntimeError as exc:
            raise SingularSystemError(f"step factorization failed: {exc}") from exc
    return cache[key]


def _load_vector(system: BlockSystem, t: float) -> np.ndarray:
    nM, nV, nK = system.dims
    F = np.zeros(nM + nV + nK)
    F[:nM] = system.dirichlet_load(t)
    F[nM:nM + nV] = system.load(t)
    return F


def _pack(state: SemidiscreteState) -> np.ndarray:
    return np.concatenate([state.alpha, state.beta, state.gamma])


def _unpack(system: BlockSystem, y: np.ndarray):
    nM, nV, _ = system.dims
    return y[:nM], y[nM:nM + nV], y[nM + nV:]


def cn_kernel(E, G, y: np.ndarray, dt: float, f_mid: np.ndarray, lu=None) -> np.ndarray:
    """One Crank-Nicolson update (E - dt/2 G) y1 = (E + dt/2 G) y + dt f_mid."""
    if lu is None:
        lu = spla.splu((E - (dt / 2.0) * G).tocsc())
    rhs = E @ y + (dt / 2.0) * (G @ y) + dt * f_mid
    return lu.solve(rhs)


def radau2_kernel(E, G, y: np.ndarray, dt: float, f1: np.ndarray, f2: np.ndarray,
                  lu=None):
    """One 2-stage RadauIIA update; returns (y1, first stage derivative K1)."""
    a, b = RADAU2.A, RADAU2.b
    if lu is None:
        S = sps.bmat(
            [[E - dt * a[0, 0] * G, -dt * a[0, 1] * G],
             [-dt * a[1, 0] * G, E - dt * a[1, 1] * G]],
            format="csc",
        )
        lu = spla.splu(S)
    gy = G @ y
    rhs = np.concatenate([gy + f1, gy + f2])
    kk = lu.solve(rhs)
    n = len(y)
    k1, k2 = kk[:n], kk[n:]
    return y + dt * (b[0] * k1 + b[1] * k2), k1


def cn_step(system: BlockSystem, state: SemidiscreteState, dt: float) -> SemidiscreteState:
    """Advance one Crank-Nicolson step with midpoint load evaluation.

    The displacement is updated by the trapezoidal rule in the velocity.
    The factorization of E - dt/2 G is cached on the system per (scheme, dt).
    """
    if dt <= 0:
        raise MixedElastError("dt must be positive")
    E, G = _system_blocks(system)
    lu = _factorize(system, CN, dt)
    y = _pack(state)
    y1 = cn_kernel(E, G, y, dt, _load_vector(system, state.t + dt / 2.0), lu=lu)
    if not np.all(np.isfinite(y1)):
        raise SingularSystemError("Crank-Nicolson step produced non-finite values")
    alpha, beta, gamma = _unpack(system, y1)
    u = state.u + (dt / 2.0) * (state.beta + beta)
    return SemidiscreteState(t=state.t + dt, alpha=alpha, beta=beta, gamma=gamma, u=u)


def radau2_step(system: BlockSystem, state: SemidiscreteState, dt: float,
                load: Callable[[float], np.ndarray] | None = None):
    """Advance one 2-stage RadauIIA step.

    Returns (new state, stage velocity derivative at t + dt/3).  The
    displacement is updated with the third-order reconstruction
    u1 = u + dt v + dt^2/2 vdot(t + dt/3).
    """
    if dt <= 0:
        raise MixedElastError("dt must be positive")
    E, G = _system_blocks(system)
    lu = _factorize(system, RADAU2_NAME, dt)
    if load is None:
        f1 = _load_vector(system, state.t + RADAU2.c[0] * dt)
        f2 = _load_vector(system, state.t + RADAU2.c[1] * dt)
    else:
        f1, f2 = load(state.t + RADAU2.c[0] * dt), load(state.t + RADAU2.c[1] * dt)
    y = _pack(state)
    y1, k1 = radau2_kernel(E, G, y, dt, f1, f2, lu=lu)
    if not np.all(np.isfinite(y1)):
        raise SingularSystemError("RadauIIA step produced non-finite values")
    alpha, beta, gamma = _unpack(system, y1)
    _, k1_beta, _ = _unpack(system, k1)
    u = reconstruct_displacement_third_order(state.u, state.beta, k1_beta, dt)
    new = SemidiscreteState(t=state.t + dt, alpha=alpha, beta=beta, gamma=gamma, u=u)
    return new, k1_beta


def reconstruct_displacement_third_order(u_i: np.ndarray, beta_i: np.ndarray,
                                         stage_beta_derivative: np.ndarray,
                                         dt: float) -> np.ndarray:
    """Taylor-type update u_{i+1} = u_i + dt v_i + dt^2/2 vdot(t_i + dt/3)."""
    return u_i + dt * beta_i + 0.5 * dt * dt * stage_beta_derivative


def energy(system: BlockSystem, state: SemidiscreteState) -> float:
    """Discrete energy 1/2 (A sigma, sigma) + 1/2 (rho v, v)."""
    return 0.5 * float(state.alpha @ (system.Amat @ state.alpha)
                       + state.beta @ (system.Mmat @ state.beta))


def integrate(system: BlockSystem, initial: InitialData, scheme: str, dt: float,
              T0: float, observers: Sequence[Callable] = ()) -> TrajectorySummary:
    """Step the block ODE from 0 to T0; dt must divide T0 within 1e-12.

    Observers are called as observer(step, t, state, system) after the
    initial state and after every step.  The summary records energy and the
    weak-symmetry constraint drift ||C alpha_n - C alpha_0|| per step.
    """
    if scheme not in SCHEMES:
        raise MixedElastError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if T0 <= 0 or dt <= 0:
        raise MixedElastError("T0 and dt must be positive")
    n_steps = int(round(T0 / dt))
    if n_steps < 1 or abs(n_steps * dt - T0) > 1e-12 * max(1.0, T0):
        raise MixedElastError(f"dt={dt} does not divide T0={T0}")

    state = SemidiscreteState(
        t=0.0, alpha=initial.sigma0.copy(), beta=initial.v0.copy(),
        gamma=initial.r0.copy(), u=initial.u0.copy(),
    )
    c_ref = system.Cmat @ state.alpha

    times = np.empty(n_steps + 1)
    energies = np.empty(n_steps + 1)
    cnorms = np.empty(n_steps + 1)
    anorms = np.empty(n_steps + 1)

    def record(i, st):
        times[i] = st.t
        energies[i] = energy(system, st)
        cnorms[i] = np.linalg.norm(system.Cmat @ st.alpha - c_ref)
        anorms[i] = np.linalg.norm(st.alpha)
        for obs in observers:
            obs(i, st.t, st, system)

    record(0, state)
    for i in range(1, n_steps + 1):
        if scheme == CN:
            state = cn_step(system, state, dt)
        else:
            state, _ = radau2_step(system, state, dt)
        record(i, state)

    return TrajectorySummary(final_state=state, times=times, energies=energies,
                             constraint_norms=cnorms, alpha_norms=anorms)
