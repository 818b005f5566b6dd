"""Dissipative dynamics of collective spin systems.

Two channels are supported: collective decay through the lowering operator
J_- = sum_i sigma_-^(i) with an optional coherent drive, and pure collective
dephasing generated by a Hermitian direction-field operator.  Small systems
evolve in the full 2^N space; permutation-symmetric initial states evolve in
the (N+1)-dimensional symmetric ladder |J=N/2, m>, where both measures reduce
to 3x3 eigenvalue problems and N = 50 is cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NumericalFailure, ValidationError
from .spincore import (DensityMatrix, DirectionField, OperatorKind,
                       SystemDescriptor, collective_operator, purity_of)

DICKE_STABILITY = 0.1


class Channel(Enum):
    CollectiveDecay = "collective-decay"
    Dephasing = "dephasing"


@dataclass(frozen=True)
class LindbladSpec:
    rabi_frequency: float = 0.0
    dissipation_rate: float = 1.0
    channel: Channel = Channel.CollectiveDecay
    dephasing_field: DirectionField | None = None

    def __post_init__(self):
        if self.dissipation_rate < 0:
            raise ValidationError("dissipation rate must be nonnegative")
        if self.channel is Channel.Dephasing and self.dephasing_field is None:
            raise ValidationError("dephasing channel needs a direction field")


@dataclass(frozen=True)
class DickeState:
    """Density matrix on the symmetric ladder, m = N/2 ... -N/2."""

    num_sites: int
    entries: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.entries, dtype=complex)
        dim = self.num_sites + 1
        if m.shape != (dim, dim):
            raise ValidationError(f"Dicke matrix must be {dim}x{dim}")
        if np.abs(m - m.conj().T).max() > 1e-10:
            raise ValidationError("Dicke matrix must be Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-10:
            raise ValidationError("Dicke matrix must have unit trace")
        if np.linalg.eigvalsh(m)[0] < -1e-10:
            raise ValidationError("Dicke matrix must be positive semidefinite")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    def purity(self) -> float:
        return purity_of(self.entries)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    purity: np.ndarray
    i_values: np.ndarray
    f_values: np.ndarray
    method: str
    dt: float
    subspace: bool
    states: tuple = field(default=(), repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ValidationError("trajectory times must be strictly increasing")
        p = np.asarray(self.purity, dtype=float)
        if np.any(p <= 0) or np.any(p > 1 + 1e-10):
            raise ValidationError("trajectory purity must lie in (0, 1]")

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,purity,I,F\n")
            for t, p, i, f in zip(self.times, self.purity,
                                  self.i_values, self.f_values):
                fh.write(f"{t:.17g},{p:.17g},{i:.17g},{f:.17g}\n")


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def collective_ladder(desc: SystemDescriptor) -> tuple[np.ndarray, np.ndarray]:
    """Full-space J_- and J_+ for qubits (sum of single-site sigma_-)."""
    if desc.twice_spin != 1:
        raise ValidationError("collective ladder is defined for qubit systems")
    xf = DirectionField.uniform(desc.num_sites, np.array([1.0, 0, 0]))
    yf = DirectionField.uniform(desc.num_sites, np.array([0, 1.0, 0]))
    jx = 0.5 * collective_operator(desc, xf, OperatorKind.PauliOps)
    jy = 0.5 * collective_operator(desc, yf, OperatorKind.PauliOps)
    return jx - 1j * jy, jx + 1j * jy


def _channel_ops(spec: LindbladSpec, desc: SystemDescriptor):
    """(Hamiltonian, jump operator) for the full-space generator."""
    if spec.channel is Channel.CollectiveDecay:
        jm, jp = collective_ladder(desc)
        h = 0.5 * spec.rabi_frequency * (jp + jm)
        return h, jm
    a = collective_operator(desc, spec.dephasing_field, OperatorKind.SpinOps)
    h = np.zeros_like(a)
    return h, a


def _rhs(rho: np.ndarray, h: np.ndarray, jump: np.ndarray,
         gamma: float) -> np.ndarray:
    out = -1j * (h @ rho - rho @ h)
    jr = jump @ rho
    jdagj = jump.conj().T @ jump
    out += gamma * (jr @ jump.conj().T
                    - 0.5 * (jdagj @ rho + rho @ jdagj))
    return out


def lindblad_rhs(rho: DensityMatrix, spec: LindbladSpec,
                 desc: SystemDescriptor | None = None) -> np.ndarray:
    """Right-hand side of the master equation; traceless and
    Hermiticity preserving by construction."""
    desc = desc or rho.descriptor
    h, jump = _channel_ops(spec, desc)
    return _rhs(rho.entries, h, jump, spec.dissipation_rate)


def _default_dt(spec: LindbladSpec, num_sites: int) -> float:
    rate = spec.dissipation_rate * (num_sites + 1)
    rate = max(rate, abs(spec.rabi_frequency), 1e-12)
    return DICKE_STABILITY / rate


def _rk4_run(rho: np.ndarray, rhs, t_grid: np.ndarray, dt: float):
    """Fixed-step RK4 between save points; yields (t, rho) at each point.

    The step is shortened at each save point so grid times are hit exactly.
    """
    t = float(t_grid[0])
    yield t, rho
    for t_next in t_grid[1:]:
        span = float(t_next) - t
        nstep = max(1, int(math.ceil(span / dt - 1e-12)))
        h = span / nstep
        for _ in range(nstep):
            k1 = rhs(rho)
            k2 = rhs(rho + 0.5 * h * k1)
            k3 = rhs(rho + 0.5 * h * k2)
            k4 = rhs(rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            tr = np.trace(rho).real
            if abs(tr - 1.0) > 1e-12:
                rho = rho / tr
        rho = 0.5 * (rho + rho.conj().T)
        t = float(t_next)
        yield t, rho


def _check_psd(rho: np.ndarray, t: float) -> None:
    if np.linalg.eigvalsh(rho)[0] < -1e-8:
        raise NumericalFailure(
            f"trajectory left the positive cone at t = {t:.6g}; reduce dt")


def evolve(rho0: DensityMatrix, spec: LindbladSpec, t_grid,
           dt: float | None = None, desc: SystemDescriptor | None = None,
           compute_measures: bool = False, restarts: int = 50,
           seed: int = 0) -> Trajectory:
    """Full-space master-equation evolution on a time grid.

    Measures along the trajectory are optional since the optimizer dominates
    cost; purity is always recorded.
    """
    desc = desc or rho0.descriptor
    t_grid = np.asarray(t_grid, dtype=float)
    step = dt if dt is not None else _default_dt(spec, desc.num_sites)
    if spec.dissipation_rate > 0 and \
            step > DICKE_STABILITY / (spec.dissipation_rate * (desc.num_sites + 1)) + 1e-15:
        raise ValidationError("dt exceeds the collective-rate stability bound")
    h, jump = _channel_ops(spec, desc)
    gamma = spec.dissipation_rate

    times, purs, ivals, fvals, states = [], [], [], [], []
    for t, rho in _rk4_run(rho0.entries.copy(),
                           lambda r: _rhs(r, h, jump, gamma), t_grid, step):
        _check_psd(rho, t)
        dm = DensityMatrix(desc, rho)
        times.append(t)
        purs.append(purity_of(rho))
        states.append(dm)
        if compute_measures:
            from .macromeasure import measure_F, measure_I
            ivals.append(measure_I(dm, restarts=restarts, seed=seed).value)
            fvals.append(measure_F(dm, restarts=restarts, seed=seed).value)
        else:
            ivals.append(np.nan)
            fvals.append(np.nan)
    return Trajectory(np.array(times), np.array(purs), np.array(ivals),
                      np.array(fvals), "rk4", step, False, tuple(states))


# ---------------------------------------------------------------------------
# symmetric-subspace path
# ---------------------------------------------------------------------------

def dicke_operators(num_sites: int):
    """J_x, J_y, J_z on the |J=N/2, m> ladder, m descending from N/2."""
    j = num_sites / 2.0
    m = j - np.arange(num_sites + 1)
    jz = np.diag(m)
    # <m+1| J_+ |m> : raising moves one index up (toward index 0)
    amp = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jp = np.zeros((num_sites + 1, num_sites + 1))
    jp[np.arange(num_sites), np.arange(1, num_sites + 1)] = amp
    jm = jp.T
    jx = 0.5 * (jp + jm)
    jy = -0.5j * (jp - jm)
    return jx, jy, jz, jp, jm


def dicke_ghz(num_sites: int) -> DickeState:
    v = np.zeros(num_sites + 1, dtype=complex)
    v[0] = v[-1] = 1.0 / np.sqrt(2.0)
    return DickeState(num_sites, np.outer(v, v.conj()))


def dicke_ground(num_sites: int) -> DickeState:
    """The steady state of collective decay, all spins down."""
    m = np.zeros((num_sites + 1, num_sites + 1), dtype=complex)
    m[-1, -1] = 1.0
    return DickeState(num_sites, m)


def dicke_embed(state: DickeState) -> DensityMatrix:
    """Isometric embedding into the full 2^N space (small N only)."""
    n = state.num_sites
    desc = SystemDescriptor(n, 1)
    dim = desc.total_dim
    iso = np.zeros((dim, n + 1))
    ones = np.array([bin(x).count("1") for x in range(dim)])
    for k in range(n + 1):  # k down spins <-> m = N/2 - k, ladder index k
        idx = np.flatnonzero(ones == k)
        iso[idx, k] = 1.0 / np.sqrt(len(idx))
    return DensityMatrix(desc, iso @ state.entries @ iso.T)


def dicke_evolve(state0: DickeState, spec: LindbladSpec, t_grid,
                 dt: float | None = None,
                 compute_measures: bool = True) -> Trajectory:
    """Collective-decay evolution restricted to the symmetric ladder."""
    if spec.channel is not Channel.CollectiveDecay:
        raise ValidationError("subspace evolution supports collective decay only")
    n = state0.num_sites
    _, _, _, jp, jm = dicke_operators(n)
    h = 0.5 * spec.rabi_frequency * (jp + jm)
    gamma = spec.dissipation_rate
    t_grid = np.asarray(t_grid, dtype=float)
    step = dt if dt is not None else _default_dt(spec, n)

    times, purs, ivals, fvals, states = [], [], [], [], []
    for t, rho in _rk4_run(state0.entries.copy(),
                           lambda r: _rhs(r, h, jm, gamma), t_grid, step):
        _check_psd(rho, t)
        st = DickeState(n, rho)
        times.append(t)
        purs.append(st.purity())
        states.append(st)
        if compute_measures:
            iv, fv = dicke_measures(st)
            ivals.append(iv)
            fvals.append(fv)
        else:
            ivals.append(np.nan)
            fvals.append(np.nan)
    return Trajectory(np.array(times), np.array(purs), np.array(ivals),
                      np.array(fvals), "rk4", step, True, tuple(states))


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (np.real(m) + np.real(m).T)


def dicke_measures(state: DickeState) -> tuple[float, float]:
    """Both measures of a symmetric state from (N+1)-dimensional data.

    Single-site operators act on the ladder as (2/N) J_a; same-site and
    cross-site correlators reduce to collective moments, and the symmetric
    shortcut turns each measure into N * lambda_max of a 3x3 block sum.
    The rank-deficient complement of the QFI sum is resolved through the
    support projector of rho, never through full-space objects.
    """
    n = state.num_sites
    if n < 2:
        raise ValidationError("subspace measures need N >= 2")
    rho = state.entries
    jx, jy, jz, _, _ = dicke_operators(n)
    jops = np.array([jx, jy, jz], dtype=complex)
    eye3 = np.eye(3)

    pur = purity_of(rho)
    # T_ab = Tr[rho J_a rho J_b]
    jr = np.einsum("akl,lm->akm", jops, rho)
    t_ab = np.einsum("akm,bmk->ab", jr, jr)
    rho2 = rho @ rho
    # Qs_ab = Re Tr[rho^2 {J_a, J_b}] / 2
    qs = np.real(np.einsum("km,aml,blk->ab", rho2, jops, jops))
    qs = 0.5 * (qs + qs.T)

    d_v = (1.0 / (n * pur)) * (pur * eye3 - (4.0 / n**2) * _sym(t_ab))
    o_v = (1.0 / (n * pur)) * ((4.0 * qs - n * pur * eye3) / (n * (n - 1))
                               - (4.0 / n**2) * _sym(t_ab))
    i_val = n * np.linalg.eigvalsh(d_v + (n - 1) * o_v)[-1]

    pi, u = np.linalg.eigh(rho)
    keep = pi > 1e-14
    pi_s = pi[keep]
    u_s = u[:, keep]
    g = np.einsum("akl,lm->akm", jops, u_s)       # J_a U_s
    tj = np.einsum("km,amr->akr", u_s.conj().T, g)  # U_s^dag J_a U_s
    denom = pi_s[:, None] + pi_s[None, :]
    c = (pi_s[:, None] - pi_s[None, :]) ** 2 / np.where(denom > 1e-14, denom, 1.0)
    c[denom <= 1e-14] = 0.0
    s1 = np.einsum("kl,akl,bkl->ab", c, tj, tj.conj())
    jsup = np.einsum("k,akl,bkl->ab", pi_s, tj, tj.conj())
    aw = np.real(np.einsum("k,alk,blk->ab", pi_s, g.conj(), g))
    aw = 0.5 * (aw + aw.T)

    s1s = _sym(s1)
    jsup_s = _sym(jsup)
    d_w = (1.0 / (2 * n)) * ((4.0 / n**2) * s1s + 2.0 * eye3
                             - (8.0 / n**2) * jsup_s)
    o_w = (1.0 / (2 * n)) * ((4.0 / n**2) * s1s
                             + 2.0 * (4.0 * aw - n * eye3) / (n * (n - 1))
                             - (8.0 / n**2) * jsup_s)
    f_val = n * np.linalg.eigvalsh(d_w + (n - 1) * o_w)[-1]
    return float(i_val), float(f_val)
