"""The two macroscopicity measures.

The phase-space measure is the purity-weighted maximum of
Tr[rho^2 A^2 - rho A rho A] over collective operators A built from per-site
unit vectors; the QFI measure maximizes the quantum Fisher information of A
per particle.  Both reduce to a quadratic form alpha^T M alpha over the
product of N unit spheres, with M a real symmetric 3N x 3N matrix (the "V"
and "W" matrices respectively).

Conventions
-----------
``Raw`` keeps the printed definition (maximum N*S); ``QubitNormalized``
multiplies by 2 and applies only to S = 1/2 (maximum N).  The W form is
scaled so that its maximum is N for any S and it matches the
QubitNormalized V form entrywise on pure qubit states.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NumericalFailure, ValidationError
from .spincore import (DensityMatrix, DirectionField, OperatorKind,
                       SystemDescriptor, apply_site_left, apply_site_right,
                       collective_operator, purity, site_basis, stream_rng)

EIG_PAIR_CUTOFF = 1e-14


class Convention(Enum):
    Raw = "raw"
    QubitNormalized = "qubit"


def default_convention(desc: SystemDescriptor) -> Convention:
    return Convention.QubitNormalized if desc.twice_spin == 1 else Convention.Raw


def default_kind(desc: SystemDescriptor) -> OperatorKind:
    return OperatorKind.PauliOps if desc.twice_spin == 1 else OperatorKind.SpinOps


def _site_norm(kind: OperatorKind, desc: SystemDescriptor) -> float:
    return 1.0 if kind is OperatorKind.PauliOps else desc.spin


def _v_prefactor(kind: OperatorKind, desc: SystemDescriptor,
                 convention: Convention, pur: float) -> float:
    if convention is Convention.QubitNormalized and desc.twice_spin != 1:
        raise ValidationError("QubitNormalized convention requires S = 1/2")
    ns = _site_norm(kind, desc)
    pref = desc.spin / (desc.num_sites * ns**2 * pur)
    if convention is Convention.QubitNormalized:
        pref *= 2.0
    return pref


@dataclass(frozen=True)
class MeasureMatrix:
    """Real symmetric quadratic-form matrix over stacked per-site vectors."""

    kind: str  # "V" or "W"
    matrix: np.ndarray
    descriptor: SystemDescriptor
    operator_kind: OperatorKind
    convention: Convention
    sites: tuple[int, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        n3 = 3 * len(self.sites)
        if m.shape != (n3, n3):
            raise ValidationError(f"measure matrix must be {n3}x{n3}")
        if np.abs(m - m.T).max() > 1e-10 * max(1.0, np.abs(m).max()):
            raise ValidationError("measure matrix must be symmetric")
        m = 0.5 * (m + m.T)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def quadratic_form(self, fld: DirectionField) -> float:
        a = fld.vectors.reshape(-1)
        return float(a @ self.matrix @ a)


@dataclass(frozen=True)
class MeasureResult:
    measure: str  # "I" or "F"
    convention: Convention
    value: float
    optimal_field: DirectionField
    restarts_used: int
    best_restart_index: int
    gradient_norm_at_solution: float
    spread: float
    seed: int

    def to_json(self) -> str:
        payload = {
            "measure": self.measure,
            "convention": self.convention.value,
            "value": self.value,
            "alpha": [list(v) for v in self.optimal_field.vectors],
            "restarts": self.restarts_used,
            "grad_norm": self.gradient_norm_at_solution,
            "spread": self.spread,
            "seed": self.seed,
        }
        return json.dumps(payload, indent=2)


def _site_operator_stack(rho_mat: np.ndarray, desc: SystemDescriptor,
                         kind: OperatorKind, sites) -> np.ndarray:
    """X[p] = rho @ O_p for p = (site, axis) over the requested sites."""
    basis = site_basis(kind, desc.twice_spin)
    d = desc.local_dim
    D = desc.total_dim
    out = np.empty((3 * len(sites), D, D), dtype=complex)
    bt = basis.transpose(0, 2, 1)[:, None]  # (3, 1, d, d) for broadcasting
    for si, site in enumerate(sites):
        dl = d**site
        r = rho_mat.reshape(D * dl, d, D // (dl * d))
        out[3 * si:3 * si + 3] = np.matmul(bt, r).reshape(3, D, D)
    return out


_STACK_BYTES_LIMIT = 1_500_000_000


def _pair_block(xi: np.ndarray, xj: np.ndarray) -> np.ndarray:
    """Re(Tr[X_p X_q^dag] - Tr[X_p X_q]) for two operator stacks."""
    yi = xi.reshape(xi.shape[0], -1)
    yj = xj.reshape(xj.shape[0], -1)
    t1 = yi @ yj.conj().T
    t2 = yi @ xj.transpose(0, 2, 1).reshape(xj.shape[0], -1).T
    return np.real(t1 - t2)


def build_V(rho: DensityMatrix, desc: SystemDescriptor | None = None,
            kind: OperatorKind | None = None,
            convention: Convention | None = None,
            sites=None) -> MeasureMatrix:
    """Two-trace correlator matrix; cost O(n_sites^2 D^2)."""
    desc = desc or rho.descriptor
    kind = kind or default_kind(desc)
    convention = convention or default_convention(desc)
    sites = tuple(sites) if sites is not None else tuple(range(desc.num_sites))
    pur = purity(rho)
    pref = _v_prefactor(kind, desc, convention, pur)
    D = desc.total_dim
    n = len(sites)

    if 3 * n * D * D * 16 <= _STACK_BYTES_LIMIT:
        x = _site_operator_stack(rho.entries, desc, kind, sites)
        v = _pair_block(x, x)
    else:
        v = np.empty((3 * n, 3 * n))
        for si in range(n):
            xi = _site_operator_stack(rho.entries, desc, kind, sites[si:si + 1])
            for sj in range(si, n):
                xj = (xi if sj == si else
                      _site_operator_stack(rho.entries, desc, kind,
                                           sites[sj:sj + 1]))
                blk = _pair_block(xi, xj)
                v[3 * si:3 * si + 3, 3 * sj:3 * sj + 3] = blk
                v[3 * sj:3 * sj + 3, 3 * si:3 * si + 3] = blk.T
    v = pref * 0.5 * (v + v.T)
    return MeasureMatrix("V", v, desc, kind, convention, sites)


def _apply_local_left(mat: np.ndarray, desc: SystemDescriptor, site: int,
                      local: np.ndarray) -> np.ndarray:
    """embed_site(site, local) @ mat for a rectangular (D, K) matrix."""
    d = desc.local_dim
    D = desc.total_dim
    K = mat.shape[1]
    dl = d**site
    dr = D // (dl * d)
    r = mat.reshape(dl, d, dr * K)
    out = np.matmul(local, r)
    return out.reshape(D, K)


def build_W(rho: DensityMatrix, desc: SystemDescriptor | None = None,
            kind: OperatorKind | None = None, sites=None) -> MeasureMatrix:
    """QFI quadratic-form matrix from the spectral decomposition of rho.

    Eigenvalue pairs with pi_k + pi_l <= 1e-14 contribute zero; the
    zero-eigenvalue complement enters through a resolution of identity, so
    low-rank states cost O(rank) rather than O(D) in the pair sum.
    """
    desc = desc or rho.descriptor
    kind = kind or default_kind(desc)
    sites = tuple(sites) if sites is not None else tuple(range(desc.num_sites))
    ns = _site_norm(kind, desc)
    pref = 1.0 / (2.0 * desc.num_sites * ns**2)

    pi, u = np.linalg.eigh(rho.entries)
    keep = pi > EIG_PAIR_CUTOFF
    pi_s = pi[keep]
    u_s = np.ascontiguousarray(u[:, keep])
    r = len(pi_s)
    basis = site_basis(kind, desc.twice_spin)
    n = len(sites)
    D = desc.total_dim

    # G[p] = O_p U_s  (D x r);  T[p] = U_s^dag G[p]  (r x r, Hermitian)
    d = desc.local_dim
    g = np.empty((3 * n, D, r), dtype=complex)
    bl = basis[:, None]  # (3, 1, d, d) for broadcasting over the left index
    for si, site in enumerate(sites):
        dl = d**site
        us_r = u_s.reshape(dl, d, -1)
        g[3 * si:3 * si + 3] = np.matmul(bl, us_r).reshape(3, D, r)
    t = (u_s.conj().T @ g.transpose(1, 0, 2).reshape(D, 3 * n * r))
    t = t.reshape(r, 3 * n, r).transpose(1, 0, 2).copy()

    denom = pi_s[:, None] + pi_s[None, :]
    c = (pi_s[:, None] - pi_s[None, :]) ** 2 / np.where(denom > EIG_PAIR_CUTOFF,
                                                        denom, 1.0)
    c[denom <= EIG_PAIR_CUTOFF] = 0.0

    ct = c[None, :, :] * t
    s1 = ct.reshape(3 * n, -1) @ t.conj().reshape(3 * n, -1).T

    # complement of the retained spectrum: sum_k pi_k <k| O_p Q O_q |k> + h.c.
    gw = g * pi_s[None, None, :]
    hw = g.conj().reshape(3 * n, -1) @ gw.reshape(3 * n, -1).T
    tw = t * pi_s[None, :, None]
    jw = tw.reshape(3 * n, -1) @ t.conj().reshape(3 * n, -1).T
    w = np.real(s1) + 2.0 * np.real(hw - jw)
    w = pref * 0.5 * (w + w.T)
    return MeasureMatrix("W", w, desc, kind, sites=sites, convention=Convention.Raw
                         if desc.twice_spin != 1 else Convention.QubitNormalized)


# ---------------------------------------------------------------------------
# direction-field optimization
# ---------------------------------------------------------------------------

def _angles_to_field(angles: np.ndarray) -> np.ndarray:
    th, ph = angles[0::2], angles[1::2]
    st = np.sin(th)
    return np.column_stack((st * np.cos(ph), st * np.sin(ph), np.cos(th)))


def _riemannian_gradient_norm(m: np.ndarray, alpha: np.ndarray) -> float:
    """Norm of the sphere-projected gradient of alpha^T M alpha."""
    n = alpha.shape[0]
    ma = (m @ alpha.reshape(-1)).reshape(n, 3)
    radial = np.sum(ma * alpha, axis=1, keepdims=True)
    return float(np.linalg.norm(2.0 * (ma - radial * alpha)))


def _polish(m: np.ndarray, alpha: np.ndarray, shift: float, tol: float,
            max_iter: int = 20000) -> tuple[np.ndarray, float]:
    """Monotone block power ascent on the product of spheres (MM step for the
    convexified form); converges linearly to a constrained stationary point."""
    n = alpha.shape[0]
    gnorm = _riemannian_gradient_norm(m, alpha)
    for _ in range(max_iter):
        if gnorm <= tol:
            break
        h = (m @ alpha.reshape(-1)).reshape(n, 3) + shift * alpha
        norms = np.linalg.norm(h, axis=1, keepdims=True)
        if np.any(norms < 1e-300):
            break
        alpha = h / norms
        gnorm = _riemannian_gradient_norm(m, alpha)
    return alpha, gnorm


def optimize_direction(m: MeasureMatrix, restarts: int = 200, seed: int = 0,
                       tol: float = 1e-9, measure: str | None = None) -> MeasureResult:
    """Maximize the quadratic form over per-site unit vectors.

    BFGS ascent on the 2N angle parametrization from seeded random starts,
    followed by a monotone projection polish down to the gradient tolerance.
    Deterministic in (seed); ties within 1e-9 go to the lowest restart index.
    """
    from scipy.optimize import minimize

    mat = m.matrix
    n = len(m.sites)
    shift = float(np.linalg.norm(mat, 2)) + 1.0

    def neg(angles):
        a = _angles_to_field(angles).reshape(-1)
        return -float(a @ mat @ a)

    def neg_grad(angles):
        th, ph = angles[0::2], angles[1::2]
        st, ct = np.sin(th), np.cos(th)
        sp, cp = np.sin(ph), np.cos(ph)
        a = np.column_stack((st * cp, st * sp, ct))
        g = 2.0 * (mat @ a.reshape(-1)).reshape(n, 3)
        dth = g[:, 0] * ct * cp + g[:, 1] * ct * sp - g[:, 2] * st
        dph = -g[:, 0] * st * sp + g[:, 1] * st * cp
        out = np.empty(2 * n)
        out[0::2], out[1::2] = dth, dph
        return -out

    best_val = -np.inf
    best_alpha = None
    best_idx = -1
    best_gnorm = np.inf
    optima = []
    any_converged = False
    for ridx in range(restarts):
        rng = stream_rng(seed, ridx)
        v0 = rng.normal(size=(n, 3))
        v0 /= np.linalg.norm(v0, axis=1, keepdims=True)
        x0 = np.empty(2 * n)
        x0[0::2] = np.arccos(np.clip(v0[:, 2], -1, 1))
        x0[1::2] = np.arctan2(v0[:, 1], v0[:, 0])
        res = minimize(neg, x0, jac=neg_grad, method="BFGS",
                       options={"gtol": tol, "maxiter": 2000})
        alpha = _angles_to_field(res.x)
        alpha, gnorm = _polish(mat, alpha, shift, tol)
        val = float(alpha.reshape(-1) @ mat @ alpha.reshape(-1))
        optima.append(val)
        if gnorm <= tol:
            any_converged = True
        if val > best_val + 1e-9:
            best_val, best_alpha, best_idx, best_gnorm = val, alpha, ridx, gnorm
    if not any_converged:
        raise NumericalFailure(
            f"direction optimizer failed to converge on all {restarts} restarts",
            best_value=best_val)
    spread = float(max(optima) - min(optima)) if optima else 0.0
    return MeasureResult(
        measure=measure or ("I" if m.kind == "V" else "F"),
        convention=m.convention,
        value=best_val,
        optimal_field=DirectionField(best_alpha),
        restarts_used=restarts,
        best_restart_index=best_idx,
        gradient_norm_at_solution=best_gnorm,
        spread=spread,
        seed=seed,
    )


def measure_I(rho: DensityMatrix, desc: SystemDescriptor | None = None,
              convention: Convention | None = None,
              kind: OperatorKind | None = None,
              restarts: int = 200, seed: int = 0, tol: float = 1e-9) -> MeasureResult:
    desc = desc or rho.descriptor
    v = build_V(rho, desc, kind, convention)
    return optimize_direction(v, restarts=restarts, seed=seed, tol=tol, measure="I")


def measure_F(rho: DensityMatrix, desc: SystemDescriptor | None = None,
              kind: OperatorKind | None = None,
              restarts: int = 200, seed: int = 0, tol: float = 1e-9) -> MeasureResult:
    desc = desc or rho.descriptor
    w = build_W(rho, desc, kind)
    return optimize_direction(w, restarts=restarts, seed=seed, tol=tol, measure="F")


# ---------------------------------------------------------------------------
# fixed-field evaluations and cross-checks
# ---------------------------------------------------------------------------

def trace_form_I(rho: DensityMatrix, fld: DirectionField,
                 kind: OperatorKind | None = None,
                 convention: Convention = Convention.Raw) -> float:
    """Tr[rho^2 A^2 - rho A rho A] / (N S P) at a fixed direction field."""
    desc = rho.descriptor
    kind = kind or default_kind(desc)
    a = collective_operator(desc, fld, kind)
    ra = rho.entries @ a
    num = np.real(np.trace(rho.entries @ rho.entries @ a @ a)) \
        - np.real(np.trace(ra @ ra))
    pref = _v_prefactor(kind, desc, convention, purity(rho))
    return float(pref * num)


def spectral_I(rho: DensityMatrix, fld: DirectionField,
               kind: OperatorKind | None = None,
               convention: Convention = Convention.Raw) -> float:
    """Eigenbasis form of the same fixed-field value: the pair sum over
    (pi_k - pi_l)^2 |A_kl|^2 / (2 sum pi^2) with the same normalization."""
    desc = rho.descriptor
    kind = kind or default_kind(desc)
    a = collective_operator(desc, fld, kind)
    pi, u = np.linalg.eigh(rho.entries)
    amat = u.conj().T @ a @ u
    diff2 = (pi[:, None] - pi[None, :]) ** 2
    num = 0.5 * float(np.sum(diff2 * np.abs(amat) ** 2))
    pref = _v_prefactor(kind, desc, convention, float(np.sum(pi**2)))
    return float(pref * num)


def qfi_form(rho: DensityMatrix, fld: DirectionField,
             kind: OperatorKind | None = None) -> float:
    """Fixed-field QFI value on the W scale (max N), by direct pair summation."""
    desc = rho.descriptor
    kind = kind or default_kind(desc)
    a = collective_operator(desc, fld, kind)
    pi, u = np.linalg.eigh(rho.entries)
    amat = u.conj().T @ a @ u
    denom = pi[:, None] + pi[None, :]
    c = (pi[:, None] - pi[None, :]) ** 2 / np.where(denom > EIG_PAIR_CUTOFF, denom, 1.0)
    c[denom <= EIG_PAIR_CUTOFF] = 0.0
    ns = _site_norm(kind, desc)
    return float(np.sum(c * np.abs(amat) ** 2) / (2.0 * desc.num_sites * ns**2))


def dephasing_purity_rate(rho: DensityMatrix, fld: DirectionField,
                          kind: OperatorKind = OperatorKind.SpinOps,
                          gamma_rate: float = 1.0) -> float:
    """Purity-decay rate -(1/2NS) d/dt ln Tr[rho^2] under the Hermitian-jump
    dephasing channel with generator A and coupling gamma_rate.

    The 1/(N S P) normalization is fixed regardless of operator kind so the
    identity with the purity derivative holds exactly; with spin operators
    this coincides with the Raw trace form at the same field.
    """
    desc = rho.descriptor
    a = collective_operator(desc, fld, kind)
    r = rho.entries
    ra = r @ a
    num = np.real(np.trace(r @ ra @ a)) - np.real(np.trace(ra @ ra))
    return float(gamma_rate * num
                 / (desc.num_sites * desc.spin * purity(rho)))


def _swap_sites(mat: np.ndarray, desc: SystemDescriptor, i: int, j: int) -> np.ndarray:
    d = desc.local_dim
    N = desc.num_sites
    t = mat.reshape((d,) * (2 * N))
    perm = list(range(2 * N))
    perm[i], perm[j] = perm[j], perm[i]
    perm[N + i], perm[N + j] = perm[N + j], perm[N + i]
    return t.transpose(perm).reshape(mat.shape)


def symmetric_measure(rho: DensityMatrix, desc: SystemDescriptor | None = None,
                      matrix_kind: str = "V",
                      kind: OperatorKind | None = None,
                      convention: Convention | None = None) -> float:
    """Permutation-symmetric shortcut: N * lambda_max(D + (N-1) O) where D and
    O are the same-site and cross-site 3x3 blocks of the measure matrix."""
    desc = desc or rho.descriptor
    N = desc.num_sites
    if N < 2:
        raise ValidationError("symmetric shortcut needs N >= 2")
    swapped = _swap_sites(rho.entries, desc, 0, 1)
    if np.abs(swapped - rho.entries).max() > 1e-9:
        raise ValidationError("state is not permutation symmetric on sites (0, 1)")
    if matrix_kind == "V":
        m = build_V(rho, desc, kind, convention, sites=(0, 1))
    elif matrix_kind == "W":
        m = build_W(rho, desc, kind, sites=(0, 1))
    else:
        raise ValidationError(f"matrix_kind must be 'V' or 'W', got {matrix_kind!r}")
    dblock = m.matrix[0:3, 0:3]
    oblock = 0.5 * (m.matrix[0:3, 3:6] + m.matrix[3:6, 0:3].T)
    lam = np.linalg.eigvalsh(dblock + (N - 1) * oblock)[-1]
    return float(N * lam)
