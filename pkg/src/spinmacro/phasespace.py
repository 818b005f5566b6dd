"""SU(2) phase space for a single spin-S particle.

Characteristic function chi_{L,M} over the irreducible tensor basis,
spherical Wigner grids, and the two equivalent forms of the z-axis fringe
functional: the (frequency^2 x magnitude^2) sum over chi and the spherical
quadrature of W Lz^2 W.

Spherical-harmonic and Clebsch-Gordan conventions are Condon-Shortley
throughout.  Half-integer spins are handled by storing doubled integers, so
no float equality tests on half-integers ever occur.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import sph_harm_y

from .errors import ValidationError
from .spincore import DensityMatrix

_LGAMMA_CACHE: dict[int, float] = {}


def _lnfact(two_n: int) -> float:
    """ln((two_n/2)!) for an even doubled integer two_n."""
    if two_n % 2 or two_n < 0:
        raise ValidationError(f"factorial argument {two_n}/2 is not a whole number")
    if two_n not in _LGAMMA_CACHE:
        _LGAMMA_CACHE[two_n] = math.lgamma(two_n // 2 + 1)
    return _LGAMMA_CACHE[two_n]


def _as_doubled(x, name: str) -> int:
    two_x = 2.0 * float(x)
    r = round(two_x)
    if abs(two_x - r) > 1e-9:
        raise ValidationError(f"{name}={x} is not a half-integer")
    return int(r)


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """<j1 m1; j2 m2 | J M> in the Condon-Shortley convention.

    Racah's closed form, evaluated with log-factorials and compensated
    summation.  Returns 0 when M != m1+m2 or the triangle rule fails.
    """
    tj1, tm1 = _as_doubled(j1, "j1"), _as_doubled(m1, "m1")
    tj2, tm2 = _as_doubled(j2, "j2"), _as_doubled(m2, "m2")
    tJ, tM = _as_doubled(J, "J"), _as_doubled(M, "M")
    if (tj1 + tm1) % 2 or (tj2 + tm2) % 2 or (tJ + tM) % 2:
        raise ValidationError("m quantum numbers must match integer/half-integer j")
    if tm1 + tm2 != tM:
        return 0.0
    if not (abs(tj1 - tj2) <= tJ <= tj1 + tj2):
        return 0.0
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tM) > tJ:
        return 0.0

    # prefactor (all arguments are doubled integers, halved inside _lnfact)
    ln_pref = 0.5 * (
        math.log(tJ + 1.0)
        + _lnfact(tj1 + tj2 - tJ) + _lnfact(tj1 - tj2 + tJ)
        + _lnfact(-tj1 + tj2 + tJ) - _lnfact(tj1 + tj2 + tJ + 2)
        + _lnfact(tJ + tM) + _lnfact(tJ - tM)
        + _lnfact(tj1 - tm1) + _lnfact(tj1 + tm1)
        + _lnfact(tj2 - tm2) + _lnfact(tj2 + tm2)
    )

    # summation index k (doubled, even): all factorial args must be >= 0
    k_min = max(0, tj2 - tJ - tm1, tj1 + tm2 - tJ)
    k_max = min(tj1 + tj2 - tJ, tj1 - tm1, tj2 + tm2)
    if k_min % 2:
        k_min += 1
    total = 0.0
    comp = 0.0  # Kahan compensation
    for tk in range(k_min, k_max + 1, 2):
        ln_den = (_lnfact(tk) + _lnfact(tj1 + tj2 - tJ - tk)
                  + _lnfact(tj1 - tm1 - tk) + _lnfact(tj2 + tm2 - tk)
                  + _lnfact(tJ - tj2 + tm1 + tk) + _lnfact(tJ - tj1 - tm2 + tk))
        term = (-1.0) ** (tk // 2) * math.exp(ln_pref - ln_den)
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def irreducible_tensor(twice_spin: int, L: int, M: int) -> np.ndarray:
    """T_{L,M} on the |S,m> basis (m descending); orthonormal under the
    Hilbert-Schmidt inner product."""
    if not 0 <= L <= twice_spin:
        raise ValidationError(f"L={L} out of range for 2S={twice_spin}")
    if abs(M) > L:
        raise ValidationError(f"|M|={abs(M)} exceeds L={L}")
    d = twice_spin + 1
    s = twice_spin / 2.0
    t = np.zeros((d, d), dtype=complex)
    pref = math.sqrt((2 * L + 1) / (d))
    for row in range(d):       # m' = s - row
        mp = s - row
        for col in range(d):   # m = s - col
            m = s - col
            c = clebsch_gordan(s, m, L, M, s, mp)
            if c != 0.0:
                t[row, col] = pref * c
    return t


@dataclass(frozen=True)
class CharacteristicTable:
    """chi_{L,M} = Tr[T_{L,M}^dag rho] for 0 <= L <= 2S, |M| <= L.

    ``values[L, M + 2S]`` holds chi_{L,M}; out-of-range slots are zero.
    """

    twice_spin: int
    values: np.ndarray

    def chi(self, L: int, M: int) -> complex:
        if not 0 <= L <= self.twice_spin or abs(M) > L:
            raise ValidationError(f"(L,M)=({L},{M}) out of range")
        return complex(self.values[L, M + self.twice_spin])

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        expected = (self.twice_spin + 1, 2 * self.twice_spin + 1)
        if v.shape != expected:
            raise ValidationError(f"values must have shape {expected}")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def characteristic_of_operator(op: np.ndarray, twice_spin: int) -> CharacteristicTable:
    """Characteristic table of an arbitrary single-spin operator (no
    density-matrix validation; used for W symbols of observables)."""
    d = twice_spin + 1
    op = np.asarray(op, dtype=complex)
    if op.shape != (d, d):
        raise ValidationError(f"operator must be {d}x{d}")
    vals = np.zeros((twice_spin + 1, 2 * twice_spin + 1), dtype=complex)
    for L in range(twice_spin + 1):
        for M in range(-L, L + 1):
            t = irreducible_tensor(twice_spin, L, M)
            vals[L, M + twice_spin] = np.trace(t.conj().T @ op)
    return CharacteristicTable(twice_spin, vals)


def characteristic_table(rho: DensityMatrix) -> CharacteristicTable:
    if rho.descriptor.num_sites != 1:
        raise ValidationError("characteristic_table expects a single-spin state")
    return characteristic_of_operator(rho.entries, rho.descriptor.twice_spin)


@dataclass(frozen=True)
class WignerGrid:
    """W(theta, phi) sampled on Gauss-Legendre (in cos theta) x uniform phi."""

    twice_spin: int
    theta: np.ndarray         # (n_theta,)
    theta_weights: np.ndarray  # GL weights for the cos(theta) integral
    phi: np.ndarray           # (n_phi,), uniform on [0, 2pi)
    values: np.ndarray        # (n_theta, n_phi) real

    def __post_init__(self):
        for name in ("theta", "theta_weights", "phi", "values"):
            a = np.asarray(getattr(self, name), dtype=float).copy()
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        if self.values.shape != (len(self.theta), len(self.phi)):
            raise ValidationError("grid values shape mismatch")

    def same_spec(self, other: "WignerGrid") -> bool:
        return (self.twice_spin == other.twice_spin
                and self.values.shape == other.values.shape
                and np.array_equal(self.theta, other.theta)
                and np.array_equal(self.phi, other.phi))


def _grid_nodes(twice_spin: int, n_theta: int | None, n_phi: int | None):
    if n_theta is None:
        n_theta = twice_spin + 2
    if n_phi is None:
        n_phi = 2 * twice_spin + 4
    if n_theta < twice_spin + 1:
        raise ValidationError(
            f"n_theta={n_theta} undersamples 2S={twice_spin} (need >= 2S+1)")
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)[::-1].copy()      # ascending theta
    weights = w[::-1].copy()
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    return theta, weights, phi


def _harmonic_stack(twice_spin: int, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Y[L, M+2S, a, b] on the product grid."""
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    out = np.zeros((twice_spin + 1, 2 * twice_spin + 1) + th.shape, dtype=complex)
    for L in range(twice_spin + 1):
        for M in range(-L, L + 1):
            out[L, M + twice_spin] = sph_harm_y(L, M, th, ph)
    return out


def wigner_grid(table: CharacteristicTable, n_theta: int | None = None,
                n_phi: int | None = None) -> WignerGrid:
    """Synthesize W = sqrt(4pi/(2S+1)) sum chi_{L,M} Y_{L,M} on the grid."""
    ts = table.twice_spin
    theta, weights, phi = _grid_nodes(ts, n_theta, n_phi)
    y = _harmonic_stack(ts, theta, phi)
    w = math.sqrt(4 * np.pi / (ts + 1)) * np.einsum("lm,lmab->ab", table.values, y)
    if np.abs(w.imag).max() > 1e-10:
        raise ValidationError("Wigner grid has non-negligible imaginary part; "
                              "input table is not Hermitian-compatible")
    return WignerGrid(ts, theta, weights, phi, w.real)


def sphere_integral(grid: WignerGrid, integrand: np.ndarray) -> float:
    """Quadrature of a (n_theta, n_phi) integrand over the sphere."""
    dphi = 2 * np.pi / len(grid.phi)
    return float(np.einsum("a,ab->", grid.theta_weights, integrand) * dphi)


def characteristic_from_grid(grid: WignerGrid) -> CharacteristicTable:
    """Inverse transform: chi_{L,M} = sqrt((2S+1)/4pi) int Y*_{L,M} W."""
    ts = grid.twice_spin
    y = _harmonic_stack(ts, grid.theta, grid.phi)
    dphi = 2 * np.pi / len(grid.phi)
    vals = (math.sqrt((ts + 1) / (4 * np.pi)) * dphi
            * np.einsum("a,lmab,ab->lm", grid.theta_weights, y.conj(), grid.values))
    # zero out slots with |M| > L
    for L in range(ts + 1):
        vals[L, :ts - L] = 0.0
        vals[L, ts + L + 1:] = 0.0
    return CharacteristicTable(ts, vals)


def purity_from_characteristic(table: CharacteristicTable) -> float:
    return float(np.sum(np.abs(table.values) ** 2))


def iz_sum(table: CharacteristicTable) -> float:
    """Fringe functional along z from the characteristic function:
    sum M^2 |chi|^2 / (2 S purity)."""
    ts = table.twice_spin
    m = np.arange(-ts, ts + 1, dtype=float)
    num = float(np.sum(m**2 * np.abs(table.values) ** 2))
    return num / (ts * purity_from_characteristic(table))


def _apply_lz2(grid: WignerGrid) -> np.ndarray:
    """Lz^2 W applied spectrally along phi (exact for band-limited W)."""
    n_phi = len(grid.phi)
    if n_phi < 2 * grid.twice_spin + 2:
        raise ValidationError(
            f"n_phi={n_phi} undersamples the fringe frequency 2S={grid.twice_spin}")
    coef = np.fft.fft(grid.values, axis=1)
    m = np.fft.fftfreq(n_phi, d=1.0 / n_phi)
    return np.real(np.fft.ifft(coef * m**2, axis=1))


def iz_quadrature(grid: WignerGrid) -> float:
    """Same functional as iz_sum via (2S+1)/(8 pi S P) int W Lz^2 W."""
    ts = grid.twice_spin
    lz2w = _apply_lz2(grid)
    num = (ts + 1) / (8 * np.pi) * sphere_integral(grid, grid.values * lz2w)
    pur = (ts + 1) / (4 * np.pi) * sphere_integral(grid, grid.values**2)
    return float(num / (0.5 * ts * pur))


def overlap_expectation(grid_rho: WignerGrid, grid_op: WignerGrid,
                        twice_spin: int) -> float:
    """Tr[rho f] = (2S+1)/(4pi) int W_rho W_f over the sphere."""
    if twice_spin != grid_rho.twice_spin or not grid_rho.same_spec(grid_op):
        raise ValidationError("grids do not share a spec")
    return float((twice_spin + 1) / (4 * np.pi)
                 * sphere_integral(grid_rho, grid_rho.values * grid_op.values))


def wigner_to_csv(grid: WignerGrid, fh) -> None:
    """CSV export: header ``theta,phi,w``, theta-major rows, 17 significant
    digits."""
    fh.write("theta,phi,w\n")
    for a, th in enumerate(grid.theta):
        for b, ph in enumerate(grid.phi):
            fh.write(f"{th:.17g},{ph:.17g},{grid.values[a, b]:.17g}\n")
