"""Transverse-field Ising chain near its quantum phase transition.

Thermodynamic-limit block states of L contiguous spins come from the
free-fermion picture: a 2L x 2L Majorana correlation matrix, its canonical
skew form, and a product of commuting single-mode density operators mapped
back to qubits through Jordan-Wigner strings.  Finite chains are handled by
sparse exact diagonalization with parity-sector selection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.legendre import leggauss
from scipy.linalg import schur
from scipy.sparse.linalg import eigsh

from .errors import NumericalFailure, ValidationError
from .spincore import (DensityMatrix, SystemDescriptor, apply_site_right,
                       purity)

DENSE_BLOCK_CAP = 12
DENSE_CHAIN_CAP = 13


def g_coefficient(lam: float, l: int, tol: float = 1e-10) -> complex:
    """Fourier coefficient of the Bogoliubov phase factor.

    Composite Gauss-Legendre quadrature with panel doubling; the integrand
    is smooth on (0, 2pi) for every lam > 0 but jumps across phi = 0 at
    lam = 1, so panels never straddle that point.
    """
    if lam <= 0:
        raise ValidationError("interaction strength must be positive")

    nodes, weights = leggauss(24)

    def integrate(panels: int) -> complex:
        edges = np.linspace(0.0, 2.0 * np.pi, panels + 1)
        total = 0.0 + 0.0j
        for a, b in zip(edges[:-1], edges[1:]):
            phi = 0.5 * (b - a) * nodes + 0.5 * (b + a)
            z = lam * np.exp(-1j * phi) - 1.0
            f = np.exp(-1j * l * phi) * z / np.abs(z)
            total += 0.5 * (b - a) * np.dot(weights, f)
        return total / (2.0 * np.pi)

    prev = integrate(4)
    panels = 8
    while panels <= 4096:
        cur = integrate(panels)
        if abs(cur - prev) <= tol:
            return cur
        prev = cur
        panels *= 2
    raise NumericalFailure(f"g_{l} quadrature did not reach {tol} at lam={lam}")


@dataclass(frozen=True)
class MajoranaCorrelation:
    """Skew-symmetric block-Toeplitz matrix of Majorana two-point functions."""

    length: int
    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        n = 2 * self.length
        if g.shape != (n, n):
            raise ValidationError(f"correlation matrix must be {n}x{n}")
        if np.abs(g + g.T).max() > 1e-12:
            raise ValidationError("correlation matrix must be skew-symmetric")
        # block-Toeplitz: block (m, n) equals block (0, n - m)
        for m in range(1, self.length):
            for k in range(m, self.length):
                if np.abs(g[2 * m:2 * m + 2, 2 * k:2 * k + 2]
                          - g[0:2, 2 * (k - m):2 * (k - m) + 2]).max() > 1e-10:
                    raise ValidationError("correlation matrix is not block-Toeplitz")
        if np.linalg.svd(g, compute_uv=False)[0] > 1.0 + 1e-10:
            raise ValidationError("correlation matrix violates the Gaussian bound")
        g.flags.writeable = False
        object.__setattr__(self, "gamma", g)


def gamma_matrix(lam: float, length: int) -> MajoranaCorrelation:
    if length < 1:
        raise ValidationError("block length must be at least 1")
    g = {l: g_coefficient(lam, l) for l in range(1 - length, length)}
    for l, val in g.items():
        if abs(val.imag) > 1e-9:
            raise NumericalFailure(f"g_{l} acquired imaginary part {val.imag}")
    mat = np.zeros((2 * length, 2 * length))
    for m in range(length):
        for k in range(length):
            l = k - m
            mat[2 * m, 2 * k + 1] = g[l].real
            mat[2 * m + 1, 2 * k] = -g[-l].real
    return MajoranaCorrelation(length, mat)


@dataclass(frozen=True)
class CanonicalSkewForm:
    """Orthogonal V with V Gamma V^T = direct sum of nu_m [[0,1],[-1,0]].

    det V is +1 or -1: flipping one row pair to make its nu nonnegative
    flips the determinant, and both signs occur for physical blocks.
    """

    v: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        nu = np.asarray(self.nu, dtype=float)
        n = v.shape[0]
        if v.shape != (n, n) or nu.shape != (n // 2,):
            raise ValidationError("inconsistent canonical-form shapes")
        if np.abs(v @ v.T - np.eye(n)).max() > 1e-10:
            raise ValidationError("V must be orthogonal")
        if np.any(nu < -1e-12) or np.any(nu > 1.0 + 1e-10):
            raise ValidationError("mode invariants must lie in [0, 1]")
        v.flags.writeable = False
        nu.flags.writeable = False
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "nu", nu)

    @property
    def det_sign(self) -> float:
        return float(np.sign(np.linalg.det(self.v)))


def canonical_skew_form(corr: MajoranaCorrelation) -> CanonicalSkewForm:
    """Real-Schur reduction with deterministic sign and order cleanup."""
    gamma = corr.gamma
    t, q = schur(gamma, output="real")
    n = gamma.shape[0]
    v = q.T
    nu = np.empty(n // 2)
    for m in range(n // 2):
        nu[m] = 0.5 * (t[2 * m, 2 * m + 1] - t[2 * m + 1, 2 * m])
        if nu[m] < 0:
            nu[m] = -nu[m]
            v[[2 * m, 2 * m + 1]] = v[[2 * m + 1, 2 * m]]
    order = np.argsort(-nu, kind="stable")
    nu = nu[order]
    perm = np.empty(n, dtype=int)
    perm[0::2] = 2 * order
    perm[1::2] = 2 * order + 1
    v = v[perm]
    form = CanonicalSkewForm(v, nu)
    resid = v @ gamma @ v.T
    for m in range(n // 2):
        resid[2 * m, 2 * m + 1] -= nu[m]
        resid[2 * m + 1, 2 * m] += nu[m]
    if np.abs(resid).max() > 1e-10:
        raise NumericalFailure("skew canonicalization residual exceeds 1e-10")
    return form


# ---------------------------------------------------------------------------
# block density matrix via Jordan-Wigner strings
# ---------------------------------------------------------------------------

def _majorana_string(length: int, index: int):
    """Sparse action of c_index: column j maps to (row[j], amp[j]).

    Site 0 is the slowest index; a set bit means spin down.
    """
    dim = 1 << length
    site, odd = divmod(index, 2)
    cols = np.arange(dim)
    mask = 1 << (length - 1 - site)
    rows = cols ^ mask
    # Jordan-Wigner sign from sigma_z on all earlier sites
    zmask = ((1 << site) - 1) << (length - site)
    signs = 1.0 - 2.0 * (np.bitwise_count(cols & zmask) & 1)
    if odd:
        bit = (cols & mask) >> (length - 1 - site)
        amps = signs * 1j * (1.0 - 2.0 * bit)
    else:
        amps = signs.astype(complex)
    return rows, cols, amps


def _mode_operator(csf: CanonicalSkewForm, length: int, mode: int) -> sp.csr_matrix:
    """The fermionic annihilator b_mode as a sparse 2^L matrix."""
    dim = 1 << length
    op = sp.csr_matrix((dim, dim), dtype=complex)
    for n in range(2 * length):
        coeff = 0.5 * (csf.v[2 * mode, n] + 1j * csf.v[2 * mode + 1, n])
        if abs(coeff) < 1e-16:
            continue
        rows, cols, amps = _majorana_string(length, n)
        op = op + sp.csr_matrix((coeff * amps, (rows, cols)), shape=(dim, dim))
    return op


def block_rdm(lam: float, length: int) -> DensityMatrix:
    """Reduced density matrix of L contiguous spins in the infinite chain.

    Product of commuting mode operators rho_m = (1-nu_m)/2 + nu_m b_m^dag b_m,
    accumulated as sparse-times-dense products so the cost stays far below
    a chain of full dense multiplications.
    """
    if not 1 <= length <= DENSE_BLOCK_CAP:
        raise ValidationError(f"block length must be in [1, {DENSE_BLOCK_CAP}]")
    csf = canonical_skew_form(gamma_matrix(lam, length))
    dim = 1 << length
    acc = None
    for mode in range(length):
        b = _mode_operator(csf, length, mode)
        rho_m = csf.nu[mode] * (b.conj().T @ b) \
            + sp.identity(dim, format="csr") * (0.5 * (1.0 - csf.nu[mode]))
        acc = rho_m.toarray() if acc is None else rho_m @ acc
    acc = 0.5 * (acc + acc.conj().T)
    acc /= np.trace(acc).real
    desc = SystemDescriptor(length, 1)
    try:
        return DensityMatrix(desc, acc)
    except ValidationError as exc:
        raise NumericalFailure(f"block state failed validation: {exc}") from exc


# ---------------------------------------------------------------------------
# finite chains
# ---------------------------------------------------------------------------

def ising_hamiltonian(lam: float, num_sites: int) -> sp.csr_matrix:
    """Periodic transverse-field Ising Hamiltonian, sparse 2^N."""
    if num_sites < 3:
        raise ValidationError("chain length must be at least 3")
    dim = 1 << num_sites
    states = np.arange(dim)
    nbits = np.bitwise_count(states)
    # field term: a set bit is spin down, so sum_j sigma_z^j = N - 2 popcount
    diag = -(num_sites - 2.0 * nbits.astype(float))
    rows = [states]
    cols = [states]
    data = [diag]
    for j in range(num_sites):
        mask = (1 << (num_sites - 1 - j)) | (1 << (num_sites - 1 - (j + 1) % num_sites))
        rows.append(states ^ mask)
        cols.append(states)
        data.append(np.full(dim, -lam))
    h = sp.csr_matrix((np.concatenate(data),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dim, dim))
    return h


def ground_state_vector(lam: float, num_sites: int) -> np.ndarray:
    """Ground state of the periodic chain; parity-even branch if degenerate."""
    if not 3 <= num_sites <= 14:
        raise ValidationError("chain length must be in [3, 14]")
    h = ising_hamiltonian(lam, num_sites)
    vals, vecs = eigsh(h, k=2, which="SA", v0=np.ones(h.shape[0]))
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    parity = 1.0 - 2.0 * (np.bitwise_count(np.arange(h.shape[0])) & 1)
    if vals[1] - vals[0] < 1e-10:
        # diagonalize the global phase-flip parity on the degenerate span
        pv = parity[:, None] * vecs
        pmat = vecs.T @ pv
        w, c = np.linalg.eigh(0.5 * (pmat + pmat.T))
        psi = vecs @ c[:, np.argmax(w)]
    else:
        psi = vecs[:, 0]
    psi = psi / np.linalg.norm(psi)
    pivot = np.argmax(np.abs(psi))
    if psi[pivot] < 0:
        psi = -psi
    return psi


def exact_ground_state(lam: float, num_sites: int) -> DensityMatrix:
    if num_sites > DENSE_CHAIN_CAP:
        raise ValidationError(
            f"dense ground-state matrix is capped at N = {DENSE_CHAIN_CAP}; "
            "use ground_state_vector for larger chains")
    psi = ground_state_vector(lam, num_sites)
    desc = SystemDescriptor(num_sites, 1)
    return DensityMatrix(desc, np.outer(psi, psi.conj()))


# ---------------------------------------------------------------------------
# observables, sweeps, scaling
# ---------------------------------------------------------------------------

def _site_expectation(rho: DensityMatrix, site: int, local: np.ndarray) -> float:
    out = apply_site_right(rho.entries, rho.descriptor, site, local)
    return float(np.trace(out).real)


def _pair_expectation(rho: DensityMatrix, i: int, j: int,
                      a: np.ndarray, b: np.ndarray) -> float:
    out = apply_site_right(rho.entries, rho.descriptor, i, a)
    out = apply_site_right(out, rho.descriptor, j, b)
    return float(np.trace(out).real)


_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def xx_correlation(lam: float, r: int, rho: DensityMatrix | None = None) -> float:
    """Connected <sigma_x^(0) sigma_x^(r)> in the infinite chain."""
    if r < 1:
        raise ValidationError("separation must be at least 1")
    if rho is None:
        rho = block_rdm(lam, r + 1)
    elif rho.descriptor.num_sites < r + 1:
        raise ValidationError("block too short for the requested separation")
    raw = _pair_expectation(rho, 0, r, _SX, _SX)
    m0 = _site_expectation(rho, 0, _SX)
    mr = _site_expectation(rho, r, _SX)
    return raw - m0 * mr


def max_variance_per_particle(lam: float, num_sites: int,
                              restarts: int = 60, seed: int = 0):
    """Both measures of the pure finite-chain ground state: the maximum
    variance of the direction-field operator per particle, from the
    connected-correlator matrix built directly on the state vector."""
    from .macromeasure import Convention, MeasureMatrix, optimize_direction
    from .spincore import OperatorKind

    psi = ground_state_vector(lam, num_sites)
    desc = SystemDescriptor(num_sites, 1)
    d = desc.total_dim
    phi = np.empty((3 * num_sites, d), dtype=complex)
    tensor = psi.reshape((2,) * num_sites)
    paulis = np.array([_SX, np.array([[0, -1j], [1j, 0]]), _SZ])
    for i in range(num_sites):
        moved = np.moveaxis(tensor, i, 0).reshape(2, -1)
        for a in range(3):
            out = paulis[a] @ moved
            phi[3 * i + a] = np.moveaxis(
                out.reshape((2,) + tensor.shape[:i] + tensor.shape[i + 1:]),
                0, i).reshape(-1)
    means = phi @ psi.conj()
    gram = phi @ phi.conj().T
    m = np.real(gram - np.outer(means, means.conj())) / num_sites
    mm = MeasureMatrix("V", 0.5 * (m + m.T), desc, OperatorKind.PauliOps,
                       Convention.QubitNormalized, tuple(range(num_sites)))
    return optimize_direction(mm, restarts=restarts, seed=seed, measure="I")


def scaling_exponent(n_values, lam: float = 1.0, restarts: int = 60,
                     seed: int = 0):
    """Least-squares slope of ln(max variance per particle) vs ln N."""
    n_values = sorted(n_values)
    records = []
    for n in n_values:
        res = max_variance_per_particle(lam, n, restarts=restarts, seed=seed)
        records.append((n, res.value))
    logs = np.log([[n, v] for n, v in records])
    slope = np.polyfit(logs[:, 0], logs[:, 1], 1)[0]
    return float(slope), records


@dataclass(frozen=True)
class SweepRecord:
    lam: float
    length: int
    i_value: float
    f_value: float
    purity: float


def sweep_block(lambdas, lengths, restarts: int = 60, seed: int = 0,
                f_dim_cap: int = 256) -> list[SweepRecord]:
    """Measure sweep over block states; the QFI measure is evaluated only
    while 2^L stays within f_dim_cap (its eigenbasis transforms are the
    cubic-cost step) and reported as nan beyond it."""
    from .macromeasure import measure_F, measure_I

    records = []
    for length in sorted(set(int(x) for x in lengths)):
        for lam in sorted(set(float(x) for x in lambdas)):
            rho = block_rdm(lam, length)
            iv = measure_I(rho, restarts=restarts, seed=seed).value
            if rho.descriptor.total_dim <= f_dim_cap:
                fv = measure_F(rho, restarts=restarts, seed=seed).value
            else:
                fv = float("nan")
            records.append(SweepRecord(lam, length, iv, fv, purity(rho)))
    return records


def sweep_to_csv(records, path) -> None:
    with open(path, "w") as fh:
        fh.write("lambda,L,I,F,purity\n")
        for r in records:
            fh.write(f"{r.lam:.17g},{r.length},{r.i_value:.17g},"
                     f"{r.f_value:.17g},{r.purity:.17g}\n")


def scaling_to_csv(records, path) -> None:
    with open(path, "w") as fh:
        fh.write("N,maxvar_per_particle\n")
        for n, v in records:
            fh.write(f"{n},{v:.17g}\n")
