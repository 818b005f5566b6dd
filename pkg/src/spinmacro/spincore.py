"""Spin-system descriptors, operators, canonical states and density-matrix
utilities.

Conventions used throughout the package:

* The local basis of a spin-S site is |S,m> with m descending, m = S..-S.
  For qubits |0> = |1/2,+1/2> (spin up) and |1> = |1/2,-1/2>.
* Multi-site indices are row-major over sites with site 0 slowest.
* Randomness always comes from :func:`stream_rng`; the stream-split rule is
  documented there and nowhere else.

Validation tolerances: algebraic identities 1e-12, state validation 1e-10.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, ValidationError

HERMITICITY_RTOL = 1e-12
TRACE_ATOL = 1e-10
PSD_ATOL = 1e-10

# Dense-storage bound on the total Hilbert-space dimension.
MAX_DENSE_DIM = 2**20


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Deterministic, platform-independent PRNG.

    The generator is PCG64 keyed by ``SeedSequence(entropy=seed,
    spawn_key=(stream,))``.  Independent streams for the same task are
    obtained by incrementing ``stream`` while keeping ``seed`` fixed; this is
    the only stream-split rule used in the package.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream,))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class SystemDescriptor:
    """N spin-S sites with a uniform spin per site (2S stored as an int)."""

    num_sites: int
    twice_spin: int

    def __post_init__(self):
        if self.num_sites < 1:
            raise ValidationError(f"num_sites must be >= 1, got {self.num_sites}")
        if self.twice_spin < 1:
            raise ValidationError(f"twice_spin must be >= 1, got {self.twice_spin}")
        if self.total_dim > MAX_DENSE_DIM:
            raise ValidationError(
                f"total dimension {self.local_dim}^{self.num_sites} exceeds the "
                f"dense-storage bound {MAX_DENSE_DIM}"
            )

    @property
    def spin(self) -> float:
        return self.twice_spin / 2.0

    @property
    def local_dim(self) -> int:
        return self.twice_spin + 1

    @property
    def total_dim(self) -> int:
        # exact integer arithmetic; the bound check lives in __post_init__
        return self.local_dim**self.num_sites


@dataclass(frozen=True)
class DirectionField:
    """One unit 3-vector per site; the optimization variable of the measures."""

    vectors: np.ndarray  # (N, 3) float

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValidationError(f"direction field must be (N, 3), got {v.shape}")
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValidationError("direction field vectors must be unit length")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "vectors", v)

    @property
    def num_sites(self) -> int:
        return self.vectors.shape[0]

    @staticmethod
    def uniform(num_sites: int, direction: Sequence[float]) -> "DirectionField":
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        return DirectionField(np.tile(d, (num_sites, 1)))

    @staticmethod
    def random(num_sites: int, rng: np.random.Generator) -> "DirectionField":
        v = rng.normal(size=(num_sites, 3))
        return DirectionField(v / np.linalg.norm(v, axis=1, keepdims=True))


class OperatorKind(Enum):
    """Which single-site operator triple a collective operator is built from.

    SpinOps uses S_x, S_y, S_z (operator norm S); PauliOps uses the Pauli
    matrices (operator norm 1) and is only defined for S = 1/2.
    """

    SpinOps = "spin"
    PauliOps = "pauli"


def _min_eigenvalue(mat: np.ndarray) -> float:
    d = mat.shape[0]
    if d <= 1024:
        return float(np.linalg.eigvalsh(mat)[0])
    # Cholesky of the shifted matrix certifies min eig >= -PSD_ATOL cheaply.
    try:
        np.linalg.cholesky(mat + 2 * PSD_ATOL * np.eye(d))
        return 0.0
    except np.linalg.LinAlgError:
        pass
    from scipy.sparse.linalg import eigsh

    val = eigsh(mat, k=1, which="SA", return_eigenvectors=False, maxiter=5000)
    return float(val[0].real)


@dataclass(frozen=True)
class DensityMatrix:
    """A validated density operator on the system given by ``descriptor``."""

    descriptor: SystemDescriptor
    entries: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.entries, dtype=complex)
        D = self.descriptor.total_dim
        if m.shape != (D, D):
            raise ValidationError(f"expected a {D}x{D} matrix, got {m.shape}")
        scale = max(np.abs(m).max(), 1.0)
        if np.abs(m - m.conj().T).max() > HERMITICITY_RTOL * scale:
            raise ValidationError("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValidationError(f"density matrix trace is {tr}, not 1")
        if _min_eigenvalue(m) < -PSD_ATOL:
            raise ValidationError("density matrix is not positive semidefinite")
        m = 0.5 * (m + m.conj().T)
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.descriptor.total_dim


def spin_matrices(twice_spin: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(S_x, S_y, S_z) on the |S,m> basis with m descending."""
    if twice_spin < 1:
        raise ValidationError("twice_spin must be >= 1")
    s = twice_spin / 2.0
    d = twice_spin + 1
    m = s - np.arange(d)  # S, S-1, ..., -S
    sz = np.diag(m).astype(complex)
    # S_+ |S,m> = sqrt(S(S+1) - m(m+1)) |S,m+1>; m+1 sits one row above.
    raise_amp = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    sp = np.zeros((d, d), dtype=complex)
    sp[np.arange(d - 1), np.arange(1, d)] = raise_amp
    sm = sp.conj().T
    sx = 0.5 * (sp + sm)
    sy = -0.5j * (sp - sm)
    return sx, sy, sz


def pauli_matrices() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sx, sy, sz = spin_matrices(1)
    return 2 * sx, 2 * sy, 2 * sz


@functools.lru_cache(maxsize=64)
def _site_basis_cached(kind: OperatorKind, twice_spin: int):
    if kind is OperatorKind.PauliOps:
        out = np.stack(pauli_matrices())
    else:
        out = np.stack(spin_matrices(twice_spin))
    out.flags.writeable = False
    return out


def site_basis(kind: OperatorKind, twice_spin: int):
    """The (3, d, d) operator triple for one site of the given kind
    (cached and read-only)."""
    if kind is OperatorKind.PauliOps and twice_spin != 1:
        raise ValidationError("PauliOps requires spin 1/2")
    return _site_basis_cached(kind, twice_spin)


def embed_site(desc: SystemDescriptor, site: int, local: np.ndarray) -> np.ndarray:
    """Id x ... x local x ... x Id acting on ``site``."""
    if not 0 <= site < desc.num_sites:
        raise ValidationError(f"site {site} out of range for N={desc.num_sites}")
    d = desc.local_dim
    local = np.asarray(local, dtype=complex)
    if local.shape != (d, d):
        raise ValidationError(f"local operator must be {d}x{d}")
    left = np.eye(d**site, dtype=complex)
    right = np.eye(d ** (desc.num_sites - site - 1), dtype=complex)
    return np.kron(np.kron(left, local), right)


def apply_site_right(mat: np.ndarray, desc: SystemDescriptor, site: int,
                     local: np.ndarray) -> np.ndarray:
    """mat @ embed_site(desc, site, local) in O(D^2 d) without forming the
    embedded operator."""
    d = desc.local_dim
    D = desc.total_dim
    dl = d**site
    dr = D // (dl * d)
    r = mat.reshape(D, dl, d, dr)
    out = np.matmul(local.T, r)
    return out.reshape(D, D)


def apply_site_left(mat: np.ndarray, desc: SystemDescriptor, site: int,
                    local: np.ndarray) -> np.ndarray:
    """embed_site(desc, site, local) @ mat in O(D^2 d)."""
    d = desc.local_dim
    D = desc.total_dim
    dl = d**site
    dr = D // (dl * d)
    r = mat.reshape(dl, d, dr * D)
    out = np.matmul(local, r)
    return out.reshape(D, D)


def collective_operator(desc: SystemDescriptor, fld: DirectionField,
                        kind: OperatorKind) -> np.ndarray:
    """A = sum_j alpha^(j) . basis(kind) on site j."""
    if fld.num_sites != desc.num_sites:
        raise ValidationError("direction field has wrong number of sites")
    basis = site_basis(kind, desc.twice_spin)
    D = desc.total_dim
    out = np.zeros((D, D), dtype=complex)
    for j in range(desc.num_sites):
        local = np.einsum("a,aij->ij", fld.vectors[j], basis)
        out += embed_site(desc, j, local)
    return out


def purity(rho: DensityMatrix) -> float:
    m = rho.entries
    return float(np.real(np.vdot(m, m)))


def purity_of(mat: np.ndarray) -> float:
    """Tr[m^2] for a raw Hermitian matrix (no DensityMatrix validation)."""
    return float(np.real(np.vdot(mat, mat)))


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the (sorted) site subset ``keep``."""
    keep = sorted(set(keep))
    N = rho.descriptor.num_sites
    if not keep or any(k < 0 or k >= N for k in keep):
        raise ValidationError(f"invalid keep set {keep} for N={N}")
    d = rho.descriptor.local_dim
    t = rho.entries.reshape((d,) * (2 * N))
    traced = [s for s in range(N) if s not in keep]
    # contract row/column indices of every traced site
    for s in reversed(traced):
        t = np.trace(t, axis1=s, axis2=s + t.ndim // 2)
    k = len(keep)
    dk = d**k
    out = t.reshape(dk, dk)
    return DensityMatrix(SystemDescriptor(k, rho.descriptor.twice_spin), out)


def _basis_state(desc: SystemDescriptor, levels: Sequence[int]) -> np.ndarray:
    idx = 0
    for lv in levels:
        idx = idx * desc.local_dim + lv
    v = np.zeros(desc.total_dim, dtype=complex)
    v[idx] = 1.0
    return v


def ghz_state(num_sites: int, twice_spin: int = 1) -> DensityMatrix:
    """(|S,S>^xN + |S,-S>^xN)/sqrt(2) as a projector."""
    desc = SystemDescriptor(num_sites, twice_spin)
    up = _basis_state(desc, [0] * num_sites)
    dn = _basis_state(desc, [desc.local_dim - 1] * num_sites)
    psi = (up + dn) / np.sqrt(2)
    return DensityMatrix(desc, np.outer(psi, psi.conj()))


def mixed_ghz(num_sites: int, eps: float, gamma: float) -> DensityMatrix:
    """Mixed GHZ family over |0>^xN and |eps>^xN with coherence weight gamma.

    |eps> = cos(eps)|0> + sin(eps)|1>; normalization 2(1 + gamma cos^N eps).
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValidationError(f"gamma must be in [0, 1], got {gamma}")
    desc = SystemDescriptor(num_sites, 1)
    zero = _basis_state(desc, [0] * num_sites)
    e1 = np.array([np.cos(eps), np.sin(eps)], dtype=complex)
    eps_vec = e1
    for _ in range(num_sites - 1):
        eps_vec = np.kron(eps_vec, e1)
    norm = 2.0 * (1.0 + gamma * np.cos(eps) ** num_sites)
    m = (np.outer(zero, zero.conj()) + np.outer(eps_vec, eps_vec.conj())
         + gamma * np.outer(zero, eps_vec.conj())
         + gamma * np.outer(eps_vec, zero.conj())) / norm
    return DensityMatrix(desc, m)


def metrology_state(num_sites: int, p: float) -> DensityMatrix:
    """Block 2x2 family with sub-optimal metrological precision.

    The first qubit labels the block; the other N-1 qubits carry tensor
    powers of rho0 = {(1+p)|0><0| + (1-p)|1><1|}/2 and its sigma_x twists.
    """
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p must be in [0, 1], got {p}")
    if num_sites < 2:
        raise ValidationError("metrology_state needs N >= 2")
    desc = SystemDescriptor(num_sites, 1)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    rho0 = 0.5 * np.diag([1 + p, 1 - p]).astype(complex)

    def tpow(m):
        out = np.array([[1.0 + 0j]])
        for _ in range(num_sites - 1):
            out = np.kron(out, m)
        return out

    e00 = np.array([[1, 0], [0, 0]], dtype=complex)
    e01 = np.array([[0, 1], [0, 0]], dtype=complex)
    m = 0.5 * (np.kron(e00, tpow(rho0))
               + p * np.kron(e01, tpow(rho0 @ sx))
               + p * np.kron(e01.T, tpow(sx @ rho0))
               + np.kron(np.diag([0.0, 1.0]).astype(complex), tpow(sx @ rho0 @ sx)))
    return DensityMatrix(desc, m)


def random_density(desc: SystemDescriptor, rank: int, seed: int,
                   stream: int = 0) -> DensityMatrix:
    """Ginibre-induced random state: G is D x rank complex standard normal,
    rho = G G^dag / Tr[G G^dag].  Deterministic in (seed, stream)."""
    D = desc.total_dim
    if not 1 <= rank <= D:
        raise ValidationError(f"rank must be in [1, {D}], got {rank}")
    rng = stream_rng(seed, stream)
    g = rng.normal(size=(D, rank)) + 1j * rng.normal(size=(D, rank))
    m = g @ g.conj().T
    m /= np.real(np.trace(m))
    return DensityMatrix(desc, m)


def random_pure(desc: SystemDescriptor, seed: int, stream: int = 0) -> DensityMatrix:
    return random_density(desc, 1, seed, stream)


# ---------------------------------------------------------------------------
# MSDM v1 density-matrix text format
# ---------------------------------------------------------------------------

def write_msdm(rho: DensityMatrix, path) -> None:
    """Write the "MSDM v1" text format: header, size line, then D rows of
    whitespace-separated ``re,im`` entries at 17 significant digits."""
    desc = rho.descriptor
    with open(path, "w") as fh:
        fh.write("MSDM v1\n")
        fh.write(f"N {desc.num_sites} S2 {desc.twice_spin}\n")
        for row in rho.entries:
            fh.write(" ".join(f"{z.real:.17g},{z.imag:.17g}" for z in row))
            fh.write("\n")


def read_msdm(path) -> DensityMatrix:
    """Read "MSDM v1"; validates the density-matrix invariants and raises
    FormatError on any malformed or unphysical content."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0].strip() != "MSDM v1":
        raise FormatError("missing 'MSDM v1' header")
    if len(lines) < 2:
        raise FormatError("missing size line")
    parts = lines[1].split()
    if len(parts) != 4 or parts[0] != "N" or parts[2] != "S2":
        raise FormatError(f"malformed size line: {lines[1]!r}")
    try:
        n, s2 = int(parts[1]), int(parts[3])
        desc = SystemDescriptor(n, s2)
    except (ValueError, ValidationError) as exc:
        raise FormatError(f"bad size line: {exc}") from exc
    D = desc.total_dim
    body = [ln for ln in lines[2:] if ln.strip()]
    if len(body) != D:
        raise FormatError(f"expected {D} matrix rows, found {len(body)}")
    m = np.empty((D, D), dtype=complex)
    for i, ln in enumerate(body):
        cells = ln.split()
        if len(cells) != D:
            raise FormatError(f"row {i} has {len(cells)} entries, expected {D}")
        for j, cell in enumerate(cells):
            try:
                re_s, im_s = cell.split(",")
                m[i, j] = complex(float(re_s), float(im_s))
            except ValueError as exc:
                raise FormatError(f"bad entry at ({i},{j}): {cell!r}") from exc
    try:
        return DensityMatrix(desc, m)
    except ValidationError as exc:
        raise FormatError(f"matrix fails density-matrix validation: {exc}") from exc
