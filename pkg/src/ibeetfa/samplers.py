"""Randomness sources and all samplers used by the scheme.

One-dimensional discrete Gaussians use a bilateral-geometric rejection
sampler with the tail cut at 12*sigma; below sigma = 2 the support is
so small that direct inverse-CDF enumeration over the (at most ~50)
candidate integers is both faster and immune to the pathological
rejection rates a geometric envelope has at half-integer centers.
Lattice Gaussians use the randomized-nearest-plane walk over a QR
factorization of the basis.

The density convention throughout is rho(x) = exp(-pi*|x - c|^2 / sigma^2),
so a 1-D sample has standard deviation about sigma/sqrt(2*pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SamplingError, SingularMatrix
from .zqlinalg import exact_int_matmul

#: Rejection/enumeration tails are cut at TAIL_CUT * sigma; the discarded
#: mass is below 2**-100 for every sigma.
TAIL_CUT = 12.0

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def slack_factor(dim) -> int:
    """Concrete stand-in for the omega(sqrt(log dim)) slack: ceil(sqrt(log2 dim)) + 1."""
    dim = int(dim)
    if dim < 2:
        return 2
    return math.ceil(math.sqrt(math.log2(dim))) + 1


class RandomSource:
    """Seedable deterministic randomness for every sampler.

    A thin wrapper over numpy's PCG64 so that (params, seed) fully pins
    every artifact the library produces.  Single-owner mutable state:
    use one source per execution context, or spawn children.
    """

    def __init__(self, seed):
        if isinstance(seed, str):
            seed = int.from_bytes(bytes.fromhex(seed), "big") if seed else 0
        elif isinstance(seed, (bytes, bytearray)):
            seed = int.from_bytes(bytes(seed), "big")
        self._seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
        self._gen = np.random.Generator(np.random.PCG64(self._seed_seq))

    def spawn(self) -> "RandomSource":
        """Child source with an independent, reproducible stream."""
        return RandomSource(self._seed_seq.spawn(1)[0])

    def integers(self, low, high, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size, dtype=np.int64)

    def random(self, size=None):
        return self._gen.random(size=size)

    def normal(self, scale, size=None):
        return self._gen.normal(0.0, scale, size=size)

    def bytes(self, n: int) -> bytes:
        return self._gen.bytes(n)


# ---------------------------------------------------------------------------
# 1-D discrete Gaussian
# ---------------------------------------------------------------------------


def _sample_z_enum(sigma: float, centers: np.ndarray, rng: RandomSource) -> np.ndarray:
    """Inverse-CDF enumeration over round(c) + [-w, w]; exact for small sigma."""
    w = max(1, math.ceil(TAIL_CUT * sigma))
    base = np.rint(centers).astype(np.int64)
    offsets = np.arange(-w, w + 1, dtype=np.int64)
    # weights[i, j] = rho(base_j + offsets_i)
    dev = (base[None, :] + offsets[:, None]) - centers[None, :]
    logw = -(math.pi / (sigma * sigma)) * dev * dev
    logw -= logw.max(axis=0, keepdims=True)
    weights = np.exp(logw)
    cdf = np.cumsum(weights, axis=0)
    u = rng.random(centers.shape[0]) * cdf[-1]
    idx = (u[None, :] >= cdf).sum(axis=0)
    return base + offsets[idx]


def _sample_z_reject(sigma: float, centers: np.ndarray, rng: RandomSource) -> np.ndarray:
    """Bilateral-geometric rejection around round(c), rate sqrt(2*pi)/sigma.

    Each round draws several proposals per still-pending lane at once,
    which keeps the number of numpy passes small even though single
    proposals are only accepted with probability ~1/2.
    """
    n = centers.shape[0]
    base = np.rint(centers).astype(np.int64)
    delta = centers - base
    log_r = -_SQRT_2PI / sigma
    # Envelope constant: sup over integers of target/proposal for |delta| <= 1/2
    # is exp(1/2 + sqrt(2*pi)/(2*sigma)) * 2; anything smaller clips acceptance.
    log_m = math.log(2.0) + 0.5 + _SQRT_2PI / (2.0 * sigma)
    out = np.zeros(n, dtype=np.int64)
    pending = np.arange(n)
    tail = TAIL_CUT * sigma
    tries = 1  # one proposal per lane first, then oversample the stragglers
    while pending.size:
        sz = pending.size
        u = rng.random((3, tries, sz))
        k = np.floor(np.log(u[0]) / log_r)
        x = np.where(u[1] < 0.5, k, -k)
        d = x - delta[pending]
        log_accept = (
            -(math.pi / (sigma * sigma)) * d * d - k * log_r - log_m
            - np.where(k > 0, math.log(0.5), 0.0)
        )
        ok = (np.log(u[2]) < log_accept) & (np.abs(d) <= tail)
        hit = ok.any(axis=0)
        first = ok.argmax(axis=0)
        chosen = x[first, np.arange(sz)]
        lanes = pending[hit]
        out[lanes] = base[lanes] + chosen[hit].astype(np.int64)
        pending = pending[~hit]
        tries = 6
    return out


def sample_z_gaussian_batch(sigma: float, centers, rng: RandomSource) -> np.ndarray:
    """Vector of independent D_{Z, sigma, c_i} samples, one per center."""
    if not sigma > 0:
        raise SamplingError(f"sigma must be positive, got {sigma}")
    centers = np.atleast_1d(np.asarray(centers, dtype=np.float64))
    if sigma < 2.0:
        return _sample_z_enum(sigma, centers, rng)
    return _sample_z_reject(sigma, centers, rng)


def sample_z_gaussian(sigma: float, center: float, rng: RandomSource) -> int:
    """One integer distributed statistically close to D_{Z, sigma, center}."""
    return int(sample_z_gaussian_batch(float(sigma), [float(center)], rng)[0])


# ---------------------------------------------------------------------------
# Lattice Gaussian (randomized nearest plane over a QR factorization)
# ---------------------------------------------------------------------------


@dataclass
class PreparedBasis:
    """QR data of a column basis, reused across many sampling calls."""

    basis: np.ndarray          # int64, d x d, columns are basis vectors
    q_factor: np.ndarray       # float64 orthonormal
    r_factor: np.ndarray       # float64 upper triangular
    gs_norms: np.ndarray       # |diag(R)|, the Gram-Schmidt norms

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def gs_norm(self) -> float:
        return float(self.gs_norms.max())


def prepare_basis(basis) -> PreparedBasis:
    """Factor a nonsingular integer column basis for repeated sampling."""
    b = np.asarray(basis, dtype=np.int64)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionMismatch(f"basis must be square, got {b.shape}")
    bf = b.astype(np.float64)
    q_factor, r_factor = np.linalg.qr(bf)
    gs = np.abs(np.diag(r_factor))
    scale = np.linalg.norm(bf)
    if gs.min() <= scale * np.finfo(np.float64).eps * b.shape[0] * 16:
        raise SingularMatrix("basis columns are (numerically) linearly dependent")
    return PreparedBasis(b, q_factor, r_factor, gs)


def klein_coefficients(prep: PreparedBasis, sigma: float, targets, rng: RandomSource) -> np.ndarray:
    """Integer coefficient matrix Z so B @ Z is a Gaussian lattice point near each target.

    targets is d x n (one column per walk).  Column j of the result
    satisfies: B @ Z[:, j] ~ D_{L(B), sigma, targets[:, j]} when sigma
    clears the Gram-Schmidt norm times the slack factor; below that the
    walk still terminates and stays lattice-exact, degrading smoothly
    toward deterministic nearest-plane rounding.
    """
    t = np.asarray(targets, dtype=np.float64)
    one = t.ndim == 1
    if one:
        t = t.reshape(-1, 1)
    d = prep.dim
    if t.shape[0] != d:
        raise DimensionMismatch(f"targets have dimension {t.shape[0]}, basis has {d}")
    proj = prep.q_factor.T @ t  # row k: <target, q_k>
    r = prep.r_factor
    # float64 holds the coefficients exactly (they stay far below 2**53)
    # and avoids an int-to-float copy of the tail on every step
    z = np.zeros((d, t.shape[1]), dtype=np.float64)
    for k in range(d - 1, -1, -1):
        rest = r[k, k + 1 :] @ z[k + 1 :] if k + 1 < d else 0.0
        centers = (proj[k] - rest) / r[k, k]
        z[k] = sample_z_gaussian_batch(sigma / abs(float(r[k, k])), centers, rng)
    out = z.astype(np.int64)
    return out[:, 0] if one else out


def sample_d_lattice(basis, sigma: float, center, rng: RandomSource) -> np.ndarray:
    """A point of the lattice spanned by the basis columns, close to D_{L, sigma, c}.

    The slack precondition sigma >= gs_norm(basis) * slack_factor(dim)
    is the caller's responsibility; only singularity is rejected here.
    """
    if not sigma > 0:
        raise SamplingError(f"sigma must be positive, got {sigma}")
    prep = basis if isinstance(basis, PreparedBasis) else prepare_basis(basis)
    center = np.asarray(center, dtype=np.float64)
    if center.shape != (prep.dim,):
        raise DimensionMismatch(f"center must have shape ({prep.dim},)")
    z = klein_coefficients(prep, float(sigma), center, rng)
    return exact_int_matmul(prep.basis, z)


# ---------------------------------------------------------------------------
# LWE noise and the small random matrices used by encryption
# ---------------------------------------------------------------------------


def sample_psi_bar(alpha: float, q: int, rng: RandomSource, size=None):
    """Rounded-Gaussian noise: round(q * X) mod q, X normal with sd alpha/sqrt(2*pi)."""
    if not 0.0 < alpha < 1.0:
        raise SamplingError(f"alpha must lie in (0, 1), got {alpha}")
    q = int(q)
    x = rng.normal(alpha / _SQRT_2PI, size=size)
    r = np.rint(q * x).astype(np.int64) % q
    return r if size is not None else int(r)


def sample_sign_matrix(m: int, rng: RandomSource) -> np.ndarray:
    """m x m matrix with i.i.d. uniform entries in {-1, +1}."""
    if m < 1:
        raise DimensionMismatch(f"m must be positive, got {m}")
    return rng.integers(0, 2, (m, m)) * 2 - 1


def sample_bounded_matrix(ell: int, m: int, rng: RandomSource) -> np.ndarray:
    """m x m matrix with i.i.d. uniform entries in [-ell, ell]."""
    if ell < 1 or m < 1:
        raise DimensionMismatch(f"need ell, m >= 1, got ell={ell} m={m}")
    return rng.integers(-ell, ell + 1, (m, m))


def sample_uniform_zq(rows: int, cols: int, q: int, rng: RandomSource) -> np.ndarray:
    """rows x cols matrix with i.i.d. uniform residues in [0, q)."""
    return rng.integers(0, int(q), (rows, cols))
