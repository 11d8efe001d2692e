"""Trapdoor lattices: generation and Gaussian preimage/basis sampling.

Trapdoor generation follows the gadget template: A = [Abar | G - Abar*Rbar]
with Rbar a random sign matrix and G the base-2 gadget.  The short basis
of the q-ary nullspace lattice of A is assembled from the gadget-block
columns [Rbar*S_G; S_G] (S_G the standard gadget basis, determinant q^n)
followed by the completion columns [I - Rbar*D; -D] with D the bit
decomposition of Abar.  Ordering the gadget block first keeps the
Gram-Schmidt norms of the completion block at 1 or below, so the whole
basis has Gram-Schmidt norm within a small constant of sqrt(n log q).

Preimage sampling is the randomized-nearest-plane walk of samplers.py.
For trapdoors carrying the gadget structure, coset representatives come
from the bit decomposition of the target (entries bounded by n*log q),
which keeps every intermediate tiny; otherwise a sparse mod-q solve is
used and the walk handles the large offset through its QR projections.
"""

from __future__ import annotations

import math
import weakref
from collections import OrderedDict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DimensionMismatch, ParameterError, SamplingError, SingularMatrix
from .samplers import (
    PreparedBasis,
    RandomSource,
    klein_coefficients,
    prepare_basis,
    sample_z_gaussian_batch,
    slack_factor,
)
from .zqlinalg import (
    as_residues,
    center_rep,
    check_modulus,
    check_nullspace_basis,
    concat_cols,
    exact_int_matmul,
    gram_schmidt_norm,
    mat_mul,
    solve_mod,
)

#: Multiplier inside the trapdoor Gram-Schmidt bound; calibrated by
#: measurement over many generation runs (see tests), with headroom.
TRAPGEN_GS_CONSTANT = 7.0

#: Declared constant in the operator-norm bound s_R < C * sqrt(m) for
#: square sign matrices (and C * ell * sqrt(m) for their [-ell, ell] sums).
SIGN_OPNORM_CONSTANT = 2.2

#: How many extra preimages sample_basis_left/right draw beyond the
#: dimension, to survive the (vanishingly rare) dependent column.
_BASIS_OVERHEAD = 8


def trapgen_width(n: int, q: int) -> int:
    """Least lattice width m accepted by trap_gen: 6 * n * ceil(log2 q)."""
    return 6 * int(n) * gadget_length(q)


def gadget_length(q: int) -> int:
    """Bits per residue in the base-2 gadget: ceil(log2 q)."""
    return max(2, math.ceil(math.log2(int(q))))


def bound_gs(n: int, q: int) -> float:
    """Declared bound on the Gram-Schmidt norm of generated trapdoors."""
    return TRAPGEN_GS_CONSTANT * math.sqrt(int(n) * gadget_length(q))


@dataclass(frozen=True)
class GadgetAux:
    """Construction data enabling short coset representatives."""

    k: int
    m_bar: int
    r_bar: np.ndarray  # m_bar x n*k, small entries


@dataclass(frozen=True)
class TrapdoorPair:
    """Public matrix with a short basis of its q-ary nullspace lattice."""

    a: np.ndarray        # n x m residues
    s: np.ndarray        # m x m integer basis
    gs_norm: float
    aux: GadgetAux | None = field(default=None, compare=False)


def _gadget_block(q: int, k: int) -> np.ndarray:
    """The k x k basis of the 1-D gadget lattice, determinant +-q."""
    s = np.zeros((k, k), dtype=np.int64)
    for j in range(k - 1):
        s[j, j] = 2
        s[j + 1, j] = -1
    s[:, k - 1] = [(q >> j) & 1 for j in range(k)]
    return s


def _bit_decompose(u: np.ndarray, k: int) -> np.ndarray:
    """Stack the k base-2 digits of every row of u (n x t -> n*k x t)."""
    u = np.asarray(u, dtype=np.int64)
    one = u.ndim == 1
    if one:
        u = u.reshape(-1, 1)
    n, t = u.shape
    out = np.zeros((n * k, t), dtype=np.int64)
    for j in range(k):
        out[j::k] = (u >> j) & 1
    # interleaving above put digit j of row i at position i*k + j
    return out[:, 0] if one else out


def _gadget_matrix(n: int, k: int) -> np.ndarray:
    g = np.zeros((n, n * k), dtype=np.int64)
    for i in range(n):
        g[i, i * k : (i + 1) * k] = 1 << np.arange(k, dtype=np.int64)
    return g


def trap_gen(q: int, n: int, m: int, rng: RandomSource) -> TrapdoorPair:
    """Generate a near-uniform matrix with a short nullspace basis.

    Requires m >= 6 * n * ceil(log2 q); the returned basis S satisfies
    A @ S == 0 (mod q), det S = +-q**n, and gs_norm <= bound_gs(n, q).
    """
    q = check_modulus(q)
    n = int(n)
    m = int(m)
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    k = gadget_length(q)
    if m < trapgen_width(n, q):
        raise ParameterError(
            f"m = {m} violates the width constraint m >= 6*n*ceil(log2 q) = {trapgen_width(n, q)}"
        )
    nk = n * k
    m_bar = m - nk
    a_bar = rng.integers(0, q, (n, m_bar))
    r_bar = rng.integers(0, 2, (m_bar, nk)) * 2 - 1
    g = _gadget_matrix(n, k)
    a_right = (g - mat_mul(a_bar, r_bar, q)) % q
    a = concat_cols([a_bar, a_right])

    s_k = _gadget_block(q, k)
    s_g = np.kron(np.eye(n, dtype=np.int64), s_k)
    d_bits = _bit_decompose(a_bar, k)
    # gadget block first, completion block second (keeps its GS norms <= 1)
    top_left = exact_int_matmul(r_bar, s_g)
    top_right = np.eye(m_bar, dtype=np.int64) - exact_int_matmul(r_bar, d_bits)
    s = np.block([[top_left, top_right], [s_g, -d_bits]])
    gs = gram_schmidt_norm(s)
    return TrapdoorPair(a, s, gs, GadgetAux(k, m_bar, r_bar))


# ---------------------------------------------------------------------------
# Prepared-basis cache and gadget-structure recovery
# ---------------------------------------------------------------------------

# QR factorizations keyed by the identity of the basis array itself; the
# weakref detects a recycled id.  Entries are ~50 MB at full scale, so the
# cache stays small.
_PREP_CACHE: OrderedDict[int, tuple[object, PreparedBasis]] = OrderedDict()
_PREP_CACHE_SIZE = 8
# Gadget-structure lookups keyed by the (public matrix, basis) pair.
_AUX_CACHE: OrderedDict[tuple[int, int], tuple[object, object, GadgetAux | None]] = OrderedDict()
_AUX_CACHE_SIZE = 32


@dataclass(frozen=True)
class _Resolved:
    """A trapdoor ready for sampling: QR data plus optional gadget shortcut."""

    prep: PreparedBasis
    aux: GadgetAux | None


def _prep_of(arr: np.ndarray) -> PreparedBasis:
    key = id(arr)
    hit = _PREP_CACHE.get(key)
    if hit is not None and hit[0]() is arr:
        _PREP_CACHE.move_to_end(key)
        return hit[1]
    prep = prepare_basis(arr)
    register_prepared(arr, prep)
    return prep


def register_prepared(arr: np.ndarray, prep: PreparedBasis) -> None:
    """Make an already-computed factorization available to later calls."""
    _PREP_CACHE[id(arr)] = (weakref.ref(arr), prep)
    while len(_PREP_CACHE) > _PREP_CACHE_SIZE:
        _PREP_CACHE.popitem(last=False)


def _aux_of(a: np.ndarray, t_arr: np.ndarray, q: int) -> GadgetAux | None:
    key = (id(a), id(t_arr))
    hit = _AUX_CACHE.get(key)
    if hit is not None and hit[0]() is a and hit[1]() is t_arr:
        _AUX_CACHE.move_to_end(key)
        return hit[2]
    aux = derive_gadget_aux(np.asarray(a, dtype=np.int64), t_arr, q)
    _AUX_CACHE[key] = (weakref.ref(a), weakref.ref(t_arr), aux)
    while len(_AUX_CACHE) > _AUX_CACHE_SIZE:
        _AUX_CACHE.popitem(last=False)
    return aux


def _fraction_adjugate(mat: np.ndarray) -> tuple[np.ndarray, int]:
    """Adjugate and determinant of a small integer matrix, exactly."""
    k = mat.shape[0]
    frac = [[Fraction(int(x)) for x in row] for row in mat]
    det = Fraction(1)
    inv = [[Fraction(int(i == j)) for j in range(k)] for i in range(k)]
    for col in range(k):
        piv = next((r for r in range(col, k) if frac[r][col] != 0), None)
        if piv is None:
            raise SingularMatrix("gadget block is singular")
        if piv != col:
            frac[col], frac[piv] = frac[piv], frac[col]
            inv[col], inv[piv] = inv[piv], inv[col]
            det = -det
        det *= frac[col][col]
        scale = frac[col][col]
        frac[col] = [x / scale for x in frac[col]]
        inv[col] = [x / scale for x in inv[col]]
        for r in range(k):
            if r != col and frac[r][col] != 0:
                f = frac[r][col]
                frac[r] = [x - f * y for x, y in zip(frac[r], frac[col])]
                inv[r] = [x - f * y for x, y in zip(inv[r], inv[col])]
    det_i = int(det)
    adj = np.array([[int(x * det) for x in row] for row in inv], dtype=np.int64)
    return adj, det_i


def derive_gadget_aux(a: np.ndarray, s: np.ndarray, q: int) -> GadgetAux | None:
    """Recover the gadget shortcut from (A, S) when S has our block layout."""
    n, m = a.shape
    k = gadget_length(q)
    nk = n * k
    m_bar = m - nk
    if m_bar < 1 or s.shape != (m, m):
        return None
    s_k = _gadget_block(q, k)
    if not np.array_equal(s[m_bar:, :nk], np.kron(np.eye(n, dtype=np.int64), s_k)):
        return None
    adj, det = _fraction_adjugate(s_k)
    top = s[:m_bar, :nk]
    r_bar = np.zeros((m_bar, nk), dtype=np.int64)
    for i in range(n):
        prod = exact_int_matmul(top[:, i * k : (i + 1) * k], adj)
        if np.any(prod % det):
            return None
        r_bar[:, i * k : (i + 1) * k] = prod // det
    if np.abs(r_bar).max(initial=0) > (1 << 20):
        return None
    # definitive check: A @ [r_bar; I] must equal the gadget matrix mod q
    w = np.vstack([r_bar, np.eye(nk, dtype=np.int64)])
    if not np.array_equal(mat_mul(a, w, q), _gadget_matrix(n, k) % q):
        return None
    return GadgetAux(k, m_bar, r_bar)


def _resolve_trapdoor(a: np.ndarray, t, q: int) -> _Resolved:
    """Normalize any accepted trapdoor form into prepared QR data + aux."""
    if isinstance(t, _Resolved):
        return t
    if isinstance(t, PreparedBasis):
        return _Resolved(t, None)
    if isinstance(t, TrapdoorPair):
        return _Resolved(_prep_of(t.s), t.aux)
    t_arr = np.asarray(t, dtype=np.int64)
    return _Resolved(_prep_of(t_arr), _aux_of(a, t_arr, q))


# ---------------------------------------------------------------------------
# Preimage sampling
# ---------------------------------------------------------------------------


def _check_sigma(sigma: float, prep: PreparedBasis, total_dim: int, enforce: bool):
    if not sigma > 0:
        raise SamplingError(f"sigma must be positive, got {sigma}")
    if enforce and sigma < prep.gs_norm * slack_factor(total_dim):
        raise SamplingError(
            f"sigma = {sigma:.6g} is below the sampling threshold "
            f"{prep.gs_norm * slack_factor(total_dim):.6g} "
            f"(basis GS norm {prep.gs_norm:.6g} times slack {slack_factor(total_dim)})"
        )


def _coset_representatives(a: np.ndarray, res: _Resolved, targets: np.ndarray, q: int) -> np.ndarray:
    """Integer c with A @ c == targets (mod q), kept short when possible."""
    if res.aux is not None:
        d_bits = _bit_decompose(targets % q, res.aux.k)
        top = exact_int_matmul(res.aux.r_bar, d_bits)
        return np.vstack([top, d_bits]) if targets.ndim == 2 else np.concatenate([top, d_bits])
    return center_rep(solve_mod(a, targets, q), q)


def _preimage_batch(
    a: np.ndarray,
    res: _Resolved,
    targets: np.ndarray,
    q: int,
    sigma: float,
    rng: RandomSource,
) -> np.ndarray:
    from .samplers import TAIL_CUT

    prep = res.prep
    c = _coset_representatives(a, res, targets, q)
    z = klein_coefficients(prep, sigma, c.astype(np.float64), rng)
    e = c - exact_int_matmul(prep.basis, z)
    # The walk leaves at most 1/2 + TAIL_CUT*sigma/gs_j per orthogonalized
    # direction, so anything far beyond this bound means numerical corruption.
    cap = 2.0 * math.sqrt(prep.dim) * (0.5 * prep.gs_norm + TAIL_CUT * sigma)
    if int(np.abs(e).max(initial=0)) > cap:
        raise SamplingError("preimage walk produced an implausibly long vector")
    return e


def _spot_check_columns(f: np.ndarray, e: np.ndarray, u: np.ndarray, q: int, limit: int = 48) -> bool:
    """Congruence check on an evenly spaced column subset (all, if few)."""
    cols = u.shape[1]
    if cols <= limit:
        return bool(np.array_equal(mat_mul(f, e, q), u))
    idx = np.linspace(0, cols - 1, limit).astype(np.int64)
    sub = mat_mul(f, np.ascontiguousarray(e[:, idx]), q)
    return bool(np.array_equal(sub, u[:, idx]))


def sample_pre(a, t, u, q: int, sigma: float, rng: RandomSource, *, enforce_sigma: bool = True) -> np.ndarray:
    """Gaussian preimage e with A @ e == u (mod q), sampled with trapdoor t.

    ``u`` may be a vector or an n x t matrix (one preimage per column).
    With ``enforce_sigma=False`` the quality precondition on sigma is
    skipped: the walk still terminates and the congruence still holds,
    but the output is only nearest-plane-short rather than Gaussian.
    """
    q = check_modulus(q)
    a = as_residues(a, q)
    u = as_residues(u, q)
    res = _resolve_trapdoor(a, t, q)
    if a.ndim != 2 or a.shape[1] != res.prep.dim:
        raise DimensionMismatch(f"matrix {a.shape} does not match basis dimension {res.prep.dim}")
    _check_sigma(sigma, res.prep, res.prep.dim, enforce_sigma)
    e = _preimage_batch(a, res, u, q, sigma, rng)
    if np.any(mat_mul(a, e, q) != u):
        raise SamplingError("preimage congruence self-check failed")
    return e


def sample_left(a, m_block, t_a, u, q: int, sigma: float, rng: RandomSource, *, enforce_sigma: bool = True) -> np.ndarray:
    """Preimage E of U for the concatenation (A | M), using a trapdoor for A.

    The M-side coordinates are drawn independently Gaussian, then the
    A-side is completed by trapdoor preimage sampling of the residual
    target; columns of the result satisfy (A|M) @ E == U (mod q).
    """
    q = check_modulus(q)
    a = as_residues(a, q)
    m_block = as_residues(m_block, q)
    u = as_residues(u, q)
    if a.ndim != 2 or m_block.ndim != 2 or a.shape[0] != m_block.shape[0]:
        raise DimensionMismatch(
            f"blocks must share a row count, got {a.shape} and {m_block.shape}"
        )
    u_mat = u if u.ndim == 2 else u.reshape(-1, 1)
    if u_mat.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"target has {u_mat.shape[0]} rows, expected {a.shape[0]}")
    res = _resolve_trapdoor(a, t_a, q)
    total = a.shape[1] + m_block.shape[1]
    _check_sigma(sigma, res.prep, total, enforce_sigma)
    n_cols = u_mat.shape[1]
    e_m = sample_z_gaussian_batch(
        sigma, np.zeros(m_block.shape[1] * n_cols), rng
    ).reshape(m_block.shape[1], n_cols)
    residual = (u_mat - mat_mul(m_block, e_m, q)) % q
    e_a = _preimage_batch(a, res, residual, q, sigma, rng)
    e = np.vstack([e_a, e_m])
    f1 = concat_cols([a, m_block])
    if not _spot_check_columns(f1, e, u_mat, q):
        raise SamplingError("sample_left congruence self-check failed")
    return e[:, 0] if u.ndim == 1 else e


def operator_norm(r, iters: int = 50) -> float:
    """Spectral norm estimate by power iteration with a fixed start."""
    rf = np.asarray(r, dtype=np.float64)
    probe = RandomSource(0x5EED)  # fixed internal seed keeps the estimate deterministic
    v = probe.normal(1.0, rf.shape[1])
    nrm = np.linalg.norm(v)
    if nrm == 0 or rf.size == 0:
        return 0.0
    v /= nrm
    for _ in range(iters):
        v = rf.T @ (rf @ v)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            return 0.0
        v /= nrm
    return float(np.linalg.norm(rf @ v))


def sample_right(a, b, r, t_b, u, q: int, sigma: float, rng: RandomSource, *, enforce_sigma: bool = True) -> np.ndarray:
    """Preimage E of U for F2 = (A | A@R + B), using a trapdoor for B.

    Internally samples a preimage (f1, f2) for (B | A) and returns
    [f2 - R @ f1; f1], which satisfies F2 @ E == U (mod q).
    """
    q = check_modulus(q)
    a = as_residues(a, q)
    b = as_residues(b, q)
    r = np.asarray(r, dtype=np.int64)
    u = as_residues(u, q)
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"A and B must share rows, got {a.shape} and {b.shape}")
    if r.shape != (a.shape[1], b.shape[1]):
        raise DimensionMismatch(
            f"R must be {a.shape[1]} x {b.shape[1]}, got {r.shape}"
        )
    res = _resolve_trapdoor(b, t_b, q)
    if enforce_sigma:
        s_r = operator_norm(r)
        if sigma < res.prep.gs_norm * s_r * slack_factor(b.shape[1]):
            raise SamplingError(
                f"sigma = {sigma:.6g} is below the sample_right threshold "
                f"{res.prep.gs_norm * s_r * slack_factor(b.shape[1]):.6g}"
            )
    swapped = sample_left(b, a, res, u, q, sigma, rng, enforce_sigma=False)
    one = swapped.ndim == 1
    sw = swapped.reshape(-1, 1) if one else swapped
    m_b = b.shape[1]
    f1, f2 = sw[:m_b], sw[m_b:]
    e = np.vstack([f2 - exact_int_matmul(r, f1), f1])
    f_mat = concat_cols([a, (mat_mul(a, r, q) + b) % q])
    u_mat = u if u.ndim == 2 else u.reshape(-1, 1)
    if not _spot_check_columns(f_mat, e, u_mat, q):
        raise SamplingError("sample_right congruence self-check failed")
    return e[:, 0] if one else e


def _full_rank_subset(vectors: np.ndarray, dim: int) -> np.ndarray | None:
    """Greedy selection of dim independent columns, exact mod-p ranks."""
    from .zqlinalg import _rank_mod_p  # rare fallback path

    p = 33554393
    chosen: list[int] = []
    for j in range(vectors.shape[1]):
        cand = chosen + [j]
        sub = np.ascontiguousarray(vectors[:, cand])
        if _rank_mod_p(sub, p) == len(cand):
            chosen.append(j)
            if len(chosen) == dim:
                return vectors[:, chosen]
    return None


def _basis_from_preimages(sampler, dim: int, q: int, retries: int = 4) -> np.ndarray:
    """Assemble a nonsingular basis from Gaussian preimages of zero.

    The QR run doubles as the nonsingularity certificate and is cached so
    that downstream sampling against the returned basis reuses it.
    """
    for _ in range(retries):
        batch = sampler(dim + _BASIS_OVERHEAD)
        cand = np.ascontiguousarray(batch[:, :dim])
        try:
            register_prepared(cand, prepare_basis(cand))
            return cand
        except SingularMatrix:
            pass
        subset = _full_rank_subset(batch, dim)
        if subset is not None:
            subset = np.ascontiguousarray(subset)
            register_prepared(subset, prepare_basis(subset))
            return subset
    raise SamplingError("could not assemble a full-rank basis from preimages")


def sample_basis_left(a, m_block, t_a, q: int, sigma: float, rng: RandomSource, *, enforce_sigma: bool = True) -> np.ndarray:
    """Short basis of the nullspace lattice of (A | M) from a trapdoor for A."""
    q = check_modulus(q)
    a = as_residues(a, q)
    m_block = as_residues(m_block, q)
    dim = a.shape[1] + m_block.shape[1]
    zero = np.zeros((a.shape[0], 1), dtype=np.int64)

    def sampler(count):
        return sample_left(
            a, m_block, t_a, np.repeat(zero, count, axis=1), q, sigma, rng,
            enforce_sigma=enforce_sigma,
        )

    basis = _basis_from_preimages(sampler, dim, q)
    f1 = concat_cols([a, m_block])
    if np.any(mat_mul(f1, basis, q)):
        raise SamplingError("basis columns left the nullspace lattice")
    return basis


def sample_basis_right(a, b, r, t_b, q: int, sigma: float, rng: RandomSource, *, enforce_sigma: bool = True) -> np.ndarray:
    """Short basis of the nullspace lattice of (A | A@R + B) from a trapdoor for B."""
    q = check_modulus(q)
    a = as_residues(a, q)
    b = as_residues(b, q)
    dim = a.shape[1] + b.shape[1]
    zero = np.zeros((a.shape[0], 1), dtype=np.int64)

    def sampler(count):
        return sample_right(
            a, b, r, t_b, np.repeat(zero, count, axis=1), q, sigma, rng,
            enforce_sigma=enforce_sigma,
        )

    basis = _basis_from_preimages(sampler, dim, q)
    f2 = concat_cols([a, (mat_mul(a, r, q) + b) % q])
    if np.any(mat_mul(f2, basis, q)):
        raise SamplingError("basis columns left the nullspace lattice")
    return basis


def verify_trapdoor(pair: TrapdoorPair, q: int) -> bool:
    """Full invariant check: nullspace membership plus rational rank."""
    return check_nullspace_basis(pair.a, pair.s, q)
