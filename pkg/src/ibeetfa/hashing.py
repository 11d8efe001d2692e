"""Collision-resistant hashes and the canonical ciphertext byte layout.

Both hash families are SHAKE-256 with fixed domain-separation prefixes,
truncated to the requested bit length.  Bit strings are numpy uint8
arrays of 0/1 values; within a byte, bit i is (byte >> i) & 1.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .errors import DimensionMismatch

_PREFIX_H = b"IBEETFA-H"
_PREFIX_HPRIME = b"IBEETFA-Hp"


def bits_to_bytes(bits: np.ndarray) -> bytes:
    """Pack a 0/1 array little-endian within each byte, zero-padded."""
    bits = np.asarray(bits, dtype=np.uint8)
    return np.packbits(bits, bitorder="little").tobytes()


def bytes_to_bits(data: bytes, nbits: int) -> np.ndarray:
    """First nbits of data, little-endian within each byte."""
    arr = np.frombuffer(data, dtype=np.uint8)
    bits = np.unpackbits(arr, bitorder="little")
    if bits.size < nbits:
        raise DimensionMismatch(f"need {nbits} bits, got {bits.size}")
    return bits[:nbits].copy()


def _xof(prefix: bytes, data: bytes, nbits: int) -> np.ndarray:
    digest = hashlib.shake_256(prefix + data).digest((nbits + 7) // 8)
    return bytes_to_bits(digest, nbits)


def hash_h(data: bytes, t: int) -> np.ndarray:
    """t-bit digest used for message fingerprints inside ciphertexts."""
    if t < 1:
        raise DimensionMismatch(f"digest length must be positive, got {t}")
    return _xof(_PREFIX_H, data, t)


def hash_hprime(data: bytes, lam: int) -> np.ndarray:
    """lam-bit digest used for ciphertext integrity tags."""
    if lam < 1:
        raise DimensionMismatch(f"digest length must be positive, got {lam}")
    return _xof(_PREFIX_HPRIME, data, lam)


def canonical_ct_bytes(params, r_tag: np.ndarray, c1, c2, c3, c4) -> bytes:
    """Injective fixed-layout encoding of (R, c1, c2, c3, c4).

    Layout: header (q, n, m, t, ell as 64-bit little-endian), then the
    tag matrix R with entries re-encoded mod q row-major as 64-bit
    little-endian residues, then c1..c4 entries in order.  Total length
    is 8 * (5 + m*m + 2*t + 6*m) bytes.
    """
    m, t, q = params.m, params.t, params.q
    r_tag = np.asarray(r_tag, dtype=np.int64)
    c1 = np.asarray(c1, dtype=np.int64)
    c2 = np.asarray(c2, dtype=np.int64)
    c3 = np.asarray(c3, dtype=np.int64)
    c4 = np.asarray(c4, dtype=np.int64)
    if r_tag.shape != (m, m):
        raise DimensionMismatch(f"tag matrix must be {m} x {m}, got {r_tag.shape}")
    for name, vec, want in (("c1", c1, t), ("c2", c2, t), ("c3", c3, 3 * m), ("c4", c4, 3 * m)):
        if vec.shape != (want,):
            raise DimensionMismatch(f"{name} must have length {want}, got {vec.shape}")
    head = struct.pack("<5Q", q, params.n, m, t, params.ell)
    parts = [head, (r_tag % q).astype("<u8").tobytes()]
    for vec in (c1, c2, c3, c4):
        parts.append((vec % q).astype("<u8").tobytes())
    return b"".join(parts)
