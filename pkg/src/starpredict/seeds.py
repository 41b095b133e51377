"""Deterministic sub-seed derivation.

All randomness in a run flows from one global seed. Named sub-streams are
derived by hashing the seed together with a label path, so adding a new
consumer never perturbs existing streams and results do not depend on
Python's per-process hash salt.
"""

import hashlib

import numpy as np

# Lehmer / MINSTD constants, shared with the kernels.
MINSTD_MOD = 2147483647  # 2**31 - 1


def derive_seed(*parts) -> int:
    """Hash the parts into a stable 63-bit integer."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(str(p).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little") & 0x7FFFFFFFFFFFFFFF


def minstd_state(*parts) -> int:
    """Derive an initial MINSTD state in [1, MINSTD_MOD - 1]."""
    return derive_seed(*parts) % (MINSTD_MOD - 1) + 1


def rng_for(*parts) -> np.random.Generator:
    """NumPy generator for a named sub-stream."""
    return np.random.default_rng(derive_seed(*parts))
