"""Counter-based deterministic random streams.

Every random draw in the library is a pure function of integer keys
(root seed, stream tag, epoch, cell/beam index, slot, ...).  Draws are
therefore independent of execution order, chunk boundaries, and worker
count, which is what makes full runs bit-reproducible.

The generator chains the splitmix64 finalizer over the keys and maps the
resulting 64-bit word to the open unit interval; normal variates come from
the inverse normal CDF.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_MASK = 0xFFFFFFFFFFFFFFFF

# Stream tags. Folding a distinct tag into each class of draw keeps the
# streams non-overlapping even when the remaining keys coincide.
PREDICT = 0x11
BIRTH_POS = 0x21
BIRTH_VEL = 0x22
RESAMPLE = 0x31
BEAMS = 0x41
SENSING = 0x42
EGO = 0x51


def _mix_scalar(h: np.uint64) -> np.uint64:
    """splitmix64 finalizer (full 64-bit avalanche)."""
    with np.errstate(over="ignore"):
        h = (h ^ (h >> _S30)) * _MUL1
        h = (h ^ (h >> _S27)) * _MUL2
        return h ^ (h >> _S31)


def _mix_owned(h: np.ndarray) -> np.ndarray:
    """In-place splitmix64 finalizer on a buffer the caller owns."""
    with np.errstate(over="ignore"):
        tmp = h >> _S30
        h ^= tmp
        h *= _MUL1
        np.right_shift(h, _S27, out=tmp)
        h ^= tmp
        h *= _MUL2
        np.right_shift(h, _S31, out=tmp)
        h ^= tmp
    return h


def fold(*keys):
    """Combine integer keys (scalars or arrays, numpy-broadcast) into one
    64-bit key.  Pass array keys last; scalar prefixes are mixed once."""
    h = _GAMMA
    with np.errstate(over="ignore"):
        for key in keys:
            if isinstance(key, np.ndarray):
                k = np.asarray(key, dtype=np.uint64)
                if isinstance(h, np.ndarray):
                    h += _GAMMA
                    h ^= k
                    h = _mix_owned(h)
                else:
                    h = _mix_owned((h + _GAMMA) ^ k)
            else:
                k = np.uint64(int(key) & _MASK)
                if isinstance(h, np.ndarray):
                    h += _GAMMA
                    h ^= k
                    h = _mix_owned(h)
                else:
                    h = _mix_scalar((h + _GAMMA) ^ k)
    return h


def uniform(*keys):
    """U(0,1) draw(s) for the given keys, strictly inside the open interval."""
    h = fold(*keys)
    if isinstance(h, np.ndarray):
        h >>= _S11
        u = h.astype(np.float64)
        u += 0.5
        u *= 2.0**-53
        return u
    return (float(h >> _S11) + 0.5) * 2.0**-53


def normal(*keys):
    """Standard normal draw(s) via the inverse CDF of ``uniform``."""
    return ndtri(uniform(*keys))
