"""numba kernels for the counter-based generator and ER adjacency sampling.

The mixing function must stay bit-identical to ``rng.mix64``; tests compare
the two on random inputs.
"""

import numba as nb
import numpy as np

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True)
def mix64_array(z):
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        out[i] = _mix(z[i])
    return out


@nb.njit(cache=True)
def er_bits(n, key, gamma, r):
    """Packed symmetric adjacency of G(n, r) and its degree vector.

    Pair (a, b) with a < b draws counter a*n + b, so both rows see the same
    Bernoulli outcome without a second pass.
    """
    nbytes = (n + 7) // 8
    bits = np.zeros((n, nbytes), dtype=np.uint8)
    deg = np.zeros(n, dtype=np.int64)
    nn = np.uint64(n)
    for v in range(n):
        uv = np.uint64(v)
        count = 0
        for b in range(nbytes):
            acc = 0
            for k in range(8):
                u = 8 * b + k
                if u >= n or u == v:
                    continue
                uu = np.uint64(u)
                c = uu * nn + uv if uu < uv else uv * nn + uu
                z = _mix(key + (c + _ONE) * gamma)
                hit = (np.float64(z >> _S11) + 0.5) * _INV53 < r
                acc |= np.int64(hit) << (7 - k)
                count += np.int64(hit)
            bits[v, b] = np.uint8(acc)
        deg[v] = count
    return bits, deg
