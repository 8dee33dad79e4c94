#!/usr/bin/env python3
"""Independent reimplementation used to produce golden.txt.

Each line: m,k,t,K | winners | v | codeword bits | receiver:outcome ...
Winners are listed ascending, which is also the hash order in the codeword.
"""

import itertools
import random
import sys

IRREDUCIBLE = {1: 0x2, 2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x83, 8: 0x11B}


def gf_mul(a, b, m):
    poly = IRREDUCIBLE[m]
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= poly
    return r


def poly_mod(a, mod, m):
    """Remainder of a by monic mod; coefficient lists lowest degree first."""
    a = list(a)
    d = len(mod) - 1
    while len(a) - 1 >= d:
        lead = a[-1]
        if lead:
            shift = len(a) - 1 - d
            for i, c in enumerate(mod):
                a[shift + i] ^= gf_mul(lead, c, m)
        a.pop()
    return a


def irreducible(lower, m):
    """Monic X^k + ... with lower coefficients `lower`, by trial division."""
    k = len(lower)
    f = list(lower) + [1]
    q = 1 << m
    for d in range(1, k // 2 + 1):
        for tail in itertools.product(range(q), repeat=d):
            g = list(tail) + [1]
            if not any(poly_mod(f, g, m)):
                return False
    return True


def find_modulus(m, k):
    q = 1 << m
    for lower in itertools.product(range(q), repeat=k):
        if k > 1 and lower[0] == 0:
            continue
        if irreducible(lower, m):
            return list(lower) + [1]
    raise ValueError("no modulus")


class Ext:
    def __init__(self, m, k):
        self.m, self.k = m, k
        self.mod = find_modulus(m, k)

    def mul(self, a, b):
        prod = [0] * (2 * self.k - 1)
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                prod[i + j] ^= gf_mul(x, y, self.m)
        r = poly_mod(prod, self.mod, self.m)
        return (r + [0] * self.k)[: self.k]

    def add(self, a, b):
        return [x ^ y for x, y in zip(a, b)]


def digits(ident, m, k):
    mask = (1 << m) - 1
    out = []
    while ident:
        out.append([(ident >> (j * m)) & mask for j in range(k)])
        ident >>= k * m
    return out


def hash_id(ext, v, ident):
    m, k = ext.m, ext.k
    mask = (1 << m) - 1
    b = v & mask
    a = (v >> m) & mask
    e_bits = v >> (2 * m)
    e = [(e_bits >> (j * m)) & mask for j in range(k)]
    y = [0] * k
    for d in reversed(digits(ident, m, k)):
        y = ext.add(ext.mul(y, e), d)
    s = 0
    apow = a
    for yj in y:
        s ^= gf_mul(yj, apow, m)
        apow = gf_mul(apow, a, m)
    return s ^ b


def main():
    rng = random.Random(20240501)
    configs = [(2, 1, 0, 1), (2, 2, 1, 1), (2, 2, 1, 3), (2, 3, 2, 2), (3, 2, 1, 2), (4, 2, 1, 2), (4, 3, 1, 4)]
    lines = []
    for m, k, t, K in configs:
        ext = Ext(m, k)
        log2n = k * (1 << (m * t)) * m
        id_bits = min(log2n, 96)
        key_bits = (k + 2) * m
        for _ in range(4):
            ids = set()
            while len(ids) < K + 3:
                ids.add(rng.getrandbits(id_bits))
            ids = list(ids)
            rng.shuffle(ids)
            winners = sorted(ids[:K])
            others = ids[K:]
            v = rng.getrandbits(key_bits)
            betas = [hash_id(ext, v, w) for w in winners]
            bits = format(v, f"0{key_bits}b") + "".join(format(b, f"0{m}b") for b in betas)
            outcomes = []
            for r in winners + others:
                outcomes.append(f"{r}:{'T' if hash_id(ext, v, r) in betas else 'F'}")
            lines.append(
                f"{m},{k},{t},{K} | {','.join(map(str, winners))} | {v} | {bits} | {' '.join(outcomes)}"
            )
    sys.stdout.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
