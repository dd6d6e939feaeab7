"""2-universal hashing over GF(2): random matrix plus offset.

For fixed distinct inputs the collision probability over the draw is
exactly 2^-R.  Buckets (preimage fibers) are enumerated by solving the
affine system M b = v xor offset with Gaussian elimination, so decoding
never scans the full index space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> i) & 1 for i in range(width)], dtype=np.uint8)


def _from_bits(bits: np.ndarray) -> int:
    return int(sum(int(b) << i for i, b in enumerate(bits)))


@dataclass(frozen=True)
class HashScheme:
    input_bits: int
    output_bits: int
    matrix: np.ndarray  # (output_bits, input_bits) over GF(2)
    offset: np.ndarray  # (output_bits,)

    def apply(self, index: int) -> int:
        if self.output_bits == 0:
            return 0
        b = _bits(index, self.input_bits)
        return _from_bits((self.matrix @ b + self.offset) % 2)

    def apply_many(self, indices: np.ndarray) -> np.ndarray:
        if self.output_bits == 0:
            return np.zeros(len(indices), dtype=np.int64)
        bits = ((indices[:, None] >> np.arange(self.input_bits)[None, :]) & 1).astype(np.uint8)
        vals = (bits @ self.matrix.T + self.offset[None, :]) % 2
        return (vals.astype(np.int64) << np.arange(self.output_bits)[None, :]).sum(axis=1)

    def preimages(self, value: int, limit: int | None = None, cap: int = 1 << 16) -> list[int]:
        """All inputs hashing to ``value`` (within [0, 2^input_bits))."""
        n, r = self.input_bits, self.output_bits
        if r == 0:
            if 2**n > cap:
                raise ValueError("preimage fiber too large to enumerate")
            out = list(range(min(2**n, limit or 2**n)))
            return out
        rhs = (_bits(value, r) + self.offset) % 2
        aug = np.concatenate([self.matrix.copy(), rhs[:, None]], axis=1).astype(np.uint8)
        pivots = []
        row = 0
        for col in range(n):
            sel = None
            for rr in range(row, r):
                if aug[rr, col]:
                    sel = rr
                    break
            if sel is None:
                continue
            aug[[row, sel]] = aug[[sel, row]]
            for rr in range(r):
                if rr != row and aug[rr, col]:
                    aug[rr] = (aug[rr] + aug[row]) % 2
            pivots.append(col)
            row += 1
            if row == r:
                break
        for rr in range(row, r):
            if aug[rr, -1]:
                return []  # inconsistent: empty fiber
        free_cols = [c for c in range(n) if c not in pivots]
        if 2 ** len(free_cols) > cap:
            raise ValueError("preimage fiber too large to enumerate")
        base = np.zeros(n, dtype=np.uint8)
        for i, col in enumerate(pivots):
            base[col] = aug[i, -1]
        null_basis = []
        for fc in free_cols:
            vec = np.zeros(n, dtype=np.uint8)
            vec[fc] = 1
            for i, col in enumerate(pivots):
                vec[col] = aug[i, fc]
            null_basis.append(vec)
        out = []
        for mask in range(2 ** len(free_cols)):
            vec = base.copy()
            for i, nb in enumerate(null_basis):
                if mask >> i & 1:
                    vec = (vec + nb) % 2
            out.append(_from_bits(vec))
            if limit is not None and len(out) >= limit:
                break
        return sorted(out)


def draw_hash(input_bits: int, output_bits: int, rng: np.random.Generator) -> HashScheme:
    matrix = rng.integers(0, 2, size=(output_bits, input_bits), dtype=np.uint8)
    offset = rng.integers(0, 2, size=output_bits, dtype=np.uint8)
    return HashScheme(input_bits, output_bits, matrix, offset)


def identity_hash(input_bits: int) -> HashScheme:
    """Raw index transmission as a degenerate hash (singleton fibers)."""
    return HashScheme(
        input_bits,
        input_bits,
        np.eye(input_bits, dtype=np.uint8),
        np.zeros(input_bits, dtype=np.uint8),
    )
