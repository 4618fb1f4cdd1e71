"""Exact linear algebra over GF(2).

Dense binary matrices with the handful of operations needed to build polar
generator matrices, constellation labeling transforms, and the permutations
that glue them together: Kronecker products, GF(2) matrix products,
bit-reversal and stride permutations, and elimination-based inversion.

Matrices are stored as dense uint8 arrays with entries in {0, 1}; sizes stay
in the low thousands, so no packed or sparse representation is needed.
Equality is exact, there is no tolerance concept in this module.
"""

import numpy as np

__all__ = [
    "BitMatrix",
    "kron",
    "mat_mul",
    "vec_mat",
    "bit_reversal",
    "stride_permutation",
    "polar_generator",
    "gf2_inverse",
]


class BitMatrix:
    """Immutable dense matrix over GF(2).

    Entries are uint8 values in {0, 1}; the backing array is marked
    read-only so instances can be shared freely between workers.
    """

    __slots__ = ("_a",)

    def __init__(self, data):
        a = np.array(data, dtype=np.uint8, copy=True)
        if a.ndim != 2:
            raise ValueError(f"BitMatrix needs a 2-D array, got ndim={a.ndim}")
        if a.shape[0] == 0 or a.shape[1] == 0:
            raise ValueError("BitMatrix dimensions must be positive")
        if a.max() > 1:
            raise ValueError("BitMatrix entries must be 0 or 1")
        a.setflags(write=False)
        self._a = a

    @property
    def a(self) -> np.ndarray:
        """Read-only uint8 array of shape (rows, cols)."""
        return self._a

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def shape(self) -> tuple:
        return self._a.shape

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(np.eye(n, dtype=np.uint8))

    def transpose(self) -> "BitMatrix":
        return BitMatrix(self._a.T)

    def is_permutation(self) -> bool:
        """True iff every row and every column contains exactly one 1."""
        return bool(
            np.all(self._a.sum(axis=0) == 1) and np.all(self._a.sum(axis=1) == 1)
        )

    def to_strings(self) -> list:
        """Debug dump: one '0'/'1' string per row (used in golden-file tests)."""
        return ["".join("1" if v else "0" for v in row) for row in self._a]

    def __matmul__(self, other: "BitMatrix") -> "BitMatrix":
        return mat_mul(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self._a.shape == other._a.shape and bool(np.array_equal(self._a, other._a))

    __hash__ = None

    def __repr__(self) -> str:
        return f"BitMatrix({self.rows}x{self.cols})\n" + "\n".join(self.to_strings())


def kron(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    """Kronecker product over GF(2); result has shape (ra*rb, ca*cb)."""
    return BitMatrix(np.kron(a.a, b.a))


def mat_mul(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    """Matrix product over GF(2) (XOR accumulation)."""
    if a.cols != b.rows:
        raise ValueError(f"dimension mismatch: ({a.rows},{a.cols}) x ({b.rows},{b.cols})")
    prod = (a.a.astype(np.int64) @ b.a.astype(np.int64)) & 1
    return BitMatrix(prod.astype(np.uint8))


def vec_mat(v: np.ndarray, m: BitMatrix) -> np.ndarray:
    """Row-vector(s) times matrix over GF(2).

    ``v`` has shape (..., k) with k = m.rows; returns shape (..., m.cols).
    """
    v = np.asarray(v, dtype=np.uint8)
    if v.shape[-1] != m.rows:
        raise ValueError(f"vector length {v.shape[-1]} != matrix rows {m.rows}")
    out = (v.astype(np.int64) @ m.a.astype(np.int64)) & 1
    return out.astype(np.uint8)


def _bitrev(i: int, nbits: int) -> int:
    r = 0
    for _ in range(nbits):
        r = (r << 1) | (i & 1)
        i >>= 1
    return r


def bit_reversal(n: int) -> BitMatrix:
    """Bit-reversal permutation matrix of size n = 2**k.

    Row i has its single 1 in the column whose index is the k-bit reversal
    of i.  The matrix is symmetric and self-inverse.
    """
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"size must be a power of two, got {n}")
    k = n.bit_length() - 1
    a = np.zeros((n, n), dtype=np.uint8)
    for i in range(n):
        a[i, _bitrev(i, k)] = 1
    return BitMatrix(a)


def stride_permutation(k1: int, k2: int) -> BitMatrix:
    """(k1*k2, k1*k2) permutation sending component k2*i + j to position i + k1*j.

    This is the interleaver that splices an order-k1 outer partition with an
    order-k2 inner partition into a single linear labeling.
    """
    if k1 < 1 or k2 < 1:
        raise ValueError("orders must be >= 1")
    n = k1 * k2
    a = np.zeros((n, n), dtype=np.uint8)
    for i in range(k1):
        for j in range(k2):
            a[k2 * i + j, i + k1 * j] = 1
    return BitMatrix(a)


def polar_generator(n_exp: int) -> BitMatrix:
    """Polar generator G_N = B_N * F_N for N = 2**n_exp.

    F_N is the n_exp-fold Kronecker power of [[1,0],[1,1]] and B_N the
    bit-reversal permutation.
    """
    if n_exp < 1:
        raise ValueError("n_exp must be >= 1")
    f2 = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    f = f2
    for _ in range(n_exp - 1):
        f = np.kron(f2, f)
    return mat_mul(bit_reversal(1 << n_exp), BitMatrix(f))


def gf2_inverse(a: BitMatrix) -> BitMatrix:
    """Inverse over GF(2) by Gauss-Jordan elimination.

    Raises ValueError if the matrix is not square or is singular.
    """
    if a.rows != a.cols:
        raise ValueError("only square matrices can be inverted")
    n = a.rows
    work = a.a.copy()
    inv = np.eye(n, dtype=np.uint8)
    for col in range(n):
        pivot_rows = np.nonzero(work[col:, col])[0]
        if pivot_rows.size == 0:
            raise ValueError("matrix is singular over GF(2)")
        p = col + int(pivot_rows[0])
        if p != col:
            work[[col, p]] = work[[p, col]]
            inv[[col, p]] = inv[[p, col]]
        elim = np.nonzero(work[:, col])[0]
        elim = elim[elim != col]
        work[elim] ^= work[col]
        inv[elim] ^= inv[col]
    return BitMatrix(inv)
