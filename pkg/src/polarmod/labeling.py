"""Constellation label tables and labeling transforms.

Bit-order convention used throughout: component ``b_0`` is the leftmost
label bit and the lowest bit-channel index, i.e. the leftmost table column
holds the least significant bit of the point index.

Two families of tables are provided for one-dimensional (ASK) axes:

* set-partitioning (SP) labels, identical to natural labels on ASK: row r
  of the table is the binary representation of r, LSB first.  Conditioning
  on each successive bit doubles the minimum distance inside the surviving
  point subsets.
* binary-reflected Gray labels: adjacent points differ in exactly one bit.

The two are related by an invertible banded transform (ones on the diagonal
and the first subdiagonal): sp_table(m) @ sp_to_gray_matrix(m) ==
gray_table(m).  For square QAM the analogous transform is the Kronecker
product of the length-2 polar kernel with that band matrix, and the SP-QAM
table mixes the row index into the column index (row xor column, column).

The band transform can be undone successively from per-component
reliabilities, which is what makes it usable as the head stage of a
successively decoded code; see tm_successive_decode.
"""

from dataclasses import dataclass

import numpy as np

from .gf2 import BitMatrix, gf2_inverse, kron, mat_mul
from .llr import check_reduce, clamp, hard_decision

__all__ = [
    "LabelTable",
    "sp_table",
    "gray_table",
    "sp_to_gray_matrix",
    "qam_sp_to_gray",
    "qam_sp_table",
    "qam_gray_table",
    "tm_level_llr",
    "tm_successive_decode",
]

_POLAR_KERNEL = BitMatrix([[1, 0], [1, 1]])


@dataclass(frozen=True)
class LabelTable:
    """Label table of shape (2**k, k): row r is the label of point index r."""

    table: np.ndarray
    kind: str  # "sp" | "gray" | "derived"

    def __post_init__(self):
        t = np.ascontiguousarray(self.table, dtype=np.uint8)
        if t.ndim != 2 or t.shape[0] != 1 << t.shape[1]:
            raise ValueError(f"label table must have shape (2^k, k), got {t.shape}")
        ints = _label_ints(t)
        if np.unique(ints).size != t.shape[0]:
            raise ValueError("label table rows must exhaust all binary k-tuples")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def order(self) -> int:
        return self.table.shape[1]

    def as_matrix(self) -> BitMatrix:
        return BitMatrix(self.table)

    def apply_transform(self, t: BitMatrix) -> "LabelTable":
        """Relabel points so the new labeling rule composes ``t`` before this one.

        If this table maps label b to point p, the result maps u with
        u @ t == b to the same point, i.e. its rows are table @ inverse(t).
        """
        return LabelTable(mat_mul(self.as_matrix(), gf2_inverse(t)).a, "derived")


def _label_ints(table: np.ndarray) -> np.ndarray:
    """Pack label rows into integers, b_0 least significant."""
    k = table.shape[-1]
    return (table.astype(np.int64) * (1 << np.arange(k, dtype=np.int64))).sum(axis=-1)


def _bits_lsb_first(values: np.ndarray, k: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    return ((values[..., None] >> np.arange(k)) & 1).astype(np.uint8)


def sp_table(m: int) -> LabelTable:
    """Natural / set-partitioning table: row r = binary digits of r, LSB first."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return LabelTable(_bits_lsb_first(np.arange(1 << m), m), "sp")


def gray_table(m: int) -> LabelTable:
    """Binary-reflected Gray table: row r = digits of r ^ (r >> 1), LSB first."""
    if m < 1:
        raise ValueError("m must be >= 1")
    r = np.arange(1 << m)
    return LabelTable(_bits_lsb_first(r ^ (r >> 1), m), "gray")


def sp_to_gray_matrix(m: int) -> BitMatrix:
    """Banded (m, m) transform with ones on the diagonal and first subdiagonal.

    Multiplying an SP table by this matrix yields the binary-reflected Gray
    table of the same order.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    a = np.eye(m, dtype=np.uint8)
    for i in range(1, m):
        a[i, i - 1] = 1
    return BitMatrix(a)


def qam_sp_to_gray(m: int) -> BitMatrix:
    """SP-to-Gray transform for square QAM with m bits per axis: kernel (x) band."""
    return kron(_POLAR_KERNEL, sp_to_gray_matrix(m))


def qam_sp_table(m: int) -> LabelTable:
    """Set-partitioning table for square QAM, m bits per axis (2m bits total).

    Point index r = row * 2**m + col; the label is the concatenation
    [bits(row ^ col), bits(col)], each half LSB first.  The xor mixing makes
    the per-level intra-subset minimum distance grow as in ASK set
    partitioning.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    M = 1 << m
    row, col = np.divmod(np.arange(M * M), M)
    label = np.concatenate(
        [_bits_lsb_first(row ^ col, m), _bits_lsb_first(col, m)], axis=-1
    )
    return LabelTable(label, "sp")


def qam_gray_table(m: int) -> LabelTable:
    """Gray table for square QAM: per-axis binary-reflected Gray on row and column."""
    if m < 1:
        raise ValueError("m must be >= 1")
    M = 1 << m
    row, col = np.divmod(np.arange(M * M), M)
    label = np.concatenate(
        [_bits_lsb_first(row ^ (row >> 1), m), _bits_lsb_first(col ^ (col >> 1), m)],
        axis=-1,
    )
    return LabelTable(label, "gray")


def tm_level_llr(x_llrs: np.ndarray, level: int, known: np.ndarray) -> np.ndarray:
    """Reliability of source bit ``level`` behind the band transform.

    ``x_llrs`` has shape (..., m) holding per-component reliabilities of the
    transformed word x = u @ T (T the band matrix); ``known`` has shape
    (..., level) with the already-decided source bits u_0..u_{level-1}.

    Level 0 is a single check node over all m components (u_0 is the xor of
    the whole word).  Level j >= 1 fuses two independent estimates at a
    variable node: a check over components j..m-1 (their xor is u_j) and the
    direct observation x_{j-1} corrected by u_{j-1}.
    """
    x_llrs = np.asarray(x_llrs, dtype=np.float64)
    m = x_llrs.shape[-1]
    if not 0 <= level < m:
        raise ValueError(f"level {level} out of range for m={m}")
    tail = check_reduce(x_llrs[..., level:], axis=-1)
    if level == 0:
        return tail
    known = np.asarray(known, dtype=np.uint8)
    if known.shape[-1] < level:
        raise ValueError("known bits must cover all lower levels")
    sign = 1.0 - 2.0 * known[..., level - 1]
    return clamp(tail + sign * x_llrs[..., level - 1])


def tm_successive_decode(x_llrs: np.ndarray, genie: np.ndarray | None = None):
    """Successively estimate u from reliabilities of x = u @ T.

    Returns (bits, decision_llrs), both of shape (..., m).  With ``genie``
    given, decisions are forced to the true bits (used when measuring the
    per-level reliabilities seen by an outer code).
    """
    x_llrs = np.asarray(x_llrs, dtype=np.float64)
    m = x_llrs.shape[-1]
    bits = np.zeros(x_llrs.shape, dtype=np.uint8)
    llrs = np.zeros(x_llrs.shape, dtype=np.float64)
    for j in range(m):
        llrs[..., j] = tm_level_llr(x_llrs, j, bits[..., :j])
        if genie is None:
            bits[..., j] = hard_decision(llrs[..., j])
        else:
            bits[..., j] = genie[..., j]
    return bits, llrs
