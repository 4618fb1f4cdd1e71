"""Sequential and parallel binary channel partitions.

A sequential binary partition (SBP) of order k splits a channel with 2^k-ary
input into k ordered binary-input channels ("bit channels"); bit channel i
sees the channel output plus the true values of bits 0..i-1.  Summed over
levels, the bit-channel capacities reproduce I(X;Y) (chain rule), so the
MEAN capacity per level depends only on the channel while the VARIANCE of
the levels depends on the labeling - the variance is the quantity that
polarizes.

A parallel binary partition (PBP) uses the same labeling but drops the
conditioning; its marginal level capacities can only be smaller, which is
the information-theoretic cost of feedback-free (BICM-style) demapping.

Partitions are represented structurally: atoms (a labeling matrix or table
over a channel) and two composition forms,

* product(outer, inner): the inner partition refines independent copies of
  each outer bit channel, giving an order k1*k2 SBP; for linear operands the
  composed labeling is stride_permutation(k1,k2) @ (A_inner kron A_outer);
* odot(pbp, sbp): the inner SBP re-orders the marginal levels of a PBP,
  giving a "degraded" SBP whose capacities no longer sum to I(X;Y); for
  linear operands the composed labeling is A_inner @ A_outer.

Exactness oracle: every bit channel synthesized from erasure channels under
a linear partition is itself an erasure channel, so the whole analysis
reduces to tracking erasure probabilities.  Atoms are evaluated exactly by
enumerating erasure patterns with GF(2) rank tests; compositions recurse
structurally.  Small discrete channels (BSC, BEC) can also be evaluated by
full output enumeration, which doubles as a brute-force oracle for the
erasure recursion.  Everything else is Monte Carlo from demapper LLRs.
"""

from dataclasses import dataclass

import numpy as np

from .channels import (
    Bdmc,
    ModChannel,
    level_capacity_quad,
    mod_transmit,
    msd_level_llr,
    parallel_level_llr,
)
from .gf2 import BitMatrix, gf2_inverse, kron, mat_mul, stride_permutation, vec_mat
from .labeling import LabelTable
from .llr import hard_decision

__all__ = [
    "BitChannelProfile",
    "PartitionSpec",
    "polar_pair",
    "linear_sbp",
    "linear_pbp",
    "mod_sbp",
    "mod_pbp",
    "polar_partition",
    "compose_linear",
    "concat_product",
    "flat_matrix",
    "sbp_capacities",
    "pbp_capacities",
    "profile_mean",
    "profile_variance",
    "predict_concat_variance",
    "bec_erasure_profile",
    "dmc_bit_capacities",
    "mi_from_llr_samples",
    "successive_head_llrs",
]


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BitChannelProfile:
    """Ordered bit-channel capacities, optional error probabilities, method tag."""

    capacities: np.ndarray
    error_probs: np.ndarray | None
    method: str

    def __post_init__(self):
        caps = np.ascontiguousarray(self.capacities, dtype=np.float64)
        if caps.ndim != 1 or caps.size == 0:
            raise ValueError("profile must be a non-empty 1-D capacity list")
        if np.any(caps < -1e-9) or np.any(caps > 1.0 + 1e-9):
            raise ValueError("capacities must lie in [0, 1]")
        caps.setflags(write=False)
        object.__setattr__(self, "capacities", caps)
        if self.error_probs is not None:
            pe = np.ascontiguousarray(self.error_probs, dtype=np.float64)
            if pe.shape != caps.shape:
                raise ValueError("error_probs must match capacities in length")
            pe.setflags(write=False)
            object.__setattr__(self, "error_probs", pe)

    @property
    def order(self) -> int:
        return self.capacities.size

    def to_csv(self) -> str:
        """Fixed-column CSV dump: index, capacity, error_prob, method."""
        lines = ["index,capacity,error_prob,method"]
        for i, c in enumerate(self.capacities):
            pe = "" if self.error_probs is None else repr(float(self.error_probs[i]))
            lines.append(f"{i},{float(c)!r},{pe},{self.method}")
        return "\n".join(lines) + "\n"


def profile_mean(prof: BitChannelProfile) -> float:
    """Arithmetic mean of the bit-channel capacities."""
    return float(np.mean(prof.capacities))


def profile_variance(prof: BitChannelProfile) -> float:
    """Population variance of the bit-channel capacities."""
    return float(np.var(prof.capacities))


def predict_concat_variance(v_outer: float, inner_variances) -> float:
    """Variance of a product concatenation from its parts.

    Equals the outer variance plus the average of the inner variances taken
    around each outer bit channel; exact, not an approximation.
    """
    inner = np.asarray(inner_variances, dtype=np.float64)
    if inner.size == 0:
        raise ValueError("need one inner variance per outer bit channel")
    return float(v_outer + np.mean(inner))


# ---------------------------------------------------------------------------
# Partition specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartitionSpec:
    """An SBP, PBP or degraded SBP, possibly a composition of smaller ones."""

    kind: str  # "sbp" | "pbp" | "degraded-sbp"
    order: int
    matrix: BitMatrix | None = None
    table: LabelTable | None = None
    channel: object | None = None  # Bdmc, tuple[Bdmc, ...] or ModChannel
    op: str = "atom"  # "atom" | "product" | "odot"
    parts: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("sbp", "pbp", "degraded-sbp"):
            raise ValueError(f"unknown partition kind {self.kind!r}")
        if self.op not in ("atom", "product", "odot"):
            raise ValueError(f"unknown composition op {self.op!r}")

    @property
    def is_linear(self) -> bool:
        return self.matrix is not None


def _check_invertible(matrix: BitMatrix) -> BitMatrix:
    gf2_inverse(matrix)  # raises on singular input
    return matrix


def linear_sbp(matrix: BitMatrix, channel=None) -> PartitionSpec:
    """Order-k SBP of k independent binary channels with labeling c = b @ A."""
    if matrix.rows != matrix.cols:
        raise ValueError("labeling matrix must be square")
    return PartitionSpec("sbp", matrix.rows, matrix=_check_invertible(matrix), channel=channel)


def linear_pbp(matrix: BitMatrix, channel=None) -> PartitionSpec:
    """Parallel counterpart of linear_sbp (same labeling, no conditioning)."""
    if matrix.rows != matrix.cols:
        raise ValueError("labeling matrix must be square")
    return PartitionSpec("pbp", matrix.rows, matrix=_check_invertible(matrix), channel=channel)


def polar_pair(channel=None) -> PartitionSpec:
    """The order-2 polar transform: labeling [u0, u1] -> [u0 ^ u1, u1]."""
    return linear_sbp(BitMatrix([[1, 0], [1, 1]]), channel=channel)


def mod_sbp(ch: ModChannel) -> PartitionSpec:
    """SBP of a modulated channel induced by its label table (multistage view)."""
    return PartitionSpec(
        "sbp", ch.order, table=LabelTable(ch.labels, "derived"), channel=ch
    )


def mod_pbp(ch: ModChannel) -> PartitionSpec:
    """PBP of a modulated channel (parallel-demapping view)."""
    return PartitionSpec(
        "pbp", ch.order, table=LabelTable(ch.labels, "derived"), channel=ch
    )


def concat_product(outer: PartitionSpec, inner: PartitionSpec) -> PartitionSpec:
    """Structural product concatenation; works for table-based outers too."""
    if outer.kind != "sbp" or inner.kind != "sbp":
        raise ValueError("product concatenation is defined for SBP (x) SBP")
    matrix = None
    if outer.is_linear and inner.is_linear:
        k1, k2 = outer.order, inner.order
        matrix = mat_mul(stride_permutation(k1, k2), kron(inner.matrix, outer.matrix))
    return PartitionSpec(
        "sbp",
        outer.order * inner.order,
        matrix=matrix,
        channel=outer.channel,
        op="product",
        parts=(outer, inner),
    )


def compose_linear(outer: PartitionSpec, inner: PartitionSpec) -> PartitionSpec:
    """Concatenate two partitions, computing the composed labeling.

    SBP (x) SBP gives the order k1*k2 product SBP with labeling
    stride_permutation @ (A_inner kron A_outer).  PBP (.) SBP (equal orders)
    gives a degraded SBP with labeling A_inner @ A_outer; a table-based PBP
    is relabeled through the inverse of the inner matrix.
    """
    if not inner.is_linear:
        raise ValueError("inner partition must be linear")
    if outer.kind == "sbp":
        if not outer.is_linear:
            raise ValueError("product concatenation of a nonlinear outer: use concat_product")
        return concat_product(outer, inner)
    if outer.kind == "pbp":
        if outer.order != inner.order:
            raise ValueError("odot concatenation needs equal orders")
        matrix = table = None
        if outer.is_linear:
            matrix = mat_mul(inner.matrix, outer.matrix)
        elif outer.table is not None:
            table = outer.table.apply_transform(inner.matrix)
        else:
            raise ValueError("outer PBP carries neither matrix nor table")
        return PartitionSpec(
            "degraded-sbp",
            outer.order,
            matrix=matrix,
            table=table,
            channel=outer.channel,
            op="odot",
            parts=(outer, inner),
        )
    raise ValueError(f"cannot concatenate onto kind {outer.kind!r}")


def polar_partition(n: int, channel=None) -> PartitionSpec:
    """n-fold product of the polar pair transform (order 2^n), as a structure."""
    if n < 1:
        raise ValueError("n must be >= 1")
    spec = polar_pair()
    for _ in range(n - 1):
        spec = concat_product(polar_pair(), spec)
    if channel is None:
        return spec
    return PartitionSpec(
        spec.kind, spec.order, matrix=spec.matrix, channel=channel,
        op=spec.op, parts=spec.parts,
    )


def flat_matrix(spec: PartitionSpec) -> BitMatrix:
    """Flatten a linear composition to its overall labeling matrix."""
    if spec.matrix is None:
        raise ValueError("partition is not linear")
    return spec.matrix


# ---------------------------------------------------------------------------
# Exact erasure-channel analysis
# ---------------------------------------------------------------------------

def _atom_bec_erasures(matrix: BitMatrix, eps: np.ndarray, sequential: bool) -> np.ndarray:
    """Exact per-bit-channel erasure probabilities of a linear atom over BECs.

    Enumerates all 2^k erasure patterns; bit i is recoverable from a pattern
    iff the unit vector e_i lies in the GF(2) span of the surviving labeling
    columns plus (sequential case) the unit vectors of the lower bits.
    """
    k = matrix.rows
    if k > 16:
        raise ValueError("atom enumeration is limited to order <= 16")
    cols = [int("".join(str(b) for b in matrix.a[::-1, j]), 2) for j in range(k)]
    # cols[j]: bit i of the mask set iff matrix[i, j] == 1
    eps = np.broadcast_to(np.asarray(eps, dtype=np.float64), (k,))
    erased_probs = np.zeros(k, dtype=np.float64)

    def reduce(vec, pivots):
        while vec:
            high = vec.bit_length() - 1
            piv = pivots.get(high)
            if piv is None:
                return vec, high
            vec ^= piv
        return 0, -1

    for pattern in range(1 << k):
        prob = 1.0
        for j in range(k):
            prob *= eps[j] if (pattern >> j) & 1 else (1.0 - eps[j])
        if prob == 0.0:
            continue
        pivots = {}
        for j in range(k):
            if not (pattern >> j) & 1:
                vec, high = reduce(cols[j], pivots)
                if vec:
                    pivots[high] = vec
        for i in range(k):
            vec, high = reduce(1 << i, pivots)
            if vec:
                erased_probs[i] += prob
                if sequential:
                    pivots[high] = vec
    return erased_probs


def bec_erasure_profile(spec: PartitionSpec, eps) -> np.ndarray:
    """Exact bit-channel erasure probabilities of a partition over BEC inputs.

    ``eps`` is a scalar (iid inputs) or, for atoms, a per-input array.
    Compositions recurse structurally: every outer bit channel is itself an
    erasure channel, so the inner partition is evaluated on iid copies of it.
    """
    if spec.op == "atom":
        if not spec.is_linear:
            raise ValueError("exact erasure analysis needs a linear partition")
        return _atom_bec_erasures(spec.matrix, eps, sequential=spec.kind != "pbp")
    if spec.op == "product":
        outer, inner = spec.parts
        outer_eps = bec_erasure_profile(outer, eps)
        blocks = [bec_erasure_profile(inner, float(e)) for e in outer_eps]
        return np.concatenate(blocks)
    # odot: marginal erasures of the parallel part feed the inner SBP
    pbp, sbp = spec.parts
    marg = bec_erasure_profile(pbp, eps)
    return bec_erasure_profile(sbp, marg)


def _bec_profile_from_spec(spec: PartitionSpec, parallel: bool) -> BitChannelProfile:
    ch = spec.channel
    if not isinstance(ch, Bdmc) or ch.kind != "bec":
        raise ValueError("exact-bec method needs a BEC channel on the partition")
    query = spec
    if parallel and spec.op == "atom":
        query = PartitionSpec("pbp", spec.order, matrix=spec.matrix)
    erased = bec_erasure_profile(query, ch.param)
    # ties broken toward 0 under uniform inputs: half the erasures are errors
    return BitChannelProfile(1.0 - erased, erased / 2.0, "exact-bec")


# ---------------------------------------------------------------------------
# Exact small-DMC enumeration (brute-force oracle, exact BSC curves)
# ---------------------------------------------------------------------------

def _bdmc_transitions(ch: Bdmc) -> np.ndarray:
    """Transition matrix (2, n_outputs) of a discrete elementary channel."""
    if ch.kind == "bec":
        e = ch.param
        return np.array([[1.0 - e, 0.0, e], [0.0, 1.0 - e, e]])
    if ch.kind == "bsc":
        p = ch.param
        return np.array([[1.0 - p, p], [p, 1.0 - p]])
    raise ValueError("enumeration needs a discrete channel (bec or bsc)")


def _h2_vec(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    inner = (p > 0.0) & (p < 1.0)
    q = p[inner]
    out[inner] = -q * np.log2(q) - (1.0 - q) * np.log2(1.0 - q)
    return out


def dmc_bit_capacities(matrix: BitMatrix, channels, sequential: bool = True) -> np.ndarray:
    """Exact bit-channel capacities of a linear partition of small discrete channels.

    Enumerates the full joint distribution p(b, y); feasible for order <= 8
    with binary/ternary outputs.  ``channels`` is one Bdmc per labeled output
    (or a single Bdmc used for all of them).
    """
    k = matrix.rows
    if isinstance(channels, Bdmc):
        channels = [channels] * k
    if len(channels) != k:
        raise ValueError("need one channel per labeled output")
    trans = [_bdmc_transitions(c) for c in channels]
    n_y = int(np.prod([t.shape[1] for t in trans]))
    if (1 << k) * n_y > 8_000_000:
        raise ValueError("enumeration too large; use the erasure recursion or MC")

    p_yb = np.empty((1 << k, n_y), dtype=np.float64)
    bits = ((np.arange(1 << k)[:, None] >> np.arange(k)) & 1).astype(np.uint8)
    codes = vec_mat(bits, matrix)
    for b in range(1 << k):
        row = np.array([1.0])
        for j in range(k):
            row = np.multiply.outer(row, trans[j][codes[b, j]]).ravel()
        p_yb[b] = row
    p_joint = p_yb / (1 << k)

    caps = np.empty(k, dtype=np.float64)
    b_ints = np.arange(1 << k)
    for i in range(k):
        bit_i = (b_ints >> i) & 1
        if sequential:
            group = b_ints & ((1 << i) - 1)  # decided lower bits
        else:
            group = np.zeros_like(b_ints)
        n_g = int(group.max()) + 1
        q = np.zeros((n_g, 2, n_y))
        np.add.at(q, (group, bit_i), p_joint)
        s = q.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(s > 0, q[:, 0, :] / np.where(s > 0, s, 1.0), 0.0)
        caps[i] = 1.0 - float(np.sum(s * _h2_vec(frac)))
    return caps


# ---------------------------------------------------------------------------
# Monte-Carlo estimation from demapper LLRs
# ---------------------------------------------------------------------------

_LN2 = np.log(2.0)


def mi_from_llr_samples(llrs: np.ndarray, bits: np.ndarray) -> float:
    """Mutual-information estimate E[1 - log2(1 + e^-L)] on bit-0-conditioned LLRs."""
    flipped = (1.0 - 2.0 * np.asarray(bits, dtype=np.float64)) * np.asarray(llrs)
    return float(np.mean(1.0 - np.logaddexp(0.0, -flipped) / _LN2))


def _mc_mod_levels(
    ch: ModChannel,
    conditioned: bool,
    samples: int,
    rng: np.random.Generator,
    chunk: int = 1 << 15,
):
    k = ch.order
    mi_sum = np.zeros(k)
    err = np.zeros(k)
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        labels = rng.integers(0, 2, size=(b, k), dtype=np.uint8)
        y = mod_transmit(ch, labels, rng)
        for i in range(k):
            if conditioned:
                L = msd_level_llr(ch, y, i, labels[:, :i])
            else:
                L = parallel_level_llr(ch, y, i)
            flipped = (1.0 - 2.0 * labels[:, i]) * L
            mi_sum[i] += np.sum(1.0 - np.logaddexp(0.0, -flipped) / _LN2)
            err[i] += np.sum(hard_decision(L) != labels[:, i])
        done += b
    return mi_sum / samples, err / samples


def successive_head_llrs(
    ch: ModChannel, head: BitMatrix, u: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Per-source-bit decision LLRs of a linear head stage behind parallel demapping.

    Source words ``u`` (shape (B, m)) are transformed by ``head``, mapped to
    symbols, transmitted, and demapped level by level WITHOUT feedback; the
    resulting per-component reliabilities are then combined successively with
    the true lower source bits supplied (bit-channel measurement).  The
    combining treats the per-level metrics as independent observations,
    matching feedback-free demapping.
    """
    m = head.rows
    u = np.asarray(u, dtype=np.uint8)
    x = vec_mat(u, head)
    y = mod_transmit(ch, x, rng)
    lx = np.stack([parallel_level_llr(ch, y, j) for j in range(m)], axis=-1)
    # metric of every candidate word under independent per-component LLRs
    cand = ((np.arange(1 << m)[:, None] >> np.arange(m)) & 1).astype(np.uint8)
    cand_x = vec_mat(cand, head)
    signs = 1.0 - 2.0 * cand_x.astype(np.float64)
    metric = 0.5 * (lx @ signs.T)  # (B, 2^m)
    cand_ints = np.arange(1 << m)
    u_ints = (u.astype(np.int64) << np.arange(m)).sum(axis=-1)
    out = np.empty(u.shape, dtype=np.float64)
    from scipy.special import logsumexp

    for i in range(m):
        prefix = u_ints & ((1 << i) - 1)
        same_prefix = (cand_ints[None, :] & ((1 << i) - 1)) == prefix[:, None]
        bit_i = (cand_ints >> i) & 1
        m0 = logsumexp(np.where(same_prefix & (bit_i == 0), metric, -np.inf), axis=-1)
        m1 = logsumexp(np.where(same_prefix & (bit_i == 1), metric, -np.inf), axis=-1)
        out[:, i] = m0 - m1
    return out


def _mc_degraded_head(
    spec: PartitionSpec, samples: int, rng: np.random.Generator, chunk: int = 1 << 15
):
    pbp, sbp = spec.parts
    ch = pbp.channel
    if not isinstance(ch, ModChannel):
        raise ValueError("MC head estimation needs a modulated channel")
    m = spec.order
    mi_sum = np.zeros(m)
    err = np.zeros(m)
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        u = rng.integers(0, 2, size=(b, m), dtype=np.uint8)
        llrs = successive_head_llrs(ch, sbp.matrix, u, rng)
        flipped = (1.0 - 2.0 * u) * llrs
        mi_sum += np.sum(1.0 - np.logaddexp(0.0, -flipped) / _LN2, axis=0)
        err += np.sum(hard_decision(llrs) != u, axis=0)
        done += b
    return mi_sum / samples, err / samples


# ---------------------------------------------------------------------------
# Capacity profile dispatch
# ---------------------------------------------------------------------------

def _resolve_method(spec: PartitionSpec, method: str) -> str:
    if method != "auto":
        return method
    if isinstance(spec.channel, Bdmc) and spec.channel.kind == "bec":
        return "exact-bec"
    if isinstance(spec.channel, ModChannel):
        return "mc"
    raise ValueError("cannot pick a method automatically for this partition")


def sbp_capacities(
    spec: PartitionSpec,
    method: str = "auto",
    samples: int = 100_000,
    rng: np.random.Generator | None = None,
) -> BitChannelProfile:
    """Bit-channel capacities I(B_i; Y | B_0..B_{i-1}) of a sequential partition.

    Methods: 'exact-bec' (erasure recursion, exact), 'enum' (full output
    enumeration of small discrete channels), 'quadrature' (modulated 1-D
    channels), 'mc' (Monte Carlo from demapper LLRs, also the only option
    for nonlinear label tables).
    """
    if spec.kind == "pbp":
        raise ValueError("use pbp_capacities for parallel partitions")
    method = _resolve_method(spec, method)
    if method == "exact-bec":
        return _bec_profile_from_spec(spec, parallel=False)
    if method == "enum":
        caps = dmc_bit_capacities(flat_matrix(spec), spec.channel, sequential=True)
        return BitChannelProfile(caps, None, "enum")
    if method == "quadrature":
        ch = spec.channel
        if not isinstance(ch, ModChannel):
            raise ValueError("quadrature needs a modulated channel")
        caps = [level_capacity_quad(ch, i, conditioned=True) for i in range(spec.order)]
        return BitChannelProfile(np.array(caps), None, "quadrature")
    if method == "mc":
        rng = rng if rng is not None else np.random.default_rng()
        if spec.op == "odot":
            mi, err = _mc_degraded_head(spec, samples, rng)
        else:
            ch = spec.channel
            if not isinstance(ch, ModChannel):
                raise ValueError("MC estimation needs a modulated channel")
            mi, err = _mc_mod_levels(ch, True, samples, rng)
        return BitChannelProfile(np.clip(mi, 0.0, 1.0), err, f"monte-carlo({samples})")
    raise ValueError(f"unsupported method {method!r}")


def pbp_capacities(
    spec: PartitionSpec,
    method: str = "auto",
    samples: int = 100_000,
    rng: np.random.Generator | None = None,
) -> BitChannelProfile:
    """Marginal per-level capacities I(B_i; Y) of a parallel partition."""
    if spec.kind != "pbp":
        raise ValueError("pbp_capacities needs a parallel partition")
    method = _resolve_method(spec, method)
    if method == "exact-bec":
        return _bec_profile_from_spec(spec, parallel=True)
    if method == "enum":
        caps = dmc_bit_capacities(flat_matrix(spec), spec.channel, sequential=False)
        return BitChannelProfile(caps, None, "enum")
    if method == "quadrature":
        ch = spec.channel
        if not isinstance(ch, ModChannel):
            raise ValueError("quadrature needs a modulated channel")
        caps = [level_capacity_quad(ch, i, conditioned=False) for i in range(spec.order)]
        return BitChannelProfile(np.array(caps), None, "quadrature")
    if method == "mc":
        rng = rng if rng is not None else np.random.default_rng()
        ch = spec.channel
        if not isinstance(ch, ModChannel):
            raise ValueError("MC estimation needs a modulated channel")
        mi, err = _mc_mod_levels(ch, False, samples, rng)
        return BitChannelProfile(np.clip(mi, 0.0, 1.0), err, f"monte-carlo({samples})")
    raise ValueError(f"unsupported method {method!r}")
