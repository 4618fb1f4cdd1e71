"""Memoryless channel models and soft demappers.

Covers the elementary binary-input channels (erasure, symmetric-flip,
binary-input AWGN) and the 2^k-ary modulated AWGN channel built from a
normalized constellation plus a label table.

Conventions, fixed here and relied on everywhere else:

* unit average symbol energy; SNR enters as Es/N0 with noise variance
  N0/2 per real dimension;
* ASK points lie on the symmetric grid (M-1-2i) before normalization and
  are ordered so that point index 0 carries the largest positive amplitude
  (for a 2-point constellation the bit-0 point is +1, so the single-level
  LLR reduces to the familiar 2y/sigma^2);
* square QAM is the Cartesian product of two ASK axes with the label being
  the concatenation (row bits, column bits);
* LLRs are exact sum-exp marginalizations in the log domain, clamped at
  +/-LLR_CLAMP; positive favors bit 0.

Demapping comes in two flavors: multistage (conditioned on already decided
lower label bits) and parallel (marginal per level, no feedback).  The
parallel version can only lose mutual information relative to the
multistage one.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .llr import LLR_CLAMP, clamp

__all__ = [
    "Bdmc",
    "bec",
    "bsc",
    "biawgn",
    "bdmc_capacity",
    "bdmc_sample_llr",
    "Constellation",
    "ask",
    "square_qam",
    "ModChannel",
    "noise_variance_from_esn0_db",
    "mod_transmit",
    "map_labels",
    "msd_level_llr",
    "parallel_level_llr",
    "cm_capacity",
    "level_capacity_quad",
    "dump_tables",
]

_LN2 = np.log(2.0)


# ---------------------------------------------------------------------------
# Elementary binary-input channels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Bdmc:
    """Binary-input memoryless channel: 'bec', 'bsc' or 'biawgn' + parameter."""

    kind: str
    param: float

    def __post_init__(self):
        if self.kind == "bec":
            if not 0.0 <= self.param <= 1.0:
                raise ValueError("erasure probability must be in [0, 1]")
        elif self.kind == "bsc":
            if not 0.0 <= self.param <= 0.5:
                raise ValueError("crossover probability must be in [0, 1/2]")
        elif self.kind == "biawgn":
            if not self.param > 0.0:
                raise ValueError("noise standard deviation must be positive")
        else:
            raise ValueError(f"unknown channel kind {self.kind!r}")


def bec(eps: float) -> Bdmc:
    return Bdmc("bec", float(eps))


def bsc(p: float) -> Bdmc:
    return Bdmc("bsc", float(p))


def biawgn(sigma: float) -> Bdmc:
    return Bdmc("biawgn", float(sigma))


def _h2(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p))


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(96)


def gaussian_llr_capacity(mean) -> np.ndarray:
    """Capacity of a symmetric Gaussian-LLR channel, L ~ N(mu, 2*mu).

    Evaluates 1 - E[log2(1 + exp(-L))] by Gauss-Hermite quadrature.
    Accepts scalars or arrays; mu = 0 gives 0, mu = inf gives 1.
    """
    mu = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    out = np.zeros_like(mu)
    finite = np.isfinite(mu) & (mu > 0)
    out[np.isinf(mu)] = 1.0
    if np.any(finite):
        m = mu[finite][:, None]
        samples = m + 2.0 * np.sqrt(m) * _GH_NODES[None, :]
        f = np.logaddexp(0.0, -samples) / _LN2
        out[finite] = 1.0 - (f @ _GH_WEIGHTS) / np.sqrt(np.pi)
    return out if np.ndim(mean) else float(out[0])


def bdmc_capacity(ch: Bdmc) -> float:
    """Symmetric capacity in bits: closed form for BEC/BSC, quadrature for AWGN."""
    if ch.kind == "bec":
        return 1.0 - ch.param
    if ch.kind == "bsc":
        return 1.0 - _h2(ch.param)
    # biawgn: LLR of y = +/-1 + n is 2y/sigma^2, Gaussian with mean 2/sigma^2
    return float(gaussian_llr_capacity(2.0 / ch.param**2))


def bdmc_sample_llr(ch: Bdmc, bits, rng: np.random.Generator) -> np.ndarray:
    """One channel use per input bit; returns the exact LLR of each observation.

    BEC and BSC outputs saturate at +/-LLR_CLAMP (standing in for certainty);
    the AWGN LLR 2y/sigma^2 is returned unclamped so its sample mean matches
    (1-2b) * 2/sigma^2.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    sign = 1.0 - 2.0 * bits.astype(np.float64)
    if ch.kind == "bec":
        erased = rng.random(bits.shape) < ch.param
        return np.where(erased, 0.0, sign * LLR_CLAMP)
    if ch.kind == "bsc":
        p = ch.param
        flip = rng.random(bits.shape) < p
        mag = LLR_CLAMP if p == 0.0 else min(np.log((1.0 - p) / p) if p < 0.5 else 0.0, LLR_CLAMP)
        obs_sign = sign * np.where(flip, -1.0, 1.0)
        return obs_sign * mag
    y = sign + ch.param * rng.standard_normal(bits.shape)
    return 2.0 * y / ch.param**2


# ---------------------------------------------------------------------------
# Constellations and the modulated AWGN channel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constellation:
    """2^k distinct points with unit average energy; shape (2^k, d), d in {1, 2}."""

    kind: str
    points: np.ndarray
    bits_per_symbol: int

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] != 1 << self.bits_per_symbol:
            raise ValueError("points must have shape (2^k, d)")
        if len(np.unique(pts.round(12), axis=0)) != pts.shape[0]:
            raise ValueError("constellation points must be pairwise distinct")
        energy = float(np.mean(np.sum(pts * pts, axis=1)))
        if abs(energy - 1.0) > 1e-12:
            raise ValueError(f"average symbol energy must be 1, got {energy}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dims(self) -> int:
        return self.points.shape[1]


def _ask_axis(m: int) -> np.ndarray:
    M = 1 << m
    raw = (M - 1.0) - 2.0 * np.arange(M)
    return raw


def ask(m: int) -> Constellation:
    """2^m-ASK: equally spaced symmetric grid, normalized to unit energy."""
    if m < 1:
        raise ValueError("m must be >= 1")
    raw = _ask_axis(m)
    pts = (raw / np.sqrt(np.mean(raw**2)))[:, None]
    return Constellation("ask", pts, m)


def square_qam(bits: int) -> Constellation:
    """Square QAM with an even number of label bits (bits/2 per axis).

    Point index r = row * M + col with M points per axis; coordinates are
    (axis[row], axis[col]).
    """
    if bits < 2 or bits % 2:
        raise ValueError("square QAM needs an even number of bits >= 2")
    m = bits // 2
    raw = _ask_axis(m)
    row, col = np.divmod(np.arange(1 << bits), 1 << m)
    pts = np.stack([raw[row], raw[col]], axis=1)
    pts /= np.sqrt(np.mean(np.sum(pts * pts, axis=1)))
    return Constellation("square_qam", pts, bits)


def noise_variance_from_esn0_db(esn0_db: float) -> float:
    """Noise variance per real dimension for unit-energy symbols: N0/2."""
    n0 = 10.0 ** (-esn0_db / 10.0)
    return n0 / 2.0


@dataclass(frozen=True)
class ModChannel:
    """Modulated AWGN channel: constellation + bijective label table + noise.

    ``labels`` has one row per constellation point (the point's label,
    b_0 in column 0); ``noise_variance`` is per real dimension and may be 0
    for noiseless transforms.
    """

    constellation: Constellation
    labels: np.ndarray
    noise_variance: float

    def __post_init__(self):
        lab = np.ascontiguousarray(self.labels, dtype=np.uint8)
        k = self.constellation.bits_per_symbol
        if lab.shape != (1 << k, k):
            raise ValueError(f"labels must have shape ({1 << k}, {k})")
        ints = (lab.astype(np.int64) << np.arange(k, dtype=np.int64)).sum(axis=1)
        if np.unique(ints).size != 1 << k:
            raise ValueError("labels must be a bijection on k-tuples")
        if self.noise_variance < 0.0:
            raise ValueError("noise variance must be >= 0")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        inv = np.empty(1 << k, dtype=np.int64)
        inv[ints] = np.arange(1 << k)
        inv.setflags(write=False)
        object.__setattr__(self, "_label_to_point", inv)

    @property
    def order(self) -> int:
        return self.constellation.bits_per_symbol


def map_labels(ch: ModChannel, label_bits: np.ndarray) -> np.ndarray:
    """Label k-tuples (..., k) -> constellation point indices (...,)."""
    label_bits = np.asarray(label_bits, dtype=np.int64)
    k = ch.order
    if label_bits.shape[-1] != k:
        raise ValueError(f"label length {label_bits.shape[-1]} != {k}")
    ints = (label_bits << np.arange(k, dtype=np.int64)).sum(axis=-1)
    return ch._label_to_point[ints]


def mod_transmit(ch: ModChannel, label_bits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Map labels to points and add white Gaussian noise per real dimension."""
    idx = map_labels(ch, label_bits)
    pts = ch.constellation.points[idx]
    if ch.noise_variance == 0.0:
        return pts.copy()
    return pts + np.sqrt(ch.noise_variance) * rng.standard_normal(pts.shape)


def _point_loglik(ch: ModChannel, y: np.ndarray) -> np.ndarray:
    """Unnormalized log p(y | point) for every point; shape (..., P)."""
    y = np.asarray(y, dtype=np.float64)
    diff = y[..., None, :] - ch.constellation.points
    return -np.sum(diff * diff, axis=-1) / (2.0 * ch.noise_variance)


def _sq_dist(ch: ModChannel, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    diff = y[..., None, :] - ch.constellation.points
    return np.sum(diff * diff, axis=-1)


def _masked_llr(ch: ModChannel, y: np.ndarray, mask0: np.ndarray, mask1: np.ndarray) -> np.ndarray:
    """LLR between two point subsets; masks broadcast against (..., P)."""
    if ch.noise_variance == 0.0:
        d = _sq_dist(ch, y)
        d0 = np.min(np.where(mask0, d, np.inf), axis=-1)
        d1 = np.min(np.where(mask1, d, np.inf), axis=-1)
        return np.sign(d1 - d0) * LLR_CLAMP
    ll = _point_loglik(ch, y)
    l0 = logsumexp(np.where(mask0, ll, -np.inf), axis=-1)
    l1 = logsumexp(np.where(mask1, ll, -np.inf), axis=-1)
    return clamp(l0 - l1)


def msd_level_llr(ch: ModChannel, y: np.ndarray, level: int, known: np.ndarray) -> np.ndarray:
    """Exact LLR of label bit ``level`` given y and the lower label bits.

    ``y`` has shape (..., d); ``known`` has shape (..., level) and holds the
    already decided bits b_0..b_{level-1}.  Higher bits are marginalized
    with equal priors.
    """
    if not 0 <= level < ch.order:
        raise ValueError(f"level {level} out of range")
    known = np.asarray(known, dtype=np.uint8)
    if known.shape[-1] < level:
        raise ValueError("known bits must cover all lower levels")
    prefix_ok = np.ones(np.shape(y)[:-1] + (ch.constellation.size,), dtype=bool)
    if level:
        prefix_ok = np.all(
            ch.labels[:, :level] == known[..., None, :level], axis=-1
        )
    bit = ch.labels[:, level].astype(bool)
    return _masked_llr(ch, y, prefix_ok & ~bit, prefix_ok & bit)


def parallel_level_llr(ch: ModChannel, y: np.ndarray, level: int) -> np.ndarray:
    """Marginal LLR of label bit ``level`` given y only (no lower-bit feedback)."""
    if not 0 <= level < ch.order:
        raise ValueError(f"level {level} out of range")
    bit = ch.labels[:, level].astype(bool)
    return _masked_llr(ch, y, ~bit, bit)


# ---------------------------------------------------------------------------
# Deterministic capacity integrals (Gauss-Hermite per point)
# ---------------------------------------------------------------------------

def _gh_grid(dims: int, sigma2: float):
    """Offsets (n, dims) and weights (n,) for E_{y~N(p, sigma2 I)}[f(y)]."""
    scale = np.sqrt(2.0 * sigma2)
    if dims == 1:
        return scale * _GH_NODES[:, None], _GH_WEIGHTS / np.sqrt(np.pi)
    nodes = scale * _GH_NODES
    w = _GH_WEIGHTS / np.sqrt(np.pi)
    xx, yy = np.meshgrid(nodes, nodes, indexing="ij")
    offs = np.stack([xx.ravel(), yy.ravel()], axis=1)
    return offs, np.outer(w, w).ravel()


def _mixture_logpdf(points: np.ndarray, y: np.ndarray, sigma2: float) -> np.ndarray:
    """log of the equal-weight Gaussian mixture over ``points`` at y (..., d)."""
    diff = y[..., None, :] - points
    ll = -np.sum(diff * diff, axis=-1) / (2.0 * sigma2)
    return logsumexp(ll, axis=-1) - np.log(points.shape[0])


def _binary_subset_mi(ch: ModChannel, pts0: np.ndarray, pts1: np.ndarray) -> float:
    """I(b; Y) for an equiprobable binary choice between two point mixtures."""
    sigma2 = ch.noise_variance
    offs, w = _gh_grid(ch.constellation.dims, sigma2)
    total = 0.0
    for pts_b in (pts0, pts1):
        other = pts1 if pts_b is pts0 else pts0
        y = pts_b[:, None, :] + offs[None, :, :]  # (|S_b|, n, d)
        log_pb = _mixture_logpdf(pts_b, y, sigma2)
        log_po = _mixture_logpdf(other, y, sigma2)
        # log(p_b / pbar) with pbar = (p_b + p_other)/2
        log_ratio = _LN2 - np.logaddexp(0.0, log_po - log_pb)
        total += 0.5 * float(np.mean(log_ratio @ w)) / _LN2
    return total


def level_capacity_quad(ch: ModChannel, level: int, conditioned: bool = True) -> float:
    """Bit-level capacity by quadrature: multistage if conditioned, else marginal.

    Exact up to Gauss-Hermite error; requires noise_variance > 0.
    """
    if ch.noise_variance <= 0.0:
        raise ValueError("quadrature needs positive noise variance")
    labels = ch.labels
    pts = ch.constellation.points
    if not conditioned:
        mask = labels[:, level].astype(bool)
        return _binary_subset_mi(ch, pts[~mask], pts[mask])
    total = 0.0
    n_prefix = 1 << level
    for prefix in range(n_prefix):
        want = (prefix >> np.arange(level)) & 1
        sel = np.all(labels[:, :level] == want, axis=1)
        mask = labels[:, level].astype(bool)
        total += _binary_subset_mi(ch, pts[sel & ~mask], pts[sel & mask])
    return total / n_prefix


def cm_capacity(ch: ModChannel) -> float:
    """Constellation-constrained capacity I(X;Y) in bits per symbol (quadrature)."""
    if ch.noise_variance <= 0.0:
        return float(ch.order)
    sigma2 = ch.noise_variance
    pts = ch.constellation.points
    offs, w = _gh_grid(ch.constellation.dims, sigma2)
    y = pts[:, None, :] + offs[None, :, :]
    # log p(y|x) at y = x + noise, minus log of the full mixture
    log_cond = -np.sum(offs * offs, axis=-1) / (2.0 * sigma2)
    log_mix = _mixture_logpdf(pts, y, sigma2)
    vals = (log_cond[None, :] - log_mix) / _LN2
    return float(np.mean(vals @ w))


def dump_tables(ch: ModChannel) -> str:
    """JSON dump of constellation points and the label table (golden tests)."""
    return json.dumps(
        {
            "kind": ch.constellation.kind,
            "bits_per_symbol": ch.order,
            "points": ch.constellation.points.tolist(),
            "labels": ch.labels.tolist(),
            "noise_variance": ch.noise_variance,
        },
        indent=2,
        sort_keys=True,
    )
