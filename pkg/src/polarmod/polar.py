"""Binary polar codec: encoding, successive-cancellation decoding, construction.

Encoding is c = u @ G with G = B_N F_N (bit-reversal times the n-fold
Kronecker power of [[1,0],[1,1]]), evaluated through the O(N log N)
butterfly recursion.  In source order the first half of u enters the
check-degraded synthetic channels and the second half the variable-upgraded
ones, so bit-channel reliabilities expand MSB-first: index i with binary
digits b_{n-1}..b_0 applies the minus transform for each 0 digit and the
plus transform for each 1 digit, outermost first.

The SC decoder mirrors the same recursion with LLR combining: check node
f(a,b) = 2 atanh(tanh(a/2) tanh(b/2)) (stable form; min-sum optional) and
variable node g(a,b,u) = b + (1-2u) a.  All arrays are batched over leading
axes so thousands of trials decode in one call.

Construction support: exact erasure-probability recursion for BEC inputs,
and density evolution under a Gaussian LLR assumption for soft channels,
using the standard two-piece approximation of phi(x) = 1 - E[tanh(L/2)]
(exponential piece below PHI_SWITCH, asymptotic tail above; coefficients
pinned by a regression test).
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc

from .channels import gaussian_llr_capacity
from .llr import check_combine, clamp, hard_decision
from .partition import BitChannelProfile

__all__ = [
    "CodeSpec",
    "StageSchedule",
    "LlrFrame",
    "polar_transform",
    "polar_encode",
    "sc_decode",
    "sc_genie_llrs",
    "construct_frozen",
    "bec_profile",
    "de_ga_profile",
    "predict_wer",
    "max_rate_for_wer",
    "phi",
    "phi_inv",
    "llr_mean_from_capacity",
    "pe_from_llr_mean",
]


# ---------------------------------------------------------------------------
# Code specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CodeSpec:
    """Block length, frozen index set and frozen values (default all zero)."""

    length: int
    frozen: np.ndarray
    frozen_values: np.ndarray | None = None
    profile_method: str = "unspecified"

    def __post_init__(self):
        frozen = np.ascontiguousarray(np.sort(np.asarray(self.frozen, dtype=np.int64)))
        if frozen.size and (frozen[0] < 0 or frozen[-1] >= self.length):
            raise ValueError("frozen indices out of range")
        if frozen.size != np.unique(frozen).size:
            raise ValueError("frozen indices must be distinct")
        frozen.setflags(write=False)
        object.__setattr__(self, "frozen", frozen)
        vals = self.frozen_values
        vals = np.zeros(frozen.size, dtype=np.uint8) if vals is None else \
            np.ascontiguousarray(np.asarray(vals, dtype=np.uint8))
        if vals.shape != (frozen.size,):
            raise ValueError("frozen_values must match frozen set size")
        vals.setflags(write=False)
        object.__setattr__(self, "frozen_values", vals)

    @property
    def k_info(self) -> int:
        return self.length - self.frozen.size

    @property
    def rate(self) -> float:
        return self.k_info / self.length

    @property
    def info_set(self) -> np.ndarray:
        mask = np.ones(self.length, dtype=bool)
        mask[self.frozen] = False
        return np.nonzero(mask)[0]

    def frozen_mask(self) -> np.ndarray:
        mask = np.zeros(self.length, dtype=bool)
        mask[self.frozen] = True
        return mask

    def frozen_vector(self) -> np.ndarray:
        """Length-N uint8 vector with frozen values in place, zeros elsewhere."""
        v = np.zeros(self.length, dtype=np.uint8)
        v[self.frozen] = self.frozen_values
        return v

    def to_json(self) -> str:
        return json.dumps(
            {
                "length": int(self.length),
                "frozen": [int(i) for i in self.frozen],
                "frozen_values": [int(v) for v in self.frozen_values],
                "profile_method": self.profile_method,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "CodeSpec":
        d = json.loads(text)
        return cls(
            d["length"],
            np.array(d["frozen"], dtype=np.int64),
            np.array(d["frozen_values"], dtype=np.uint8),
            d.get("profile_method", "unspecified"),
        )


@dataclass(frozen=True)
class StageSchedule:
    """Decode plan: optional demapper head stage plus the polar stage depth.

    ``entries`` lists (stage_kind, level) pairs in decode order; each source
    index is covered exactly once, in increasing order.
    """

    n_exp: int
    head: str | None = None  # None | "msd" | "parallel" | "tm"
    levels: int = 1
    entries: tuple = field(default=())

    def __post_init__(self):
        if self.n_exp < 0 or self.levels < 1:
            raise ValueError("invalid schedule shape")
        if self.head is None and self.levels != 1:
            raise ValueError("head-less schedules decode a single component")
        entries = self.entries or tuple(
            ("component", lev) for lev in range(self.levels)
        )
        if tuple(lev for _, lev in entries) != tuple(range(self.levels)):
            raise ValueError("schedule must decode each level once, in order")
        object.__setattr__(self, "entries", entries)

    @property
    def depth(self) -> int:
        return self.n_exp + (1 if self.head else 0)


@dataclass(frozen=True)
class LlrFrame:
    """Per-trial channel LLRs plus the schedule they are to be decoded with."""

    llrs: np.ndarray
    schedule: StageSchedule


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def polar_transform(u: np.ndarray) -> np.ndarray:
    """Butterfly evaluation of u @ G over GF(2); vectorized over leading axes."""
    u = np.asarray(u, dtype=np.uint8)
    n = u.shape[-1]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    if n == 1:
        return u.copy()
    half = n // 2
    a = polar_transform(u[..., :half])
    b = polar_transform(u[..., half:])
    out = np.empty_like(u)
    out[..., 0::2] = a ^ b
    out[..., 1::2] = b
    return out


def polar_encode(u: np.ndarray, code: CodeSpec) -> np.ndarray:
    """Encode a full-length source word whose frozen positions are already set."""
    u = np.asarray(u, dtype=np.uint8)
    if u.shape[-1] != code.length:
        raise ValueError(f"source length {u.shape[-1]} != {code.length}")
    if code.frozen.size and np.any(u[..., code.frozen] != code.frozen_values):
        raise ValueError("frozen positions do not hold the frozen values")
    return polar_transform(u)


# ---------------------------------------------------------------------------
# Successive-cancellation decoding
# ---------------------------------------------------------------------------

def _sc_recurse(llrs, frozen_mask, frozen_vals, rule, genie, collect, offset):
    n = llrs.shape[-1]
    if n == 1:
        level_llr = llrs[..., 0]
        if collect is not None:
            collect[..., offset] = level_llr
        if genie is not None:
            u = genie[..., offset].astype(np.uint8)
        elif frozen_mask[0]:
            u = np.broadcast_to(np.uint8(frozen_vals[0]), level_llr.shape)
        else:
            u = hard_decision(level_llr)
        return u[..., None].astype(np.uint8)
    half = n // 2
    even = llrs[..., 0::2]
    odd = llrs[..., 1::2]
    u_first = _sc_recurse(
        check_combine(even, odd, rule=rule),
        frozen_mask[:half], frozen_vals[:half], rule, genie, collect, offset,
    )
    alpha = polar_transform(u_first)
    upgraded = clamp(odd + (1.0 - 2.0 * alpha) * even)
    u_second = _sc_recurse(
        upgraded, frozen_mask[half:], frozen_vals[half:], rule, genie, collect,
        offset + half,
    )
    return np.concatenate([u_first, u_second], axis=-1)


def _as_llr_array(llrs) -> np.ndarray:
    if isinstance(llrs, LlrFrame):
        llrs = llrs.llrs
    return np.asarray(llrs, dtype=np.float64)


def sc_decode(llrs, code: CodeSpec, rule: str = "exact") -> np.ndarray:
    """Successive-cancellation decode; accepts an array (..., N) or an LlrFrame.

    Frozen positions are forced to their frozen values; every other decision
    is the hard decision on the stage-combined LLR given the decisions made
    so far.  Ties decide to 0.
    """
    arr = _as_llr_array(llrs)
    if arr.shape[-1] != code.length:
        raise ValueError(f"LLR length {arr.shape[-1]} != {code.length}")
    return _sc_recurse(
        arr, code.frozen_mask(), code.frozen_vector(), rule, None, None, 0
    )


def sc_genie_llrs(llrs, true_u: np.ndarray, rule: str = "exact") -> np.ndarray:
    """Per-index decision LLRs with all decisions forced to the true values.

    This measures the synthetic bit channels themselves: element i of the
    output is the LLR the decoder would threshold at index i when all lower
    decisions are correct.
    """
    arr = _as_llr_array(llrs)
    true_u = np.asarray(true_u, dtype=np.uint8)
    if arr.shape != true_u.shape:
        raise ValueError("LLRs and true source bits must have the same shape")
    n = arr.shape[-1]
    collect = np.empty(arr.shape, dtype=np.float64)
    dummy_mask = np.zeros(n, dtype=bool)
    dummy_vals = np.zeros(n, dtype=np.uint8)
    _sc_recurse(arr, dummy_mask, dummy_vals, rule, true_u, collect, 0)
    return collect


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def construct_frozen(profile: BitChannelProfile, k_info: int,
                     length: int | None = None) -> CodeSpec:
    """Freeze everything but the k_info most reliable bit channels.

    Ranking key: ascending error probability when the profile carries one
    (matching the word-error objective), else descending capacity.  Ties are
    broken toward the lower index.  Frozen values are all zero.
    """
    n = profile.order
    if not 0 <= k_info <= n:
        raise ValueError(f"k_info {k_info} out of range for profile of order {n}")
    if length is not None and length != n:
        raise ValueError("profile order does not match requested length")
    if profile.error_probs is not None:
        key = profile.error_probs
    else:
        key = -profile.capacities
    order = np.argsort(key, kind="stable")
    frozen = np.sort(order[k_info:])
    return CodeSpec(n, frozen, profile_method=profile.method)


def bec_profile(eps: float, n_exp: int) -> BitChannelProfile:
    """Exact bit-channel profile of the 2^n_exp-fold transform over BEC(eps).

    Independent closed-form recursion (check: e -> 2e - e^2, variable:
    e -> e^2, check child first); used as the oracle for the structural
    partition machinery and as the fast construction path for erasure
    channels.  Error probabilities are half the erasure probabilities
    (ties decide to 0 under uniform inputs).
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("erasure probability must be in [0, 1]")
    e = np.array([eps], dtype=np.float64)
    for _ in range(n_exp):
        worse = 2.0 * e - e * e
        better = e * e
        e = np.stack([worse, better], axis=1).reshape(-1)
    return BitChannelProfile(1.0 - e, e / 2.0, "exact-bec")


# --- density evolution with a Gaussian LLR assumption ----------------------

PHI_SWITCH = 10.0
_PHI_A = -0.4527
_PHI_B = 0.86
_PHI_C = 0.0218
MU_MAX = 1e5


def phi(x):
    """Two-piece approximation of 1 - E[tanh(L/2)] for L ~ N(x, 2x)."""
    x = np.asarray(x, dtype=np.float64)
    small = np.exp(_PHI_A * np.power(np.maximum(x, 0.0), _PHI_B) + _PHI_C)
    with np.errstate(divide="ignore"):
        tail = np.exp(_log_phi_tail(np.maximum(x, PHI_SWITCH)))
    out = np.where(x <= PHI_SWITCH, np.minimum(small, 1.0), tail)
    return out if out.ndim else float(out)


def _log_phi_tail(x):
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * (np.log(np.pi) - np.log(x)) - x / 4.0 + np.log1p(-10.0 / (7.0 * x))


def phi_inv(y: float) -> float:
    """Inverse of phi on (0, 1]; analytic on the exponential piece, bracketed
    root-finding on the tail.  Raises RuntimeError if bracketing fails."""
    if y >= 1.0:
        return 0.0
    if y <= 0.0:
        return MU_MAX
    y_switch = float(np.exp(_PHI_A * PHI_SWITCH**_PHI_B + _PHI_C))
    if y >= y_switch:
        return float(((_PHI_C - np.log(y)) / -_PHI_A) ** (1.0 / _PHI_B))
    log_y = np.log(y)
    if _log_phi_tail(MU_MAX) > log_y:
        return MU_MAX
    try:
        return float(brentq(lambda x: _log_phi_tail(x) - log_y, PHI_SWITCH, MU_MAX))
    except ValueError as exc:  # pragma: no cover - numeric fault path
        raise RuntimeError(f"phi inversion failed for y={y}") from exc


def _log_phi(x: float) -> float:
    if x <= PHI_SWITCH:
        return _PHI_A * max(x, 0.0) ** _PHI_B + _PHI_C
    return float(_log_phi_tail(x))


def _check_mean(mu: float) -> float:
    """Mean LLR of the check-degraded channel: phi_inv(1 - (1 - phi(mu))^2)."""
    if mu <= 0.0:
        return 0.0
    if not np.isfinite(mu):
        return np.inf
    p = phi(mu)
    if p > 1e-12:
        return phi_inv(min(1.0, 2.0 * p - p * p))
    # log domain: target = phi * (2 - phi) ~ 2 phi
    log_target = _log_phi(mu) + np.log(2.0 - p)
    if log_target >= np.log(1e-12):
        return phi_inv(float(np.exp(log_target)))
    if _log_phi_tail(MU_MAX) > log_target:
        return MU_MAX
    return float(brentq(lambda x: _log_phi_tail(x) - log_target, PHI_SWITCH, MU_MAX))


def llr_mean_from_capacity(capacity: float) -> float:
    """Mean of the symmetric Gaussian LLR channel with the given capacity."""
    if not 0.0 <= capacity <= 1.0:
        raise ValueError("capacity must be in [0, 1]")
    if capacity >= 1.0 - 1e-12:
        return np.inf
    if capacity <= 0.0:
        return 0.0
    return float(brentq(lambda m: gaussian_llr_capacity(m) - capacity, 1e-9, 6000.0))


def pe_from_llr_mean(mu) -> np.ndarray:
    """Hard-decision error probability Q(sqrt(mu/2)) of a Gaussian LLR channel."""
    mu = np.asarray(mu, dtype=np.float64)
    out = 0.5 * erfc(np.sqrt(np.maximum(mu, 0.0)) / 2.0)
    return np.where(np.isinf(mu), 0.0, out)


def de_ga_profile(
    n_exp: int,
    capacity: float | None = None,
    sigma: float | None = None,
    llr_mean: float | None = None,
) -> BitChannelProfile:
    """Density evolution through n_exp transform stages, Gaussian approximation.

    The input channel is given as a capacity, a binary-input AWGN noise
    standard deviation, or directly as an LLR mean; all stage outputs are
    assumed Gaussian.  Returns capacities and error probabilities for all
    2^n_exp synthetic channels in source order (check child first).
    """
    given = [v is not None for v in (capacity, sigma, llr_mean)]
    if sum(given) != 1:
        raise ValueError("specify exactly one of capacity, sigma, llr_mean")
    if sigma is not None:
        mu = 2.0 / sigma**2
    elif capacity is not None:
        mu = llr_mean_from_capacity(capacity)
    else:
        mu = float(llr_mean)
    means = [mu]
    for _ in range(n_exp):
        nxt = []
        for m in means:
            nxt.append(_check_mean(m))
            nxt.append(min(2.0 * m, MU_MAX) if np.isfinite(m) else np.inf)
        means = nxt
    means = np.array(means)
    caps = np.array([gaussian_llr_capacity(m) for m in means])
    return BitChannelProfile(np.clip(caps, 0.0, 1.0), pe_from_llr_mean(means), "de-ga")


# ---------------------------------------------------------------------------
# Word-error prediction
# ---------------------------------------------------------------------------

def predict_wer(code: CodeSpec, profile: BitChannelProfile) -> float:
    """1 - prod(1 - p_e) over the information set (first-error union)."""
    if profile.error_probs is None:
        raise ValueError("profile carries no error probabilities")
    if profile.order != code.length:
        raise ValueError("profile order does not match the code length")
    pe = profile.error_probs[code.info_set]
    return float(-np.expm1(np.sum(np.log1p(-np.minimum(pe, 1.0)))))


def max_rate_for_wer(profile: BitChannelProfile, wer_max: float) -> int:
    """Largest information-set size whose predicted word error rate stays below wer_max.

    Greedy by ascending error probability, which is optimal for the product
    form of the prediction.
    """
    if profile.error_probs is None:
        raise ValueError("profile carries no error probabilities")
    pe = np.sort(profile.error_probs)
    log_ok = np.cumsum(np.log1p(-np.minimum(pe, 1.0)))
    wer = -np.expm1(log_ok)
    return int(np.searchsorted(wer, wer_max, side="right"))
