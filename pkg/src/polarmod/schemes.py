"""End-to-end coded-modulation schemes over one polar code family.

Three constructions share the machinery:

* MLC: one length-N polar component code per label bit level; the demapper
  feeds each level the exact LLR conditioned on the already-decoded lower
  levels (multistage decoding).  Generator: stride_permutation(m, N) @
  (G_N kron I_m), then label-and-map.
* BICM-original: a single length-mN polar code whose output bits are
  Gray-mapped m at a time; the demapper computes all level LLRs in parallel
  (no feedback), so the decoder is plain SC over G_mN on marginal metrics.
  Requires m to be a power of two.
* BICM-modified: like MLC but with the band SP-to-Gray transform inserted
  per symbol: generator stride_permutation(m, N) @ (G_N kron T_m), Gray
  mapping, parallel demapping, and a successive head stage that undoes the
  band transform from the marginal metrics.

With SP labeling for MLC and Gray labeling for the modified BICM scheme the
two generators map identical source words to identical transmit symbols;
only the demapping differs.  verify_code_equivalence checks this bit by bit.

Frozen sets are chosen globally over all m*N bit channels (never per-level
quotas); profiles come from density evolution per level, optionally seeded
by Monte-Carlo head-stage estimates for the BICM variants, or from a fully
simulated genie-aided pass.
"""

import json
from dataclasses import dataclass, replace

import numpy as np

from .channels import (
    Constellation,
    ModChannel,
    ask,
    mod_transmit,
    msd_level_llr,
    parallel_level_llr,
    square_qam,
)
from .gf2 import BitMatrix, kron, mat_mul, polar_generator, stride_permutation, vec_mat
from .labeling import (
    LabelTable,
    gray_table,
    qam_gray_table,
    qam_sp_table,
    sp_table,
    sp_to_gray_matrix,
    tm_level_llr,
)
from .llr import hard_decision
from .partition import BitChannelProfile, compose_linear, linear_sbp, mod_pbp, sbp_capacities
from .polar import (
    CodeSpec,
    StageSchedule,
    construct_frozen,
    de_ga_profile,
    max_rate_for_wer,
    polar_transform,
    sc_decode,
    sc_genie_llrs,
)

__all__ = [
    "SchemeSpec",
    "make_scheme",
    "generator_matrix",
    "head_matrix",
    "scheme_label_table",
    "scheme_mod_channel",
    "mlc_encode",
    "bicm_encode",
    "scheme_encode",
    "mlc_msd_decode",
    "bicm_decode",
    "scheme_decode",
    "decode_with_bit_llrs",
    "verify_code_equivalence",
    "scheme_profile",
    "genie_profile",
    "construct_scheme",
]

KINDS = ("mlc", "bicm-original", "bicm-modified")


@dataclass(frozen=True)
class SchemeSpec:
    """A coded-modulation scheme: kind, geometry, labeling and the global code."""

    kind: str
    m: int
    n_exp: int
    labeling: str  # "sp" | "gray"
    constellation: Constellation
    code: CodeSpec

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.labeling not in ("sp", "gray"):
            raise ValueError(f"unknown labeling {self.labeling!r}")
        if self.kind.startswith("bicm") and self.labeling != "gray":
            raise ValueError("BICM schemes use Gray labeling")
        if self.kind == "bicm-original" and self.m & (self.m - 1):
            raise ValueError("original BICM needs m to be a power of two")
        if self.constellation.bits_per_symbol != self.m:
            raise ValueError("constellation order does not match m")
        if self.code.length != self.block_len:
            raise ValueError(f"code length {self.code.length} != m*N = {self.block_len}")

    @property
    def n_symbols(self) -> int:
        return 1 << self.n_exp

    @property
    def block_len(self) -> int:
        return self.m * self.n_symbols

    @property
    def rate_bits_per_symbol(self) -> float:
        return self.code.k_info / self.n_symbols

    def schedule(self) -> StageSchedule:
        if self.kind == "mlc":
            return StageSchedule(self.n_exp, head="msd", levels=self.m)
        if self.kind == "bicm-modified":
            return StageSchedule(self.n_exp, head="tm", levels=self.m)
        return StageSchedule(
            self.n_exp + (self.m.bit_length() - 1), head="parallel", levels=1
        )

    def component_code(self, level: int) -> CodeSpec:
        """Frozen pattern of one bit level, sliced out of the global code."""
        n = self.n_symbols
        lo, hi = level * n, (level + 1) * n
        sel = (self.code.frozen >= lo) & (self.code.frozen < hi)
        return CodeSpec(
            n, self.code.frozen[sel] - lo, self.code.frozen_values[sel],
            self.code.profile_method,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "m": self.m,
                "n_exp": self.n_exp,
                "labeling": self.labeling,
                "constellation": self.constellation.kind,
                "frozen": [int(i) for i in self.code.frozen],
                "frozen_values": [int(v) for v in self.code.frozen_values],
                "profile_method": self.code.profile_method,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SchemeSpec":
        d = json.loads(text)
        code = CodeSpec(
            d["m"] * (1 << d["n_exp"]),
            np.array(d["frozen"], dtype=np.int64),
            np.array(d["frozen_values"], dtype=np.uint8),
            d.get("profile_method", "unspecified"),
        )
        return make_scheme(d["kind"], d["m"], d["n_exp"], d["labeling"], code,
                           constellation=d.get("constellation", "ask"))


def make_scheme(
    kind: str,
    m: int,
    n_exp: int,
    labeling: str,
    code: CodeSpec | None = None,
    constellation: str = "ask",
) -> SchemeSpec:
    """Convenience constructor; a missing code defaults to rate 1 (no frozen bits)."""
    if constellation == "ask":
        const = ask(m)
    elif constellation == "square_qam":
        const = square_qam(m)
    else:
        raise ValueError(f"unknown constellation {constellation!r}")
    if code is None:
        code = CodeSpec(m * (1 << n_exp), np.empty(0, dtype=np.int64))
    return SchemeSpec(kind, m, n_exp, labeling, const, code)


# ---------------------------------------------------------------------------
# Tables, matrices, channels
# ---------------------------------------------------------------------------

def scheme_label_table(spec: SchemeSpec) -> LabelTable:
    if spec.constellation.kind == "square_qam":
        half = spec.m // 2
        return qam_sp_table(half) if spec.labeling == "sp" else qam_gray_table(half)
    return sp_table(spec.m) if spec.labeling == "sp" else gray_table(spec.m)


def scheme_mod_channel(spec: SchemeSpec, noise_variance: float) -> ModChannel:
    return ModChannel(spec.constellation, scheme_label_table(spec).table, noise_variance)


def head_matrix(spec: SchemeSpec) -> BitMatrix | None:
    """Per-symbol transform between component-code bits and label bits."""
    if spec.kind == "bicm-modified" and spec.m > 1:
        return sp_to_gray_matrix(spec.m)
    if spec.kind == "bicm-original" and spec.m > 1:
        return polar_generator(spec.m.bit_length() - 1)
    return None


def generator_matrix(spec: SchemeSpec) -> BitMatrix:
    """Dense (mN, mN) generator: the oracle for the fast encoders."""
    m, n = spec.m, spec.n_exp
    if spec.kind == "bicm-original":
        return polar_generator(n + (m.bit_length() - 1)) if m > 1 else polar_generator(n)
    g = polar_generator(n)
    inner = BitMatrix.identity(m) if spec.kind == "mlc" else sp_to_gray_matrix(m)
    return mat_mul(stride_permutation(m, 1 << n), kron(g, inner))


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def _check_source(u: np.ndarray, spec: SchemeSpec) -> np.ndarray:
    u = np.asarray(u, dtype=np.uint8)
    if u.shape[-1] != spec.block_len:
        raise ValueError(f"source length {u.shape[-1]} != {spec.block_len}")
    code = spec.code
    if code.frozen.size and np.any(u[..., code.frozen] != code.frozen_values):
        raise ValueError("frozen positions do not hold the frozen values")
    return u


def _encode_labels(u: np.ndarray, spec: SchemeSpec) -> np.ndarray:
    """Source word(s) (..., mN) -> per-symbol label bits (..., N, m)."""
    m, n_sym = spec.m, spec.n_symbols
    if spec.kind == "bicm-original":
        c = polar_transform(u)
        return c.reshape(u.shape[:-1] + (n_sym, m))
    levels = u.reshape(u.shape[:-1] + (m, n_sym))
    coded = polar_transform(levels)  # per-level transform along the last axis
    labels = np.swapaxes(coded, -1, -2)
    if spec.kind == "bicm-modified" and m > 1:
        labels = vec_mat(labels, sp_to_gray_matrix(m))
    return np.ascontiguousarray(labels)


def scheme_encode(u: np.ndarray, spec: SchemeSpec) -> np.ndarray:
    """Encode source word(s) to a symbol-index sequence of length N."""
    u = _check_source(u, spec)
    labels = _encode_labels(u, spec)
    table = scheme_label_table(spec).table
    k = spec.m
    ints = (labels.astype(np.int64) << np.arange(k, dtype=np.int64)).sum(axis=-1)
    lab_ints = (table.astype(np.int64) << np.arange(k, dtype=np.int64)).sum(axis=-1)
    inv = np.empty(1 << k, dtype=np.int64)
    inv[lab_ints] = np.arange(1 << k)
    return inv[ints]


def mlc_encode(u: np.ndarray, spec: SchemeSpec) -> np.ndarray:
    if spec.kind != "mlc":
        raise ValueError("mlc_encode needs an MLC scheme")
    return scheme_encode(u, spec)


def bicm_encode(u: np.ndarray, spec: SchemeSpec) -> np.ndarray:
    if not spec.kind.startswith("bicm"):
        raise ValueError("bicm_encode needs a BICM scheme")
    return scheme_encode(u, spec)


def transmit(
    spec: SchemeSpec, u: np.ndarray, noise_variance: float, rng: np.random.Generator
) -> np.ndarray:
    """Encode and push through the modulated AWGN channel; returns (..., N, d)."""
    ch = scheme_mod_channel(spec, noise_variance)
    labels = _encode_labels(_check_source(u, spec), spec)
    return mod_transmit(ch, labels, rng)


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

def _mlc_decode(spec, level_llr, genie_u=None, collect=None):
    """Shared multistage loop: demap one level, SC-decode it, feed it back.

    ``level_llr(level, known)`` returns per-symbol LLRs for one level given
    the known lower code bits of shape (..., N, level).
    """
    m, n_sym = spec.m, spec.n_symbols
    known = np.zeros(0, dtype=np.uint8)  # level 0 never reads it
    u_out = []
    for i in range(m):
        llrs = level_llr(i, known)
        comp = spec.component_code(i)
        if genie_u is None:
            u_i = sc_decode(llrs, comp)
        else:
            true_i = genie_u[..., i * n_sym:(i + 1) * n_sym]
            g = sc_genie_llrs(llrs, true_i)
            if collect is not None:
                collect[..., i * n_sym:(i + 1) * n_sym] = g
            u_i = true_i
        v_i = polar_transform(u_i)
        known = v_i[..., None] if i == 0 else \
            np.concatenate([known, v_i[..., None]], axis=-1)
        u_out.append(u_i)
    return np.concatenate(u_out, axis=-1)


def mlc_msd_decode(y: np.ndarray, spec: SchemeSpec, noise_variance: float) -> np.ndarray:
    """Multistage decode: exact per-level demapping plus per-level SC decoding.

    ``y`` has shape (..., N, d).  Decoded level bits are re-encoded and fed
    back into the demapper of the next level.
    """
    if spec.kind != "mlc":
        raise ValueError("mlc_msd_decode needs an MLC scheme")
    ch = scheme_mod_channel(spec, noise_variance)

    def level_llr(level, known):
        return msd_level_llr(ch, y, level, known)

    return _mlc_decode(spec, level_llr)


def _parallel_bit_llrs(ch: ModChannel, y: np.ndarray) -> np.ndarray:
    """Feedback-free per-level LLRs for every symbol: shape (..., N, m)."""
    return np.stack(
        [parallel_level_llr(ch, y, j) for j in range(ch.order)], axis=-1
    )


def _bicm_modified_decode(lx, spec, genie_u=None, collect=None):
    """Successive head stage over the band transform, then per-level SC."""
    m, n_sym = spec.m, spec.n_symbols
    known = np.zeros(lx.shape[:-1] + (0,), dtype=np.uint8)
    u_out = []
    for i in range(m):
        llrs = tm_level_llr(lx, i, known) if m > 1 else lx[..., 0]
        comp = spec.component_code(i)
        if genie_u is None:
            u_i = sc_decode(llrs, comp)
        else:
            true_i = genie_u[..., i * n_sym:(i + 1) * n_sym]
            g = sc_genie_llrs(llrs, true_i)
            if collect is not None:
                collect[..., i * n_sym:(i + 1) * n_sym] = g
            u_i = true_i
        v_i = polar_transform(u_i)
        known = np.concatenate([known, v_i[..., None]], axis=-1)
        u_out.append(u_i)
    return np.concatenate(u_out, axis=-1)


def bicm_decode(y: np.ndarray, spec: SchemeSpec, noise_variance: float) -> np.ndarray:
    """Decode a BICM scheme from received symbols (..., N, d).

    Both variants start from feedback-free per-level LLRs; the original
    construction then runs plain SC over the length-mN code, the modified
    one first undoes the band transform successively per symbol.
    """
    if not spec.kind.startswith("bicm"):
        raise ValueError("bicm_decode needs a BICM scheme")
    ch = scheme_mod_channel(spec, noise_variance)
    lx = _parallel_bit_llrs(ch, y)
    if spec.kind == "bicm-original":
        flat = lx.reshape(lx.shape[:-2] + (spec.block_len,))
        return sc_decode(flat, spec.code)
    return _bicm_modified_decode(lx, spec)


def scheme_decode(y: np.ndarray, spec: SchemeSpec, noise_variance: float) -> np.ndarray:
    if spec.kind == "mlc":
        return mlc_msd_decode(y, spec, noise_variance)
    return bicm_decode(y, spec, noise_variance)


def decode_with_bit_llrs(spec: SchemeSpec, bit_llrs: np.ndarray) -> np.ndarray:
    """Decode from externally supplied per-code-bit LLRs (..., mN).

    Bit order matches the transmitted labels: index m*a + b is level b of
    symbol a.  Used for erasure surrogates and decoder oracles, where the
    modulation step is replaced by independent binary channels.
    """
    bit_llrs = np.asarray(bit_llrs, dtype=np.float64)
    if bit_llrs.shape[-1] != spec.block_len:
        raise ValueError("LLR length mismatch")
    lx = bit_llrs.reshape(bit_llrs.shape[:-1] + (spec.n_symbols, spec.m))
    if spec.kind == "bicm-original":
        return sc_decode(bit_llrs, spec.code)
    if spec.kind == "bicm-modified":
        return _bicm_modified_decode(lx, spec)

    def level_llr(level, known):
        return lx[..., level]

    return _mlc_decode(spec, level_llr)


# ---------------------------------------------------------------------------
# Code equivalence
# ---------------------------------------------------------------------------

def verify_code_equivalence(m: int, n_exp: int, rng=None, samples: int = 4096):
    """Check that SP-labeled MLC and modified BICM emit identical symbols.

    Exhaustive over all source words when mN <= 16, sampled otherwise.
    Returns (True, None) or (False, first_counterexample).
    """
    mlc = make_scheme("mlc", m, n_exp, "sp")
    mod = make_scheme("bicm-modified", m, n_exp, "gray")
    mn = mlc.block_len
    if mn <= 16:
        words = ((np.arange(1 << mn)[:, None] >> np.arange(mn)) & 1).astype(np.uint8)
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        words = rng.integers(0, 2, size=(samples, mn), dtype=np.uint8)
    sym_a = scheme_encode(words, mlc)
    sym_b = scheme_encode(words, mod)
    bad = np.nonzero(np.any(sym_a != sym_b, axis=-1))[0]
    if bad.size:
        return False, words[bad[0]]
    return True, None


# ---------------------------------------------------------------------------
# Profiles and construction
# ---------------------------------------------------------------------------

def _level_capacities(spec: SchemeSpec, noise_variance: float,
                      samples: int, rng) -> np.ndarray:
    """Head-stage capacities feeding per-level density evolution."""
    ch = scheme_mod_channel(spec, noise_variance)
    if spec.kind == "mlc":
        from .partition import mod_sbp

        if spec.constellation.dims == 1:
            prof = sbp_capacities(mod_sbp(ch), method="quadrature")
        else:
            prof = sbp_capacities(mod_sbp(ch), method="mc", samples=samples, rng=rng)
        return prof.capacities
    head = head_matrix(spec)
    if head is None:  # m == 1: plain parallel level
        from .partition import pbp_capacities

        prof = pbp_capacities(mod_pbp(ch), method="mc", samples=samples, rng=rng)
        return prof.capacities
    degraded = compose_linear(mod_pbp(ch), linear_sbp(head))
    prof = sbp_capacities(degraded, method="mc", samples=samples, rng=rng)
    return prof.capacities


def scheme_profile(
    spec: SchemeSpec,
    noise_variance: float,
    method: str = "de-ga",
    head_samples: int = 1_000_000,
    trials: int = 20_000,
    rng: np.random.Generator | None = None,
) -> BitChannelProfile:
    """Bit-channel profile over all mN channels, in global (level-major) order.

    'de-ga': per-level density evolution with Gaussian-assumed inputs; MLC
    level capacities come from quadrature (1-D) or MC, BICM head-stage
    capacities from MC with successive combining of parallel metrics.
    'mc-genie': fully simulated genie-aided pass (capacities from the
    information estimate on decision LLRs, error probabilities from
    hard-decision counts).
    """
    rng = rng if rng is not None else np.random.default_rng()
    if method == "mc-genie":
        return genie_profile(spec, noise_variance, trials, rng)
    if method != "de-ga":
        raise ValueError(f"unknown profile method {method!r}")
    caps = _level_capacities(spec, noise_variance, head_samples, rng)
    profs = [de_ga_profile(spec.n_exp, capacity=float(c)) for c in caps]
    if spec.kind == "bicm-original" and spec.m > 1:
        # head order equals source order: index N*i + j for head channel i
        pass
    return BitChannelProfile(
        np.concatenate([p.capacities for p in profs]),
        np.concatenate([p.error_probs for p in profs]),
        "de-ga",
    )


def genie_profile(
    spec: SchemeSpec,
    noise_variance: float,
    trials: int,
    rng: np.random.Generator,
    chunk: int = 2048,
) -> BitChannelProfile:
    """Monte-Carlo bit-channel profile from genie-aided decoding."""
    mn = spec.block_len
    err = np.zeros(mn)
    mi = np.zeros(mn)
    ch = scheme_mod_channel(spec, noise_variance)
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        u = rng.integers(0, 2, size=(b, mn), dtype=np.uint8)
        labels = _encode_labels(u, replace(spec, code=CodeSpec(mn, np.empty(0, int))))
        y = mod_transmit(ch, labels, rng)
        collect = np.empty((b, mn))
        if spec.kind == "bicm-original":
            lx = _parallel_bit_llrs(ch, y)
            flat = lx.reshape(b, mn)
            collect = sc_genie_llrs(flat, u)
        elif spec.kind == "bicm-modified":
            lx = _parallel_bit_llrs(ch, y)
            _bicm_modified_decode(lx, spec, genie_u=u, collect=collect)
        else:
            def level_llr(level, known):
                return msd_level_llr(ch, y, level, known)

            _mlc_decode(spec, level_llr, genie_u=u, collect=collect)
        err += np.sum(hard_decision(collect) != u, axis=0)
        flipped = (1.0 - 2.0 * u) * collect
        mi += np.sum(1.0 - np.logaddexp(0.0, -flipped) / np.log(2.0), axis=0)
        done += b
    return BitChannelProfile(
        np.clip(mi / trials, 0.0, 1.0), err / trials, f"mc-genie({trials})"
    )


def construct_scheme(
    kind: str,
    m: int,
    n_exp: int,
    labeling: str,
    noise_variance: float,
    target_wer: float | None = None,
    k_info: int | None = None,
    constellation: str = "ask",
    method: str = "de-ga",
    head_samples: int = 1_000_000,
    trials: int = 20_000,
    rng: np.random.Generator | None = None,
) -> SchemeSpec:
    """Build a scheme with its frozen set chosen globally over all mN channels.

    Give either a target word error rate (largest rate whose predicted WER
    stays below it) or an explicit information-set size.
    """
    if (target_wer is None) == (k_info is None):
        raise ValueError("specify exactly one of target_wer, k_info")
    shape = make_scheme(kind, m, n_exp, labeling, constellation=constellation)
    profile = scheme_profile(
        shape, noise_variance, method=method, head_samples=head_samples,
        trials=trials, rng=rng,
    )
    if k_info is None:
        k_info = max_rate_for_wer(profile, target_wer)
    code = construct_frozen(profile, k_info)
    return replace(shape, code=code)
