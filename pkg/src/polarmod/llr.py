"""Log-likelihood-ratio primitives shared by demappers and decoders.

Sign convention: positive LLR favors bit 0.  Magnitudes are clamped at
``LLR_CLAMP`` so that repeated combining stays finite; the clamp is large
enough that hard decisions and mutual-information estimates are unaffected
at simulation scale.
"""

import numpy as np

__all__ = ["LLR_CLAMP", "clamp", "check_combine", "check_reduce", "hard_decision"]

LLR_CLAMP = 40.0


def clamp(llr):
    """Clip LLR magnitudes to LLR_CLAMP."""
    return np.clip(llr, -LLR_CLAMP, LLR_CLAMP)


def check_combine(a, b, rule: str = "exact"):
    """Check-node (boxplus) combination of two LLRs.

    ``rule='exact'`` evaluates 2*atanh(tanh(a/2)*tanh(b/2)) in the stable
    form sign(a)sign(b)min(|a|,|b|) + log1p(e^-|a+b|) - log1p(e^-|a-b|);
    ``rule='minsum'`` keeps only the first term.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    base = np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
    if rule == "minsum":
        return clamp(base)
    if rule != "exact":
        raise ValueError(f"unknown combining rule {rule!r}")
    corr = np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b)))
    return clamp(base + corr)


def check_reduce(llrs, axis: int = -1, rule: str = "exact"):
    """Fold check_combine over one axis of an LLR array."""
    llrs = np.moveaxis(np.asarray(llrs, dtype=np.float64), axis, 0)
    out = llrs[0]
    for i in range(1, llrs.shape[0]):
        out = check_combine(out, llrs[i], rule=rule)
    return out


def hard_decision(llr) -> np.ndarray:
    """Map LLR to a bit: negative -> 1, otherwise (ties included) -> 0."""
    return (np.asarray(llr) < 0).astype(np.uint8)
