"""Visibility loss along a repeater chain and the largest chain that keeps a key."""

from __future__ import annotations

import math

from .attack import Convention, LeakageModel, zero_key_threshold
from .optimize import KeyRateBound, SettingsSpace, maximize_over_settings

UNBOUNDED = 2**63 - 1
EXPONENTS = ("doubled", "links")


def swapped_visibility(v: float, n: int, exponent: str = "doubled") -> float:
    """End-to-end visibility after ``n`` repeater nodes.

    ``doubled``: v**(2n) for n >= 1; ``links``: v**(n + 1), one factor per
    elementary link.  Both give v for a direct link (n = 0).
    """
    if not 0 <= v <= 1:
        raise ValueError(f"visibility must lie in [0, 1], got {v}")
    if int(n) != n or n < 0:
        raise ValueError(f"number of repeaters must be a non-negative integer, got {n}")
    if exponent not in EXPONENTS:
        raise ValueError(f"exponent must be one of {EXPONENTS}, got {exponent!r}")
    if n == 0:
        return v
    return v ** (2 * n) if exponent == "doubled" else v ** (n + 1)


def max_repeaters(v: float, L: float, convention=Convention.DERIVED, exponent: str = "doubled") -> int:
    """Largest n whose swapped visibility stays strictly above the zero-key threshold.

    Returns ``UNBOUNDED`` for v = 1 and 0 for v = 0.  A link that is already at
    or below the threshold also returns 0; check :func:`repeater_report` for
    the ``secure_without_repeaters`` flag.
    """
    if not 0 <= v <= 1:
        raise ValueError(f"visibility must lie in [0, 1], got {v}")
    if v == 1:
        return UNBOUNDED
    if v == 0:
        return 0
    t = zero_key_threshold(2, 2, LeakageModel.uniform(L), convention)
    ratio = math.log2(t) / math.log2(v)
    n = math.floor(ratio / 2) if exponent == "doubled" else math.ceil(ratio) - 2
    n = max(n, 0)
    # the closed form can land one off when the ratio is an exact integer
    while n > 0 and swapped_visibility(v, n, exponent) <= t:
        n -= 1
    while swapped_visibility(v, n + 1, exponent) > t:
        n += 1
    return n


def repeater_report(v: float, L: float, exponent: str = "doubled") -> dict:
    out = {"v": v, "L": L, "exponent": exponent, "model": "uniform"}
    for conv in Convention:
        t = zero_key_threshold(2, 2, LeakageModel.uniform(L), conv)
        n = max_repeaters(v, L, conv, exponent)
        out[f"threshold_{conv.value}"] = t
        out[f"n_max_{conv.value}"] = n
        out[f"n_max_{conv.value}_ratio"] = (
            math.log2(t) / (2 * math.log2(v)) if 0 < v < 1 else None
        )
    out["unbounded"] = v == 1
    out["secure_without_repeaters"] = v > out[f"threshold_{Convention.DERIVED.value}"]
    out["conventions_agree"] = out["n_max_derived"] == out["n_max_stated"]
    return out


def repeater_rate_curve(v: float, L: float, n_range, settings_space: SettingsSpace | None = None,
                        exponent: str = "doubled") -> list[tuple[int, KeyRateBound]]:
    model = LeakageModel.uniform(L)
    return [
        (int(n), maximize_over_settings(2, 2, swapped_visibility(v, int(n), exponent), model, settings_space))
        for n in n_range
    ]
