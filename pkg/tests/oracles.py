"""Independent brute-force reference implementations used by the tests.

Everything here is written against the documented behavior only: explicit
per-pixel patch loops, plain-Python medians, clamped scalar exponentials,
and counting-based ROC. None of it shares code with the library paths it
checks.
"""

import math
import statistics

import numpy as np


def brute_patch_stats(data, patch_size):
    """Per-pixel patch mean/std via explicit window extraction.

    Replicate edge handling, population standard deviation.
    """
    data = np.asarray(data, dtype=np.float64)
    n, rows, cols = data.shape
    half = patch_size // 2
    mu = np.empty_like(data)
    sigma = np.empty_like(data)
    padded = np.pad(data, ((0, 0), (half, half), (half, half)), mode="edge")
    for k in range(n):
        for r in range(rows):
            for c in range(cols):
                win = padded[k, r : r + patch_size, c : c + patch_size]
                m = win.mean()
                mu[k, r, c] = m
                sigma[k, r, c] = math.sqrt(max(((win - m) ** 2).mean(), 0.0))
    return mu, sigma


def brute_weight_function(d, s, nu, lam):
    """Scalar two-sided logistic window, clamped against exp overflow."""

    def sigmoid(x):
        if x >= 0:
            return 1.0 / (1.0 + math.exp(-min(x, 700.0)))
        return math.exp(max(x, -700.0)) / (1.0 + math.exp(max(x, -700.0)))

    rate = lam / abs(nu * s)
    return sigmoid(rate * (d + nu * s)) - sigmoid(rate * (d - nu * s))


def brute_awa_weights(data, selected, patch_size, nu, lam):
    """Per-pixel loop reimplementation of the full weighting pipeline.

    Mirrors the documented degenerate-pixel rules: tolerances at or below
    1e-12 times the 98th-percentile intensity, or weight sums below 1e-12,
    fall back to uniform weights.
    """
    data = np.asarray(data, dtype=np.float64)
    n, rows, cols = data.shape
    mu, sigma = brute_patch_stats(data, patch_size)
    tol_floor = 1e-12 * float(np.percentile(data, 98))

    w = np.empty_like(data)
    for r in range(rows):
        for c in range(cols):
            m = statistics.median(mu[k, r, c] for k in range(n) if selected[k])
            s = statistics.median(sigma[k, r, c] for k in range(n) if selected[k])
            if s <= tol_floor:
                w[:, r, c] = 1.0 / n
                continue
            raw = [brute_weight_function(mu[k, r, c] - m, s, nu, lam) for k in range(n)]
            total = sum(raw)
            if total < 1e-12:
                w[:, r, c] = 1.0 / n
            else:
                w[:, r, c] = [x / total for x in raw]
    return w


def mp_weight_function(d, s, nu, lam):
    """Arbitrary-precision evaluation of the two-sided logistic window."""
    import mpmath as mp

    with mp.workdps(50):
        rate = mp.mpf(lam) / abs(mp.mpf(nu) * mp.mpf(s))
        g_hi = 1 / (1 + mp.e ** (-rate * (mp.mpf(d) + mp.mpf(nu) * mp.mpf(s))))
        g_lo = 1 / (1 + mp.e ** (-rate * (mp.mpf(d) - mp.mpf(nu) * mp.mpf(s))))
        return float(g_hi - g_lo)


def brute_roc_point(probs, labels, threshold):
    """(fpr, tpr) by direct counting with >= threshold called positive."""
    tp = fp = fn = tn = 0
    for p, lab in zip(probs, labels):
        called = p >= threshold
        actual = lab == "corrupt"
        if called and actual:
            tp += 1
        elif called:
            fp += 1
        elif actual:
            fn += 1
        else:
            tn += 1
    fpr = fp / (fp + tn) if (fp + tn) else 0.0
    tpr = tp / (tp + fn) if (tp + fn) else 0.0
    return fpr, tpr


def brute_auc(probs, labels):
    """Mann-Whitney AUC: P(positive scored above negative), ties half."""
    pos = [p for p, lab in zip(probs, labels) if lab == "corrupt"]
    neg = [p for p, lab in zip(probs, labels) if lab != "corrupt"]
    wins = 0.0
    for pp in pos:
        for pn in neg:
            if pp > pn:
                wins += 1.0
            elif pp == pn:
                wins += 0.5
    return wins / (len(pos) * len(neg))
