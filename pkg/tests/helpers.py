"""Shared measurement helpers for the test suite."""
import numpy as np


def warp(f, fs):
    """Digital frequency mapped onto the axis where a real pole is an exact first-order section."""
    return fs / np.pi * np.sin(np.pi * np.asarray(f, dtype=float) / fs)


def warped_decade(fw_lo, fs, n=200):
    """Points spanning one decade ``[fw_lo, 10 fw_lo]`` on the warped axis.

    Returns the warped frequencies and the matching physical frequencies in Hz.
    """
    fw = np.geomspace(fw_lo, 10 * fw_lo, n) * (1 - 1e-9)
    return fw, fs / np.pi * np.arcsin(fw * np.pi / fs)


def decade_slopes(response, cutoffs, fs, n_decades=5):
    """Per-decade regression slopes of a response and of its asymptotic stylization.

    Decades are anchored at the top of the warped axis (``fs / pi``). The
    stylization is flat below each cutoff and falls by 20 dB/decade per
    cutoff crossed.
    """
    top = fs / np.pi
    wc = warp(cutoffs, fs)
    out = []
    for k in range(n_decades, 0, -1):
        fw, f = warped_decade(top / 10 ** k, fs)
        sty = -20 * np.sum(np.maximum(0.0, np.log10(fw[:, None] / wc[None, :])), axis=1)
        lx = np.log10(fw)
        out.append((f[0], f[-1], np.polyfit(lx, response(f), 1)[0], np.polyfit(lx, sty, 1)[0]))
    return out


def pairwise_u(x, y):
    """Mann-Whitney U by direct pair comparison, no ranking involved."""
    return sum((a > b) + 0.5 * (a == b) for a in x for b in y)


def brute_force_p(x, y):
    """Two-sided p-value over every relabelling of the pooled sample."""
    import itertools

    pooled = list(x) + list(y)
    n1, n2 = len(x), len(y)
    mean = n1 * n2 / 2
    obs = abs(pairwise_u(x, y) - mean)
    hits = total = 0
    for idx in itertools.combinations(range(len(pooled)), n1):
        chosen = set(idx)
        xs = [pooled[i] for i in idx]
        ys = [pooled[i] for i in range(len(pooled)) if i not in chosen]
        total += 1
        hits += abs(pairwise_u(xs, ys) - mean) >= obs - 1e-9
    return hits / total
