"""Independent reference implementations used by the test suite.

Everything here is deliberately written as plain double-sum / dense-grid /
Monte-Carlo code with no dependence on the package internals, so agreement
is evidence of correctness rather than self-confirmation.
"""

import math

import numpy as np


def qwk_brute_force(cm, n_exponent, e_normalization="n"):
    cm = np.asarray(cm, dtype=np.float64)
    j = cm.shape[0]
    total = cm.sum()
    row = cm.sum(axis=1)
    col = cm.sum(axis=0)
    num = 0.0
    den = 0.0
    for a in range(j):
        for b in range(j):
            w = abs(a - b) ** n_exponent / (j - 1) ** n_exponent
            e = row[a] * col[b] / (total if e_normalization == "n" else j)
            num += w * cm[a, b]
            den += w * e
    return 1.0 - num / den


def beta_log_density(x, a, b):
    log_norm = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    return log_norm + (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x)


def beta_cell_masses(k, n_classes, concentration, n_grid=200_001):
    """Dense-trapezoid integration of the class-k beta encoder."""
    mode = (2 * k + 1) / (2 * n_classes)
    a = mode * (concentration - 2.0) + 1.0
    b = (1.0 - mode) * (concentration - 2.0) + 1.0
    masses = np.empty(n_classes)
    for j in range(n_classes):
        x = np.linspace(j / n_classes, (j + 1) / n_classes, n_grid)
        x = np.clip(x, 1e-300, 1.0 - 1e-16)
        masses[j] = np.trapezoid(np.exp(beta_log_density(x, a, b)), x)
    return masses / masses.sum()


def triangle_cell_masses(k, n_classes, alpha, n_grid=200_001):
    """Dense-trapezoid integration of the class-k triangular encoder."""
    if k == 0:
        width = (1.0 / n_classes) / (1.0 - math.sqrt(alpha))
        lo, mode, hi = 0.0, 0.0, width
    elif k == n_classes - 1:
        width = (1.0 / n_classes) / (1.0 - math.sqrt(alpha))
        lo, mode, hi = 1.0 - width, 1.0, 1.0
    else:
        half = (1.0 / (2.0 * n_classes)) / (1.0 - math.sqrt(2.0 * alpha))
        center = (2 * k + 1) / (2 * n_classes)
        lo, mode, hi = center - half, center, center + half
    masses = np.empty(n_classes)
    for j in range(n_classes):
        x = np.linspace(j / n_classes, (j + 1) / n_classes, n_grid)
        dens = np.zeros_like(x)
        up = (x >= lo) & (x <= mode)
        down = (x > mode) & (x <= hi)
        if mode > lo:
            dens[up] = 2.0 * (x[up] - lo) / ((hi - lo) * (mode - lo))
        if hi > mode:
            dens[down] = 2.0 * (hi - x[down]) / ((hi - lo) * (hi - mode))
        masses[j] = np.trapezoid(dens, x)
    return masses / masses.sum()


def mc_studentized_range_quantile(k, df, q, n_draws=10_000_000, seed=0,
                                  block=250_000):
    """Monte-Carlo quantile of range(k standard normals) / sqrt(chi2_df / df)."""
    rng = np.random.default_rng(seed)
    samples = np.empty(n_draws)
    done = 0
    while done < n_draws:
        b = min(block, n_draws - done)
        z = rng.normal(size=(b, k))
        r = z.max(axis=1) - z.min(axis=1)
        s = np.sqrt(rng.chisquare(df, size=b) / df)
        samples[done : done + b] = r / s
        done += b
    return float(np.quantile(samples, q))
