"""Independent reference computations shared by several test modules."""

import math

import numpy as np

from qsurrogate.nn import l2_penalty, loss_and_grads, mse_loss


def brute_silhouette(X, lab):
    n = len(X)
    d = lambda i, j: math.dist(X[i], X[j])
    total = 0.0
    for i in range(n):
        own = [j for j in range(n) if lab[j] == lab[i] and j != i]
        if not own:
            continue
        a = sum(d(i, j) for j in own) / len(own)
        b = min(
            sum(d(i, j) for j in range(n) if lab[j] == c) / sum(1 for j in range(n) if lab[j] == c)
            for c in set(lab) if c != lab[i]
        )
        total += (b - a) / max(a, b)
    return total / n


def brute_db(X, lab):
    ks = sorted(set(lab))
    C = {c: np.mean([X[i] for i in range(len(X)) if lab[i] == c], axis=0) for c in ks}
    s = {c: np.mean([math.dist(X[i], C[c]) for i in range(len(X)) if lab[i] == c]) for c in ks}
    return sum(max((s[a] + s[b]) / math.dist(C[a], C[b]) for b in ks if b != a) for a in ks) / len(ks)


def total_loss(m, F, T, lam):
    return mse_loss(m.forward(F), T) + l2_penalty(m, lam)


def _relu_pattern(m):
    return [layer._pre > 0 for layer in m.layers if getattr(layer, "activation", None) == "relu"]


def _same_pattern(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def max_grad_error(m, F, T, lam=1e-3, steps=(1e-3, 1e-4, 1e-5, 1e-6)):
    """Worst relative gap between backprop and a fourth-order central difference.

    The five-point stencil keeps truncation near h**4 while a wide step keeps
    cancellation error small, so gradient entries near 1e-6 are still resolved.
    The widest step whose stencil stays inside the base point's ReLU activation
    pattern is used: across a kink the loss has no derivative to compare with.
    Entries below 1e-8 are compared absolutely.
    """
    _, grads = loss_and_grads(m, F, T, lam)
    total_loss(m, F, T, lam)
    base = _relu_pattern(m)
    worst = 0.0
    for (_, p), g in zip(m.parameters(), grads):
        for i in np.ndindex(p.shape):
            old = p[i]
            for h in steps:
                f, smooth = {}, True
                for k in (-2, -1, 1, 2):
                    p[i] = old + k * h
                    f[k] = total_loss(m, F, T, lam)
                    smooth = smooth and _same_pattern(base, _relu_pattern(m))
                p[i] = old
                if smooth:
                    break
            else:
                raise AssertionError(f"no kink-free stencil at parameter {i}")
            fd = (f[-2] - 8 * f[-1] + 8 * f[1] - f[2]) / (12 * h)
            err = abs(fd - g[i]) if abs(g[i]) < 1e-8 else abs(fd - g[i]) / abs(g[i])
            worst = max(worst, err)
    return worst
