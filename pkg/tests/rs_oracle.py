"""Direct, loop-based R/S used as an independent check of the vectorised code."""

import math


def brute_rs(xs):
    n = len(xs)
    mean = sum(xs) / n
    var = sum((x - mean) ** 2 for x in xs) / n
    partial = []
    running = 0.0
    for k in range(1, n + 1):
        running += xs[k - 1]
        partial.append(running - k * mean)
    hi = max([0.0] + partial)
    lo = min([0.0] + partial)
    return (hi - lo) / math.sqrt(var)
