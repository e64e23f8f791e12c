"""Slow, loop-based reference computations used as independent test oracles."""

import cmath
import math


def interferometer_by_paths(amps, delay, theta=0.0):
    """Delay-line interferometer computed by summing the two photon paths.

    Input splitter sends amplitude a/sqrt2 into the short and long arm; the
    long arm adds ``delay`` bins and phase ``theta``; the output splitter maps
    (short, long) -> ((s + l)/sqrt2, (s - l)/sqrt2).
    """
    n = len(amps)
    out = {}
    for slot in range(n + delay):
        short = amps[slot] / math.sqrt(2) if slot < n else 0j
        j = slot - delay
        long_ = cmath.exp(1j * theta) * amps[j] / math.sqrt(2) if 0 <= j < n else 0j
        out[(slot, 0)] = abs((short + long_) / math.sqrt(2)) ** 2
        out[(slot, 1)] = abs((short - long_) / math.sqrt(2)) ** 2
    return out


def cascade_by_convolution(m):
    """Uniform comb from m two-tap stages, convolved with plain lists."""
    resp = [1.0]
    for stage in range(m):
        d = 2**stage
        kernel = [0.0] * (d + 1)
        kernel[0] = kernel[d] = 1.0
        new = [0.0] * (len(resp) + d)
        for i, r in enumerate(resp):
            for k, w in enumerate(kernel):
                new[i + k] += r * w
        resp = new
    norm = math.sqrt(sum(r * r for r in resp))
    return [r / norm for r in resp]


def binary_entropy_mp(p, dps=50):
    import mpmath

    mpmath.mp.dps = dps
    p = mpmath.mpf(p)
    if p == 0 or p == 1:
        return mpmath.mpf(0)
    return -(p * mpmath.log(p, 2) + (1 - p) * mpmath.log(1 - p, 2))


def binomial_sigma(p, n):
    return math.sqrt(p * (1 - p) / n)
