"""Print the Huber efficiency factor table for the bundled error laws.

For each law: the population cutoff implied by the median-absolute-
deviation rule, the asymptotic variance factor of the clamped score,
the raw error variance, and their ratio (the payoff of clamping).
"""

import numpy as np

from envhuber.asymptotics import (ERROR_DISTRIBUTIONS, huber_factor,
                                  population_k)


def main():
    print(f"{'error':>8} {'cutoff':>8} {'factor':>8} "
          f"{'variance':>9} {'ratio':>7}")
    for name, dist in ERROR_DISTRIBUTIONS.items():
        k = population_k(name)
        f = huber_factor(name, k)
        var = dist.var
        ratio = var / f if np.isfinite(var) else np.inf
        print(f"{name:>8} {k:8.3f} {f:8.3f} {var:9.2f} {ratio:7.2f}")


if __name__ == "__main__":
    main()
