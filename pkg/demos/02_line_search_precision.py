"""
How precision limits a line search
==================================

A line search only sees function values. Once the decrease along a
direction drops below the rounding error of the loss, no step looks better
than standing still.
"""

import numpy as np

from cgbench import PrecisionMode, line_search
from cgbench.precision import tolerance_floor

for mode in PrecisionMode:
    print(f"{mode.value}: tolerance floor {tolerance_floor(mode):.2e}")

# phi(alpha) = 1 + k * (alpha - 1)^2 has its minimum at alpha = 1, but the
# achievable gain k is tiny compared to the constant 1.
for k in (1e-3, 1e-9):
    for mode in PrecisionMode:
        t = mode.dtype
        phi = lambda a, t=t, k=k: t(1.0) + t(k) * (a - t(1.0)) ** 2
        out = line_search(phi, mode=mode, alpha_init=0.5)
        print(f"k={k:g} {mode.value:6s}: {out.status.value:15s} alpha={float(out.alpha):.4f} "
              f"evals={out.function_evals}")

# In single precision the k = 1e-9 gain is invisible: 1 + 1e-9 rounds to 1.
print("float32(1 + 1e-9) == 1:", np.float32(1) + np.float32(1e-9) == np.float32(1))
