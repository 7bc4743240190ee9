"""
Why single-precision CG can stop early
======================================

If the loss contains a large part that no weight change can remove, the
trainable part shrinks below float32 resolution. CG in single precision then
finds no improving step and stops, while double precision keeps going.
"""

import numpy as np

from cgbench import CgConfig, NetworkProblem, PrecisionMode, TaskSpec, cg_minimize, generate_task, mse
from cgbench.taskgen import initial_params, with_irreducible_offset

spec = TaskSpec.build(20, 10, [10], "moderate", patterns=50, seed=8)
base, _ = generate_task(spec)

# Mirrored patterns with all targets shifted by T: an odd, bias-free network
# cannot fit the shift, so every loss value carries T**2 on top.
flat = with_irreducible_offset(base, 1e5)
w0 = initial_params(spec.config, spec.d, 9, teacher_seed=8)

for mode in PrecisionMode:
    res = cg_minimize(NetworkProblem(spec.config, flat.astype(mode)), w0, CgConfig(budget=3000), mode)
    reducible = mse(spec.config, res.params.astype(np.float64), base.inputs, base.targets).mse
    print(f"{mode.value:6s}: {res.reason.value} after {res.final.iteration} iterations, "
          f"reducible mse {reducible:.3g}")
