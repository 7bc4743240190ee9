"""
A teacher-student regression task
=================================

A random "teacher" network labels uniform random inputs, so a student of the
same shape can reach zero loss. We look at what the scaling factor ``d`` does
to the hidden layer.
"""

import numpy as np

from cgbench import TaskSpec, generate_task, mse, param_count
from cgbench.network import ActivationKind, activation_derivative, hidden_preactivations

# A moderate task: symmetric sigmoid (tanh), weights scaled with d = 2.
spec = TaskSpec.build(1000, 100, [150], "moderate", patterns=300, seed=0)
dataset, teacher = generate_task(spec)
print("parameters:", param_count(spec.config), " output variance:", round(dataset.var_y, 4))

# The teacher fits its own data exactly.
print("mse at teacher:", mse(spec.config, teacher, dataset.inputs, dataset.targets).mse)

# Hidden pre-activations are close to normal with standard deviation d/3 ...
pre = hidden_preactivations(spec.config, teacher, dataset.inputs)
print("pre-activation std: %.3f (d/3 = %.3f)" % (pre.std(), spec.d / 3))

# ... so about 5% of them sit beyond 2 sigma, where the slope of the
# activation is small. Larger d pushes more units into saturation.
for name, act in [("tanh", ActivationKind.symmetric()), ("leaky", ActivationKind.leaky(0.05))]:
    for d in (2, 4):
        slope = activation_derivative(act, np.float64(2 * d / 3))
        print(f"{name:5s} d={d}: derivative at 2 sigma = {slope:.3f}")
