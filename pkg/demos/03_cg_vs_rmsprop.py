"""
Conjugate gradient against RMSprop
==================================

Both optimizers get the same budget of 3000 epoch equivalents on a
~30,000-parameter task. CG uses a Brent line search; RMSprop takes one
full-batch step per epoch.
"""

from cgbench.harness import RunConfig, report, run_experiment, sized_task, superlinearity_diagnostic

task = sized_task(30_000, 1, "moderate", patterns=200, seed=0)
arms = [("cg", "double"), ("cg", "single"), ("rmsprop", "single"), ("rmsprop", "double")]
results = [run_experiment(RunConfig(f"{o}-{p}", task, o, p)) for o, p in arms]

print(report(results).format())

# On a log scale the CG loss falls along a roughly straight line: each
# iteration removes a fixed fraction of the remaining error.
cg = results[0]
for lo, hi in [(0, 1000), (1000, 3000)]:
    fit = superlinearity_diagnostic(cg.trace, lo, hi)
    print(f"cg-double epochs {lo}-{hi}: {fit.slope_per_1000:+.2f} decades per 1000 (R2 {fit.r2:.3f})")
