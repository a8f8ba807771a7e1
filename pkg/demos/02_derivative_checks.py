"""Checking the linearised state and the adjoint gradient.

Both derivatives are exact derivatives of the discrete scheme. The Taylor
remainder must therefore shrink like eps^2 and the adjoint gradient must
match central differences down to the truncation/round-off crossover.
"""
import numpy as np

from nlococ import ControlPerturbation, ReducedCost, fd_gradient_oracle, taylor_test
from nlococ.io import load_scenario, shipped_scenario

scn = load_scenario(shipped_scenario("default"))
model = scn.model()
rng = np.random.default_rng(scn.seed)

# Taylor test of the control-to-state map along a random direction.
d = ControlPerturbation.random(scn.grid, scn.time, rng)
report = taylor_test(model, scn.phi0, scn.sigma0, scn.controls, d, scn.time, (1e-1, 1e-2, 1e-3, 1e-4))
print("Taylor remainder of the linearised state")
print(report)

# Adjoint gradient of the tracking cost against central differences.
rc = ReducedCost(model, scn.phi0, scn.sigma0, scn.time, scn.weights, scn.targets)
_, grad, _, _ = rc.gradient(scn.controls)
for i in range(2):
    direction = ControlPerturbation.random(scn.grid, scn.time, rng).as_controls()
    print(f"\ndirection {i}")
    print(fd_gradient_oracle(rc, scn.controls, direction, gradient=grad))
