"""Forward run of the shipped default scenario.

A tumour disc sits in a uniform nutrient bath. Nutrient is supplied at a
constant rate and no radiotherapy is applied. We watch the mass balance, the
energy and how close the order parameter comes to the pure phases.
"""
import numpy as np

from nlococ.io import load_scenario, shipped_scenario

scn = load_scenario(shipped_scenario("default"))
model = scn.model()
print(f"grid {scn.grid.cells}, {scn.time.steps} steps of dt = {scn.time.dt:g}")

traj = model.simulate(scn.phi0, scn.sigma0, scn.controls, scn.time)
mon = traj.monitors

# The total mass of phi + sigma changes only through the controls. The ledger
# compares it against the accumulated source and should sit at round-off.
print(f"largest mass-ledger entry: {np.max(np.abs(mon['mass_ledger'])):.2e}")

# Tumour volume, read as the measure of {phi > 0}, and the energy over time.
vol = scn.grid.cell_volume
for n in range(0, scn.time.steps + 1, 5):
    area = vol * np.count_nonzero(traj.phi[n] > 0)
    print(f"t = {scn.time.nodes[n]:.3f}  tumour area {area:.4f}  energy {mon['energy'][n]:.6f}  Newton its {mon['newton_iterations'][n]:.0f}")

# With the logarithmic potential the solution must stay strictly inside (-1, 1).
print(model.separation_report(traj))
