"""The non-local interaction and the double-well potentials.

For each kernel family we print the bound a* of a(x) = (J*1)(x) and check the
coercivity constant c0 = A min F'' + B min a. That constant must exceed chi^2
for the model to be well posed. We then compare the Yosida approximation of
the logarithmic potential's convex part with the exact derivative.
"""
import numpy as np

from nlococ import GridSpec, KernelSpec, Logarithmic, ModelParams, RegularQuartic, build_kernel_table, check_coercivity, yosida_prime

grid = GridSpec((1.0, 1.0), (32, 32))
params = ModelParams(A=1.0, B=2.0, chi=0.1)
kernels = [
    KernelSpec("gaussian", width=0.1),
    KernelSpec("constant", value=1.0),
    KernelSpec("truncated_newton", delta=0.05),
    KernelSpec("mollifier", eps=0.2),
]
for spec in kernels:
    table = build_kernel_table(spec, grid)
    for pot in (Logarithmic(0.3, 0.6), RegularQuartic()):
        rep = check_coercivity(table, pot, params)
        print(f"{spec.family:>16s} a* = {table.a_star:7.4f}  {pot.kind:>15s}: {rep}")

# The Yosida derivative is finite on the whole line and tends to F1' as lambda -> 0.
F = Logarithmic(0.3, 0.6)
s = np.array([0.0, 0.5, 0.9, 0.99])
print("\n   s      F1'(s)   " + "  ".join(f"lambda={lam:g}" for lam in (1e-1, 1e-2, 1e-3)))
for x in s:
    vals = "  ".join(f"{yosida_prime(F, lam, x):10.6f}" for lam in (1e-1, 1e-2, 1e-3))
    print(f"{x:5.2f}  {float(F.f1(x, 1)):9.6f}  {vals}")
