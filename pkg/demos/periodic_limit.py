"""Resonances of a truncated period-2 lattice against their closed-form
approximations.  Run: python3 demos/periodic_limit.py"""
import math

from lattice_resonances.periodic import c_functions, predict_resonances
from lattice_resonances.resonances import find_resonances
from lattice_resonances.spectral import PotentialSpec, dirichlet_eigen

V = [0.0, 1.0]
cf = c_functions(V, 0)
print("bands:", [(round(a, 4), round(b, 4)) for a, b in cf.bs.bands])

for L in (120, 240, 480):
    s = dirichlet_eigen(PotentialSpec.periodic(V), L)
    pr = predict_resonances(cf, 0, L, (-1.4, -0.15), "halfline", lambdas=s.lambdas)
    rs = find_resonances(s, "halfline", seeds=[p.ztilde for p in pr], certify=False)
    worst = max(min(abs(r.energy - p.ztilde) for r in rs) for p in pr)
    # the widths sit on a curve of height ~ 1/L
    print(f"L={L:4d}  {len(pr)} resonances  max|z - z~| * L log L = {worst * L * math.log(L):.3f}"
          f"  mean Im * L = {sum(p.ztilde.imag for p in pr) / len(pr) * L:.3f}")
