"""Rescaled resonances of Anderson boxes near E0 = 0 and a Poisson check.
Takes about a minute.  Run: python3 demos/random_poisson.py"""
import warnings

from lattice_resonances.random import AndersonEnsemble, lyapunov_curve, rescale, resonances_random
from lattice_resonances.spectral import dirichlet_eigen
from lattice_resonances.stats import box_counts, poisson_gof

warnings.simplefilter("ignore")
ens = AndersonEnsemble(("uniform", -2.0, 2.0), 11)
cur = lyapunov_curve(ens)
E0, L = 0.0, 300
n0, rho0 = float(cur.n_at(E0)), float(cur.rho_at(E0))
print(f"n(E0)={n0:.4f}  rho(E0)={rho0:.4f}")

pts = []
for r in range(150):
    s = dirichlet_eigen(ens.potential(r, L), L, with_b=False)
    res, _ = resonances_random(s, "halfline", I=(E0 - 0.1, E0 + 0.1))
    pts.append(rescale(res, E0, L, 1.0, n0, rho0, realization=r))

boxes = [(-2, 0, 0.2, 0.5), (0, 2, 0.2, 0.5), (-2, 0, 0.5, 0.8), (0, 2, 0.5, 0.8)]
rep = poisson_gof(box_counts(pts, boxes))
for i, b in enumerate(rep.boxes):
    print(f"box {i}: expected {b.mu:.2f}  mean {b.mean:.3f}  variance {b.variance:.3f}")
print(f"combined chi2 {rep.chi2:.2f} on {rep.dof} dof, p = {rep.pvalue:.3f}")
