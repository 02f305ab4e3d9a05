"""Peak power under space-time water-filling.

The drawback of averaging the power constraint over time is a fluctuating
transmit power. Three views of it here: the exact peak-to-average ratio
m*xi/gamma, the distribution of per-eigenvector power (a point mass at zero
plus a continuous part that concentrates at P/m as SNR grows), and the rate
left after truncating the allocation at a hard peak.
"""

import numpy as np

from mimocap import (
    InfeasibleError,
    papr,
    papr_bound,
    peak_limited_rate,
    power_density,
    st_capacity,
    st_water_level,
    wishart_density,
)

# --- exact PAPR for square Rayleigh channels ---------------------------------

print("PAPR (dB) under space-time water-filling, Rayleigh t=r=m")
print(f"{'SNR dB':>7} {'m=1':>7} {'m=2':>7} {'m=4':>7}")
for db in range(-10, 21, 5):
    g = 10 ** (db / 10)
    row = []
    for m in (1, 2, 4):
        xi = st_water_level(wishart_density(m, m), g)
        row.append(10 * np.log10(papr(xi, g, m)))
    print(f"{db:>7} {row[0]:>7.2f} {row[1]:>7.2f} {row[2]:>7.2f}")
print("(the bound 1 + (m/gamma) E[1/lam] does not apply here: "
      f"E[1/lam] diverges, bound = {papr_bound(wishart_density(2, 2), 1.0)})")

# --- per-eigenvector power density -------------------------------------------

dens = wishart_density(2, 2)
print("\nPer-eigenvector transmit power, 2x2 Rayleigh: mass at zero and")
print("where the continuous part sits relative to the per-mode budget P/m")
for db in (-10, 0, 10):
    g = 10 ** (db / 10)
    xi = st_water_level(dens, g)
    grid = np.linspace(xi * 1e-3, xi * 0.999, 400)
    pd = power_density(dens, xi, grid)
    mean_power = np.trapezoid(pd.grid * pd.pdf, pd.grid)
    print(f"  {db:>4} dB: atom at 0 = {pd.atom0:.3f}, "
          f"continuous mean = {mean_power:.3f}, target P/m = {g / 2:.3f}")

# --- peak-limited operation ---------------------------------------------------

m1 = wishart_density(1, 1)
budget = 0.1
xi_unc = st_water_level(m1, budget)
c_unc = st_capacity(m1, xi_unc)
print(f"\nSISO Rayleigh at P={budget}: unconstrained xi = {xi_unc:.4f}, "
      f"C = {c_unc:.6f} nats")
print("Truncating the allocation at a hard peak (eigenvalues that would "
      "exceed it are dropped):")
for peak in (2 * xi_unc, 0.8, 0.7, 0.6, 0.5):
    try:
        xi, rate = peak_limited_rate(m1, budget, peak)
        print(f"  peak {peak:6.3f}: xi = {xi:.4f}, rate = {rate:.6f} nats "
              f"({100 * rate / c_unc:.1f}% of unconstrained)")
    except InfeasibleError:
        print(f"  peak {peak:6.3f}: budget unreachable under this cap")
