"""Fit the 2014-2016 Brent decline as a negative bubble and extend it to t_c.

The trend falls toward A as t approaches t_c, while the log-periodic ripples
speed up. Extending the curve to t_c shows where the fitted regime would end.
The extension is only an illustration and does not forecast prices.

Run:  python demos/01_major_bubble.py
"""
import numpy as np

from lpplfit import evaluate, from_decimal_year
from lpplfit.datasets import major_bubble
from lpplfit.fit_engine import fit
from lpplfit.model import extrema_times

series = major_bubble()
print(f"monthly Brent: {series.t.size} points, {from_decimal_year(series.t[0]):%Y-%m-%d} "
      f"to {from_decimal_year(series.t[-1]):%Y-%m-%d}")

fr = fit(series)
p = fr.params
print(f"\nbest fit: A={p.A:.2f}  m={p.m:.2f}  alpha={p.alpha:.3f}  C={p.C:.3f}  "
      f"omega={p.omega:.2f}  phi={p.phi:.3f}")
print(f"t_c = {p.t_c:.5f} = {from_decimal_year(p.t_c):%Y-%m-%d %H:%M}  (rmse {fr.rmse:.2f} USD)")

# ripple maxima inside the window, with the gaps between them shrinking
peaks = [x for x in extrema_times(p.omega, p.phi, p.t_c, range(-8, 8)) if series.t[0] <= x < p.t_c]
print("\nlog-periodic maxima:", ", ".join(f"{from_decimal_year(x):%Y-%m-%d}" for x in peaks))

# daily extension from the last observation to one day before t_c
grid = np.arange(series.t[-1], p.t_c - 1 / 365.25, 1 / 365.25)
curve = evaluate(p, grid)
print(f"\nextension: {grid.size} daily points, model falls from {curve[0]:.2f} to {curve[-1]:.2f} USD "
      f"(A = {p.A:.2f})")
