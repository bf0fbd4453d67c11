"""How sharp is the sub-bubble t_c? Scan it and watch the phase.

The scan refits the model with t_c held fixed, one day at a time on either
side of the best value. At each step it scores how well the model
oscillation agrees with the data over the last two log-periods. Once a fixed
t_c pushes the model into antiphase with the data, that t_c is rejected.
The window is the range that stays in phase. It is not a statistical
confidence interval.

Run:  python demos/03_singularity_window.py
"""
from lpplfit import from_decimal_year
from lpplfit.datasets import sub_bubble
from lpplfit.singularity_window import estimate_window

w = estimate_window(sub_bubble())
fmt = "%Y-%m-%d"
print(f"best t_c {from_decimal_year(w.tc_best):{fmt}}")
print(f"window   {from_decimal_year(w.tc_low):{fmt}} .. {from_decimal_year(w.tc_high):{fmt}}"
      f"{'  (upper side open: still in phase at the scan limit)' if w.open_high else ''}")
print("\n   t_c       rss    phase")
for pt in w.scan[::7]:
    bar = "#" * int(max(pt.phase_score, 0) * 20) if pt.phase_score == pt.phase_score else ""
    print(f"{pt.t_c:9.4f} {pt.rss:8.1f} {pt.phase_score:+6.2f} {bar}")
