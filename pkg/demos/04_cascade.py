"""Peel faster oscillations out of the sub-bubble residual.

Each step fits a pure log-periodic layer to whatever the previous step left
over. If the nesting is real, every layer points to the same t_c. Here the
layers drift by months, so this data gives no such nesting.

Run:  python demos/04_cascade.py
"""
from lpplfit.cascade import run_cascade
from lpplfit.datasets import sub_bubble

res = run_cascade(sub_bubble())
base = res.base_fit.params.t_c
print(f"base t_c {base:.4f}, rss {res.base_fit.rss:.1f}")
for layer in res.layers:
    lp = layer.layer_params
    print(f"  depth {layer.depth}: t_c {lp.t_c:.4f} ({(lp.t_c - base) * 365.25:+5.0f} d)  omega {lp.omega:6.1f}"
          f"  beta {lp.beta:+.2f}  rss reduction {layer.rss_reduction:.1%}")
print(f"t_c spread {res.tc_spread * 365.25:.0f} days; stopped: {res.stop_reason}")
