#!/usr/bin/env python3
"""
Tune sampling bounds with the per-parameter particle swarm.

On the three-junction toy network, junction elevations start in a range
where most scenarios lose pressure.  The swarm moves the bounds until
almost every scenario passes while keeping the range wide.
"""

import numpy as np

from wdngen.hspo import SwarmConfig, hspo_run
from wdngen.inp_io import convert_to_si, load_bundled
from wdngen.strategies import SamplingConfig, SamplingEntry

toy = convert_to_si(load_bundled("toy3"))
start = SamplingConfig({"junction_elevation": SamplingEntry("junction_elevation", "sampling", 0.3, 0.5)})
e = start["junction_elevation"]
print("start bounds (m):", tuple(round(v, 2) for v in e.physical_bounds))

res = hspo_run(toy, start, SwarmConfig(swarm_size=10, max_iter=20, n_cases=100), max_epochs=3,
               rng=np.random.default_rng(0))
for i, h in enumerate(res.history):
    print(f"epoch {i}: f_pso {h.f_pso:.4f}  f_success {h.f_success:.2f}  f_ubiqr {h.f_ubiqr:.3f}  f_range {h.f_range:.3f}")
e = res.config["junction_elevation"]
print("tuned bounds (m):", tuple(round(v, 2) for v in e.physical_bounds))
print()
print(res.config.to_yaml())
