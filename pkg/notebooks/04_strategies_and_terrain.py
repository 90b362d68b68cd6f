#!/usr/bin/env python3
"""
Sampling strategies side by side on the Hanoi pipes and junctions.

Applies each strategy to the same baseline and prints a summary; renders a
diamond-square height map with the junction elevations sampled from it.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from wdngen.inp_io import convert_to_si, load_bundled
from wdngen.parameters import baseline_values
from wdngen.profiler import profile_network
from wdngen.strategies import SamplingEntry, StrategyContext, apply_strategy, diamond_square, terrain_elevations

OUT = Path(__file__).resolve().parent / "out"
OUT.mkdir(exist_ok=True)

hanoi = convert_to_si(load_bundled("hanoi"))
prof = profile_network(hanoi)
ctx = StrategyContext(model=hanoi, profile=prof)
rng = np.random.default_rng(0)

base = baseline_values(hanoi, "pipe_diameter")
print(f"baseline diameters: min {base.min():.3f} max {base.max():.3f}")
for kind, lb, ub in (("keep", 0, 1), ("sampling", 0.05, 0.2), ("perturbation", 0, 0.3),
                     ("factor", 0.4, 0.6), ("substitute", 0, 1)):
    e = SamplingEntry("pipe_diameter", kind, lb, ub)
    v = apply_strategy(e, base, prof["pipe_diameter"], rng, ctx)
    print(f"{kind:13s} min {v.min():.3f}  max {v.max():.3f}  distinct {len(np.unique(np.round(v, 6)))}")

grid = diamond_square(7, (0.0, 1.0), 0.5, np.random.default_rng(3))
names = [j.name for j in hanoi.junctions]
z = terrain_elevations(hanoi.coordinates, rng=np.random.default_rng(3), names=names)
xy = np.array([hanoi.coordinates[n] for n in names])

fig, axes = plt.subplots(1, 2, figsize=(10, 4))
axes[0].imshow(grid, cmap="terrain")
axes[0].set_title("height map (129 x 129)")
sc = axes[1].scatter(xy[:, 0], xy[:, 1], c=[z[n] for n in names], cmap="terrain")
fig.colorbar(sc, ax=axes[1])
axes[1].set_title("junction elevations drawn from it")
fig.tight_layout()
fig.savefig(OUT / "terrain.png", dpi=100)
print("saved", OUT / "terrain.png")
