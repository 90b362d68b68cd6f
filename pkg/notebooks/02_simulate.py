#!/usr/bin/env python3
"""
Steady-state and extended-period simulation, plus rule validation.

Solves the small test networks, runs a 6 hour pump/tank simulation and
shows how a scenario that violates the pressure window is rejected.
"""

import numpy as np

from wdngen.hydraulics import default_rules, simulate_scenario, solve_steady_state
from wdngen.inp_io import convert_to_si, load_bundled

for name in ("single_pipe", "y_net", "prv_net"):
    m = convert_to_si(load_bundled(name))
    st = solve_steady_state(m)
    heads = ", ".join(f"{n}={st.node_value('head', n):.3f}" for n in m.node_names)
    print(f"{name:12s} {heads}")

# the pressure reducing valve pins the head just downstream of it
m = convert_to_si(load_bundled("prv_net"))
print("PRV downstream pressure:", round(solve_steady_state(m).node_value("pressure", "J2"), 6), "m")

# extended period: the tank fills while the pump runs
tank_net = convert_to_si(load_bundled("pump_tank"))
res = simulate_scenario(tank_net, rules=default_rules())
t = tank_net.node_names.index("T1")
print("tank head per step:", np.round(res.outputs["head"][:, t], 3))
print("tank volume per step:", np.round(res.tank_volume[:, 0], 2))
print("valid:", res.valid, res.flags)

# the Hanoi baseline passes; a tighter pressure window rejects it
hanoi = convert_to_si(load_bundled("hanoi"))
ok = simulate_scenario(hanoi)
tight = simulate_scenario(hanoi, rules=default_rules(pressure_range=(35.0, 151.0)))
p = ok.outputs["pressure"][:, ok.junction_mask]
print(f"Hanoi min pressure {p.min():.2f} m -> valid {ok.valid}; with a 35 m floor -> {tight.valid} ({tight.failure_reason})")
