"""
Profiling weight tensors for latency
====================================

Array latency depends only on the largest magnitude in each k x n block
of weights. Max-pooling the weight matrix over those blocks predicts
the cycle cost of a workload without running the simulator.
"""

import numpy as np

from tubsim.dataflow import ConvShape
from tubsim.pe_array import PcuConfig
from tubsim.profiler import build_profile, cross_check_profile_against_sim, profile_to_csv, tile_weights
from tubsim.synth import make_rng, sparse, tile_max

# a tensor engineered so half the tiles peak at 64 and half at 68
engineered = tile_max((128, 128), [64, 68], zeros_per_tile=6, seed=3)
profile = build_profile(tile_weights(engineered))
print(f"{profile.tile_count} tiles, {profile.average_cycles} average cycles, "
      f"{profile.average_silent_pes} silent PEs per tile")
print("non-empty histogram bins:", {m: f for m, f in profile.histogram.items() if f})

# word sparsity is a plain fraction of exact zeros
print("sparsity:", build_profile(tile_weights(sparse((80, 80), 0.0225))).word_sparsity_percent, "%")

# the first rows of the CSV export
print("\n".join(profile_to_csv(profile).splitlines()[:3]))

# profiler and simulator must see the same blocks
rng = make_rng(4)
shape = ConvShape(20, 5, 5, 24, 3, 3, padding=1)
w = rng.integers(-128, 128, shape.weight_dims)
w[rng.random(shape.weight_dims) < 0.5] = 0
rep = cross_check_profile_against_sim(w, rng.integers(-128, 128, shape.activation_dims), shape, PcuConfig())
print("profile and simulator histograms agree:", rep.agree)
print("mean cycles per block:", np.average(list(rep.sim_cycles), weights=list(rep.sim_cycles.values())))
