"""
A k x n array of tub cells
==========================

All k cells share one feature cube and run in lockstep. The array
releases its k partial sums together, once the slowest multiplier (the
largest weight magnitude in the block) has finished.
"""

import numpy as np

from tubsim.pe_array import PcuConfig, cmac_compute, pcu_compute, step_trace
from tubsim.synth import make_rng

rng = make_rng(0)
cfg = PcuConfig(k=4, n=8, precision="int8")

weights = rng.integers(-20, 21, size=(cfg.k, cfg.n))
weights[0, :3] = 0
weights[2, 5] = -37  # the slowest multiplier: ceil(37 / 2) = 19 cycles
features = rng.integers(-128, 128, size=cfg.n)

tub = pcu_compute(weights, features, cfg)
binary = cmac_compute(weights, features, cfg)
print("tub partial sums   ", tub.partial_sums, f"({tub.compute_cycles} cycles + handshake)")
print("binary partial sums", binary.partial_sums, f"({binary.compute_cycles} cycle + handshake)")
print("silent PEs:", tub.silent_pe_count, "of", cfg.size)

# the trace shows the activity shrinking as short pulse trains run out
for c in step_trace(weights, features, cfg):
    line = f"cycle {c.cycle:2d}: {int(c.active.sum()):2d} active"
    if c.registers is not None:
        line += f", released {c.registers.tolist()}"
    print(line)

assert np.array_equal(tub.partial_sums, weights @ features)
