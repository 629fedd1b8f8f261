"""
Direct convolution from 1x1xn atoms
===================================

A layer is split into atoms: one output position, one filter tap and
one block of n channels against a group of k kernels. Each atom goes
through the array, and an accumulator plane sums the partial results.
"""

from collections import Counter

import numpy as np

from tubsim.dataflow import ConvShape, atomize, convolve, reference_convolution
from tubsim.pe_array import PcuConfig
from tubsim.synth import clustered, uniform

shape = ConvShape(C=12, H=8, W=8, K=20, R=3, S=3, padding=1)
weights = clustered(shape.weight_dims, magnitude=24, spread=10, seed=1)
acts = uniform(shape.activation_dims, seed=2)
cfg = PcuConfig(k=16, n=8)

atoms = list(atomize(shape, weights, acts, cfg.n, cfg.k))
print(len(atoms), "atoms; first:", atoms[0].group, atoms[0].position, atoms[0].r, atoms[0].s, atoms[0].block)
print("channels padded from", shape.C, "to", -(-shape.C // cfg.n) * cfg.n)

tub = convolve(shape, weights, acts, "tub", cfg)
binary = convolve(shape, weights, acts, "binary", cfg)
ref = reference_convolution(shape, weights, acts)
print("outputs agree:", np.array_equal(tub.output.data, ref) and np.array_equal(binary.output.data, ref))

print(f"tub: {tub.total_compute_cycles} compute cycles, {tub.total_cycles} with handshakes")
print(f"binary: {binary.total_compute_cycles} compute cycles, {binary.total_cycles} with handshakes")
common = Counter(tub.cycle_histogram).most_common(3)
print("most common per-atom latencies (cycles, atoms):", common)
