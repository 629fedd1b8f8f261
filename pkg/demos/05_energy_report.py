"""
Energy and iso-area throughput
==============================

Energy per partial-sum set is cycles x clock period x power. The binary
array always takes one cycle; the tub array takes the profiled average.
Area buys the tub design back some throughput: several tub arrays fit
where one binary array would sit.
"""

from tubsim.perf import (
    default_calibration,
    energy,
    iso_area_throughput,
    project_iso_area_throughput,
    report_to_csv,
    workload_report,
)
from tubsim.profiler import build_profile, tile_weights
from tubsim.synth import tile_max

cal = default_calibration()
binary, tub = cal.pair("int8", 16, 16)

for cycles in (1, 16, 31, 33, 64):
    print(f"tub at {cycles:2d} cycles: {energy(tub, cycles, 4.0).energy_pj:7.2f} pJ "
          f"(binary {energy(binary, 1, 4.0).energy_pj:.2f} pJ)")

iso = iso_area_throughput(binary, tub)
print(f"iso-area: ratio {iso.ratio:.3f}, {iso.multiple} whole tub arrays per binary footprint")

for bits in ("int4", "int8"):
    p = project_iso_area_throughput(cal, bits)
    print(f"{bits} single cell: {p.base_ratio:.2f}x at n={p.n_to}, projected {p.projected_ratio:.2f}x "
          f"at n={p.n_projected}")

profile = build_profile(tile_weights(tile_max((64, 64), [64, 68], 6, seed=5)))
report = workload_report(profile, binary, tub, 4.0, cal)
print(report_to_csv(report))
for note in report.notes:
    print("note:", note)
