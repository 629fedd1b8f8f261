"""
Multiplying with a pulse stream
===============================

One operand stays binary, the other becomes a train of pulses. Every
pulse adds the binary operand (twice, since each pulse is worth 2) into
an accumulator. Odd magnitudes end on a pulse worth 1.
"""

from tubsim.arith import (
    TubMultiplier,
    decode,
    encode_2s_unary,
    unary_worst_case_cycles,
    worst_case_cycles,
)

# 13 needs 7 pulses: six worth 2 and a final one worth 1
stream = encode_2s_unary(-13)
print(stream, "->", list(stream.pulses()), "decodes to", decode(stream))

# drive the multiplier cycle by cycle and watch the accumulator move
mult = TubMultiplier(9, stream)
while not mult.done:
    addend = mult.step()
    print(f"cycle {mult.cycle}: added {addend:+d}")
product = mult.run()
print("product", product.value, "after", product.cycles, "cycles")

# zero never pulses, so the multiplier never touches its accumulator
idle = TubMultiplier(100, encode_2s_unary(0))
print("zero weight:", idle.run(), "writes:", idle.accumulator_writes)

# halving the pulse count matters most at the top of the range
for bits in (4, 8):
    print(f"int{bits}: worst case {worst_case_cycles(bits)} cycles per product, "
          f"1s-unary needs {unary_worst_case_cycles(bits)}")
