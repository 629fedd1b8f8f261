import itertools

import numpy as np
import pytest

from tubsim.dataflow import (
    AccumulatorPlane,
    ConvShape,
    atomize,
    convolve,
    reference_convolution,
    transpose_feed,
)
from tubsim.errors import ConfigurationError, RangeError, ValidationError
from tubsim.pe_array import PcuConfig, pcu_compute


def random_case(rng, bits=4, C=None, K=None, R=None, H=None, W=None, stride=None, padding=None):
    lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    C = C or int(rng.integers(1, 9))
    K = K or int(rng.integers(1, 33))
    R = R or int(rng.choice([1, 3]))
    H = H or int(rng.integers(R, 9))
    W = W or int(rng.integers(R, 9))
    stride = stride or int(rng.integers(1, 3))
    padding = int(rng.integers(0, 2)) if padding is None else padding
    shape = ConvShape(C, H, W, K, R, R, stride, padding)
    w = rng.integers(lo, hi + 1, shape.weight_dims, endpoint=False)
    a = rng.integers(lo, hi + 1, shape.activation_dims, endpoint=False)
    return shape, w, a


def test_shape_output_dims():
    s = ConvShape(3, 7, 9, 4, 3, 3, stride=(2, 1), padding=(1, 0))
    assert (s.out_h, s.out_w) == ((7 + 2 - 3) // 2 + 1, (9 - 3) // 1 + 1)


@pytest.mark.parametrize("kwargs", [
    dict(C=0), dict(R=9), dict(stride=0), dict(padding=-1),
])
def test_shape_validation(kwargs):
    base = dict(C=2, H=4, W=4, K=2, R=3, S=3)
    base.update(kwargs)
    with pytest.raises(ValidationError):
        ConvShape(**base)


def test_shape_from_tensors_mismatch():
    with pytest.raises(ValidationError):
        ConvShape.from_tensors(np.zeros((2, 3, 1, 1)), np.zeros((4, 2, 2)))


def test_atomize_single_atom():
    shape = ConvShape(4, 1, 1, 1, 1, 1)
    atoms = list(atomize(shape, np.ones((1, 4, 1, 1)), np.arange(4).reshape(4, 1, 1), n=4))
    assert len(atoms) == 1
    assert atoms[0].features.tolist() == [0, 1, 2, 3]
    assert atoms[0].weights.shape == (1, 4)


def test_atomize_count_c32_n16_3x3():
    shape = ConvShape(32, 3, 3, 1, 3, 3)
    atoms = list(atomize(shape, np.zeros(shape.weight_dims), np.zeros(shape.activation_dims), n=16))
    assert shape.out_h * shape.out_w == 1
    assert len(atoms) == 3 * 3 * 2


def test_atomize_order_and_channel_padding(rng):
    shape = ConvShape(5, 4, 4, 3, 3, 3, padding=1)
    w = rng.integers(-8, 8, shape.weight_dims)
    a = rng.integers(-8, 8, shape.activation_dims)
    atoms = list(atomize(shape, w, a, n=4, k=2))
    keys = [(t.group, t.position, t.r, t.s, t.block) for t in atoms]
    assert keys == sorted(keys)
    assert len(atoms) == 2 * 16 * 9 * 2
    for t in atoms:
        # channels 5..7 are padding
        if t.block == 1:
            assert not t.features[1:].any()
            assert not t.weights[:, 1:].any()
        # the second kernel group only has one real kernel
        if t.group == 1:
            assert not t.weights[1].any()


def test_padded_atoms_carry_zero_features(rng):
    shape = ConvShape(2, 3, 3, 2, 3, 3, padding=1)
    w = rng.integers(-8, 8, shape.weight_dims)
    a = rng.integers(-8, 8, shape.activation_dims)
    plane = AccumulatorPlane(shape.K, shape.out_h, shape.out_w)
    for t in atomize(shape, w, a, n=2):
        oy, ox = t.position
        y, x = oy + t.r - 1, ox + t.s - 1
        if not (0 <= y < 3 and 0 <= x < 3):
            assert not t.features.any()
        plane.accumulate(t.group, shape.K, oy, ox, pcu_compute(t.weights, t.features, PcuConfig(2, 2, "int4")).partial_sums)
    assert np.array_equal(plane.psums, reference_convolution(shape, w, a))
    assert plane.atom_count == 9 * 9


def test_transpose_feed_one_hot():
    f = np.array([3, -1, 4, 1])
    w = np.eye(4, dtype=int)[[2, 0, 3]]
    feed = transpose_feed(w, f)
    r = pcu_compute(feed.weights, feed.features, PcuConfig(3, 4, "int4"))
    assert r.partial_sums.tolist() == [4, 3, 1]


def test_transpose_feed_matches_matvec(rng):
    for _ in range(50):
        w = rng.integers(-8, 8, (4, 4))
        f = rng.integers(-8, 8, 4)
        feed = transpose_feed(w, f)
        expect = [sum(int(w[i, j]) * int(f[j]) for j in range(4)) for i in range(4)]
        assert feed.elementwise().sum(axis=1).tolist() == expect
        assert pcu_compute(feed.weights, feed.features, PcuConfig(4, 4, "int4")).partial_sums.tolist() == expect


def test_transpose_feed_all_ones():
    f = np.array([1, -2, 3, 5, -7])
    feed = transpose_feed(np.ones((3, 5)), f)
    r = pcu_compute(feed.weights, feed.features, PcuConfig(3, 5, "int8"))
    assert r.partial_sums.tolist() == [f.sum()] * 3


def test_transpose_feed_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        transpose_feed(np.ones((3, 4)), np.ones(5))


def test_delta_kernel_is_identity(rng):
    shape = ConvShape(3, 5, 5, 3, 3, 3, padding=1)
    w = np.zeros(shape.weight_dims, dtype=int)
    for c in range(3):
        w[c, c, 1, 1] = 1
    a = rng.integers(-128, 128, shape.activation_dims)
    out = convolve(shape, w, a, "tub", PcuConfig(4, 4)).output.data
    assert np.array_equal(out, a)
    shape = ConvShape(3, 5, 5, 3, 3, 3, padding=0)
    out = convolve(shape, w, a, "tub", PcuConfig(4, 4)).output.data
    assert np.array_equal(out, a[:, 1:-1, 1:-1])


def test_convolve_small_random_cases(rng):
    for _ in range(100):
        shape, w, a = random_case(rng, 4, C=4, H=5, W=5, K=2, R=3, stride=1)
        ref = reference_convolution(shape, w, a)
        assert np.array_equal(convolve(shape, w, a, "tub", PcuConfig(2, 4, "int4")).output.data, ref)


def test_engines_agree_but_cycles_differ(rng):
    shape, w, a = random_case(rng, 8, C=8, H=6, W=6, K=20, R=3)
    w[0, 0, 0, 0] = 100
    cfg = PcuConfig(16, 8)
    t = convolve(shape, w, a, "tub", cfg)
    b = convolve(shape, w, a, "binary", cfg)
    assert t.output == b.output
    assert b.total_compute_cycles == b.atom_count == t.atom_count
    assert t.total_compute_cycles != b.total_compute_cycles


def test_cycle_decomposition(rng):
    shape, w, a = random_case(rng, 8, C=6, K=20)
    cfg = PcuConfig(16, 4, handshake_overhead_cycles=3)
    t = convolve(shape, w, a, "tub", cfg)
    expected = 0
    count = 0
    for atom in atomize(shape, w, a, cfg.n, cfg.k):
        expected += (int(np.abs(atom.weights).max()) + 1) // 2
        count += 1
    assert t.total_compute_cycles == expected
    assert t.atom_count == count
    assert t.total_cycles == expected + 3 * count
    assert sum(t.cycle_histogram.values()) == count
    assert sum(c * f for c, f in t.cycle_histogram.items()) == expected


def test_padding_neutral_for_interior(rng):
    shape0, w, a = random_case(rng, 8, C=3, H=7, W=7, K=4, R=3, stride=1, padding=0)
    out0 = convolve(shape0, w, a).output.data
    for p in (1, 2):
        shape = ConvShape(3, 7, 7, 4, 3, 3, 1, p)
        out = convolve(shape, w, a).output.data
        assert np.array_equal(out[:, p:p + out0.shape[1], p:p + out0.shape[2]], out0)


def test_atom_order_independence(rng):
    shape, w, a = random_case(rng, 4, C=5, K=3, R=3)
    cfg = PcuConfig(3, 4, "int4")
    atoms = list(atomize(shape, w, a, cfg.n, cfg.k))
    sums = [pcu_compute(t.weights, t.features, cfg).partial_sums for t in atoms]
    outs = []
    for perm in (range(len(atoms)), rng.permutation(len(atoms)), reversed(range(len(atoms)))):
        plane = AccumulatorPlane(shape.K, shape.out_h, shape.out_w)
        for i in perm:
            plane.accumulate(atoms[i].group, cfg.k, *atoms[i].position, sums[i])
        outs.append(plane.psums)
    assert all(np.array_equal(o, outs[0]) for o in outs)
    assert np.array_equal(outs[0], reference_convolution(shape, w, a))


def test_reference_trivial_cases(rng):
    shape = ConvShape(3, 4, 4, 2, 3, 3)
    a = rng.integers(-8, 8, shape.activation_dims)
    assert not reference_convolution(shape, np.zeros(shape.weight_dims), a).any()
    shape = ConvShape(1, 4, 4, 1, 1, 1)
    a = rng.integers(-8, 8, shape.activation_dims)
    assert np.array_equal(reference_convolution(shape, np.full((1, 1, 1, 1), 3), a), 3 * a)


def test_exhaustive_tiny_int2():
    # every shape with C, H, W, K, R, S <= 3 (square kernels), stride 1, plus random int2 data
    rng = np.random.default_rng(7)
    checked = 0
    for C, H, W, K, R, S in itertools.product(range(1, 4), repeat=6):
        if R > H or S > W:
            continue
        shape = ConvShape(C, H, W, K, R, S)
        w = rng.integers(-2, 2, shape.weight_dims)
        a = rng.integers(-2, 2, shape.activation_dims)
        out = convolve(shape, w, a, "tub", PcuConfig(2, 2, "int2")).output.data
        assert np.array_equal(out, reference_convolution(shape, w, a))
        checked += 1
    assert checked > 300


def test_exhaustive_int2_values_single_atom():
    # every int2 weight/feature pair pattern for a 1x1 conv with C=2, K=1
    shape = ConvShape(2, 1, 1, 1, 1, 1)
    vals = range(-2, 2)
    for w0, w1, f0, f1 in itertools.product(vals, repeat=4):
        w = np.array([w0, w1]).reshape(1, 2, 1, 1)
        a = np.array([f0, f1]).reshape(2, 1, 1)
        out = convolve(shape, w, a, "tub", PcuConfig(1, 2, "int2")).output.data
        assert out.item() == w0 * f0 + w1 * f1


def test_convolve_rejects_out_of_range():
    shape = ConvShape(1, 2, 2, 1, 1, 1)
    with pytest.raises(RangeError):
        convolve(shape, np.full((1, 1, 1, 1), 8), np.ones((1, 2, 2)), "tub", PcuConfig(1, 1, "int4"))


def test_convolve_rejects_unknown_engine():
    shape = ConvShape(1, 2, 2, 1, 1, 1)
    with pytest.raises(ValidationError):
        convolve(shape, np.ones((1, 1, 1, 1)), np.ones((1, 2, 2)), "analog")


def test_histograms_count_every_atom(rng):
    shape, w, a = random_case(rng, 8, C=4, K=5, R=3)
    r = convolve(shape, w, a, "tub", PcuConfig(4, 4))
    assert sum(r.magnitude_histogram.values()) == r.atom_count
    assert {(m + 1) // 2 for m in r.magnitude_histogram} == set(r.cycle_histogram)
