import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from epsedge.edges import kernel_for_thickness
from epsedge.errors import EmptySourceSet, FormatError, InvalidInput
from epsedge.imagecore import (LabelMap, connected_components, convolve_same,
                               correlate_replicate, correlate_replicate_adjoint, exact_edt,
                               load_label_pgm, load_pgm, load_soft_pgm, quantize_soft,
                               read_pgm_raw, save_pgm, write_pgm_raw)

from oracles import correlate_brute, edt_brute


def masks(max_side=16, min_side=1):
    shapes = st.tuples(st.integers(min_side, max_side), st.integers(min_side, max_side))
    return shapes.flatmap(lambda s: arrays(bool, s))


# ------------------------------------------------------------------ LabelMap

def test_labelmap_rejects_out_of_range_ids():
    with pytest.raises(InvalidInput):
        LabelMap(np.array([[0, 3]]), 3)
    LabelMap(np.array([[0, 255]]), 3)


def test_labelmap_is_immutable():
    lm = LabelMap(np.zeros((2, 2), int), 2)
    with pytest.raises(ValueError):
        lm.data[0, 0] = 1


# --------------------------------------------------------------- convolution

def test_uniform_masks_have_zero_response():
    k = kernel_for_thickness(2)
    assert not convolve_same(np.ones((8, 8), bool), k).any()
    assert not convolve_same(np.zeros((8, 8), bool), k).any()


def test_square_response_on_two_rings():
    m = np.zeros((16, 16), bool)
    m[4:12, 4:12] = True
    resp = convolve_same(m, kernel_for_thickness(1))
    ring = ndimage.binary_dilation(m) & ~ndimage.binary_erosion(m)
    # corners of the dilated ring have no 4-neighbour inside the square
    outer_corners = np.zeros_like(m)
    outer_corners[[3, 3, 12, 12], [3, 12, 3, 12]] = True
    assert np.array_equal(resp != 0, ring & ~outer_corners)
    assert np.array_equal(resp, correlate_brute(m.astype(int), kernel_for_thickness(1).weights))


def test_empty_mask_is_invalid():
    with pytest.raises(InvalidInput):
        convolve_same(np.zeros((0, 4), bool), kernel_for_thickness(1))


@settings(max_examples=60, deadline=None)
@given(masks(12), st.integers(1, 4))
def test_convolution_matches_direct_loop(m, d):
    k = kernel_for_thickness(d).weights
    assert np.array_equal(convolve_same(m, k), correlate_brute(m.astype(np.int64), k))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_correlation_adjoint_identity(seed, d):
    rng = np.random.default_rng(seed)
    k = kernel_for_thickness(d).weights.astype(float)
    x = rng.normal(size=(2, 7, 9))
    g = rng.normal(size=(2, 7, 9))
    lhs = (correlate_replicate(x, k) * g).sum()
    rhs = (x * correlate_replicate_adjoint(g, k)).sum()
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


# ------------------------------------------------------------------- EDT

def test_edt_row():
    src = np.zeros((1, 5), bool)
    src[0, 0] = True
    assert np.array_equal(exact_edt(src), [[0, 1, 2, 3, 4]])


def test_edt_345():
    src = np.zeros((5, 5), bool)
    src[0, 0] = True
    assert exact_edt(src)[4, 3] == 5.0


def test_edt_needs_a_source():
    with pytest.raises(EmptySourceSet):
        exact_edt(np.zeros((3, 3), bool))


@settings(max_examples=100, deadline=None)
@given(masks(16).filter(lambda m: m.any()))
def test_edt_matches_brute_force(m):
    assert np.abs(exact_edt(m) - edt_brute(m)).max() <= 1e-9


@settings(max_examples=30, deadline=None)
@given(masks(32, 2).filter(lambda m: m.any()))
def test_edt_is_one_lipschitz(m):
    d = exact_edt(m)
    assert (d[m] == 0).all()
    assert np.abs(np.diff(d, axis=0)).max(initial=0) <= 1 + 1e-12
    assert np.abs(np.diff(d, axis=1)).max(initial=0) <= 1 + 1e-12


# ------------------------------------------------------ connected components

def _flood_fill_count(m, conn):
    seen = np.zeros_like(m)
    steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if conn == 8:
        steps += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    groups = []
    for y, x in zip(*np.nonzero(m)):
        if seen[y, x]:
            continue
        stack, group = [(y, x)], set()
        seen[y, x] = True
        while stack:
            cy, cx = stack.pop()
            group.add((cy, cx))
            for dy, dx in steps:
                ny, nx = cy + dy, cx + dx
                if 0 <= ny < m.shape[0] and 0 <= nx < m.shape[1] and m[ny, nx] and not seen[ny, nx]:
                    seen[ny, nx] = True
                    stack.append((ny, nx))
        groups.append(group)
    return groups


def test_components_trivial():
    assert connected_components(np.zeros((4, 4)))[1] == 0
    m = np.zeros((6, 6), bool)
    m[:2, :2] = m[4:, 4:] = True
    assert connected_components(m)[1] == 2


@settings(max_examples=60, deadline=None)
@given(masks(16), st.sampled_from([4, 8]))
def test_components_match_flood_fill(m, conn):
    labels, count = connected_components(m, conn)
    groups = _flood_fill_count(m, conn)
    assert count == len(groups)
    assert (labels[~m] == -1).all()
    for g in groups:
        ids = {labels[p] for p in g}
        assert len(ids) == 1
    assert sorted(np.unique(labels[m]).tolist()) == list(range(count))


# ------------------------------------------------------------------- PGM I/O

def test_labelmap_round_trip(tmp_path):
    lm = LabelMap(np.array([[0, 1, 2], [255, 1, 0], [2, 2, 2]]), 3)
    save_pgm(lm, tmp_path / "a.pgm")
    assert load_pgm(tmp_path / "a.pgm") == lm


def test_p2_and_p5_agree(tmp_path):
    lm = LabelMap(np.arange(12).reshape(3, 4) % 5, 5)
    save_pgm(lm, tmp_path / "a.pgm")
    save_pgm(lm, tmp_path / "b.pgm", plain=True)
    assert load_label_pgm(tmp_path / "a.pgm") == load_label_pgm(tmp_path / "b.pgm")


def test_header_comments_and_untagged_files(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P2\n# made by hand\n3 1 # inline\n# more\n7\n0 3 7\n")
    data, maxval, comments = read_pgm_raw(p)
    assert maxval == 7 and data.tolist() == [[0, 3, 7]]
    assert "made by hand" in comments
    assert load_label_pgm(p).classes == 8


@pytest.mark.parametrize("payload", [
    b"P5\n4 4\n255\n\x00\x01",
    b"P2\n3 3\n255\n1 2 3\n",
    b"P5\n2 2\n0\n\x00\x00\x00\x00",
    b"P6\n1 1\n255\n\x00",
    b"P2\n2 x\n255\n1 2\n",
    b"P2\n2 1\n5\n1 9\n",
])
def test_malformed_files(tmp_path, payload):
    p = tmp_path / "bad.pgm"
    p.write_bytes(payload)
    with pytest.raises(FormatError):
        read_pgm_raw(p)


@settings(max_examples=40, deadline=None)
@given(st.tuples(st.integers(1, 9), st.integers(1, 9)).flatmap(
    lambda s: arrays(np.int64, s, elements=st.integers(0, 65535))),
    st.booleans())
def test_raw_round_trip(tmp_path_factory, data, plain):
    p = tmp_path_factory.mktemp("pgm") / "r.pgm"
    maxval = 255 if data.max() <= 255 else 65535
    write_pgm_raw(p, data, maxval, plain=plain)
    back, m, _ = read_pgm_raw(p)
    assert m == maxval and np.array_equal(back, data)


@settings(max_examples=40, deadline=None)
@given(st.tuples(st.integers(1, 8), st.integers(1, 8)).flatmap(
    lambda s: arrays(np.float64, s, elements=st.floats(0, 1))))
def test_soft_round_trip_on_16_bit_grid(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("pgm") / "s.pgm"
    q = quantize_soft(values)
    save_pgm(q, p)
    assert np.array_equal(load_soft_pgm(p), q)
    assert np.array_equal(load_pgm(p), q)
    assert np.abs(q - values).max() <= 0.5 / 65535 + 1e-15
