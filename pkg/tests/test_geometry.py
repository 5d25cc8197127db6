import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nodulecad.geometry import BoxCenter, BoxCorner, ciou, iou, iou_matrix, to_center, to_corner

from oracles import raster_iou


def test_to_corner_full_image():
    assert to_corner(BoxCenter(0.5, 0.5, 1, 1), 100, 100) == BoxCorner(0, 0, 100, 100)


def test_to_corner_point_box():
    assert to_corner(BoxCenter(0.5, 0.5, 0, 0), 100, 100) == BoxCorner(50, 50, 50, 50)


def test_to_corner_416():
    b = to_corner(BoxCenter(0.25, 0.5, 0.1, 0.2), 416, 416)
    np.testing.assert_allclose(b.as_tuple(), (83.2, 166.4, 124.8, 249.6), rtol=0, atol=1e-12)
    back = to_center(b, 416, 416)
    np.testing.assert_allclose(back.as_tuple(), (0.25, 0.5, 0.1, 0.2), atol=1e-12)


def test_to_corner_rejects_bad_image():
    with pytest.raises(ValueError):
        to_corner(BoxCenter(0.5, 0.5, 0.1, 0.1), 0, 10)


def test_inverted_corner_rejected():
    with pytest.raises(ValueError):
        BoxCorner(1, 0, 0, 1)


def test_out_of_image_box_not_clamped():
    b = to_corner(BoxCenter(0.0, 1.0, 0.2, 0.2), 10, 10)
    assert b.as_tuple() == pytest.approx((-1.0, 9.0, 1.0, 11.0))


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ((0, 0, 1, 1), (0, 0, 1, 1), 1.0),
        ((0, 0, 1, 1), (2, 2, 3, 3), 0.0),
    ],
)
def test_iou_trivial(a, b, expected):
    assert iou(BoxCorner(*a), BoxCorner(*b)) == expected


def test_iou_one_seventh_matches_raster():
    a, b = (0, 0, 2, 2), (1, 1, 3, 3)
    expected = raster_iou(a, b)
    assert expected == pytest.approx(1 / 7, abs=1e-15)
    assert iou(BoxCorner(*a), BoxCorner(*b)) == pytest.approx(expected, abs=1e-12)


def test_iou_degenerate_union_is_zero():
    p = BoxCorner(1, 1, 1, 1)
    assert iou(p, p) == 0.0


def test_iou_matrix_matches_scalar():
    rng = np.random.default_rng(3)
    lo = rng.uniform(0, 5, (7, 2))
    a = np.hstack([lo, lo + rng.uniform(0, 3, (7, 2))])
    lo = rng.uniform(0, 5, (5, 2))
    b = np.hstack([lo, lo + rng.uniform(0, 3, (5, 2))])
    m = iou_matrix(a, b)
    for i in range(7):
        for j in range(5):
            assert m[i, j] == iou(BoxCorner(*a[i]), BoxCorner(*b[j]))


coord = st.floats(-50, 50, allow_nan=False)
size = st.floats(0, 30, allow_nan=False)


@st.composite
def boxes(draw, positive=False):
    x, y = draw(coord), draw(coord)
    lo = 1e-3 if positive else 0.0
    w, h = draw(st.floats(lo, 30)), draw(st.floats(lo, 30))
    return BoxCorner(x, y, x + w, y + h)


@given(boxes(), boxes())
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


@given(boxes(positive=True))
def test_iou_self_is_one(a):
    assert iou(a, a) == pytest.approx(1.0, abs=1e-12)


@given(boxes(positive=True), boxes(positive=True), st.floats(0.1, 10), coord, coord)
def test_iou_affine_invariant(a, b, s, dx, dy):
    def move(r):
        return BoxCorner(r.x_min * s + dx, r.y_min * s + dy, r.x_max * s + dx, r.y_max * s + dy)

    assert iou(move(a), move(b)) == pytest.approx(iou(a, b), abs=1e-9)


def test_iou_affine_invariant_exact_scales():
    # power-of-two scale and integer shift keep the arithmetic exact
    rng = np.random.default_rng(11)
    for _ in range(500):
        lo = rng.integers(0, 20, 4).astype(float)
        a = BoxCorner(lo[0], lo[1], lo[0] + rng.integers(1, 9), lo[1] + rng.integers(1, 9))
        b = BoxCorner(lo[2], lo[3], lo[2] + rng.integers(1, 9), lo[3] + rng.integers(1, 9))
        s, dx, dy = 4.0, 3.0, -7.0
        ma = BoxCorner(a.x_min * s + dx, a.y_min * s + dy, a.x_max * s + dx, a.y_max * s + dy)
        mb = BoxCorner(b.x_min * s + dx, b.y_min * s + dy, b.x_max * s + dx, b.y_max * s + dy)
        assert abs(iou(ma, mb) - iou(a, b)) <= 1e-12


def test_ciou_identical_is_one():
    a = BoxCorner(0, 0, 2, 2)
    assert ciou(a, a) == 1.0


def test_ciou_far_apart_negative():
    pred, truth = BoxCorner(0, 0, 1, 1), BoxCorner(10, 10, 11, 11)
    # iou 0, distance term (10.5^2 * 2) / (11^2 * 2) hand-evaluated, aspect 0
    assert ciou(pred, truth) == pytest.approx(-(10.0**2 * 2) / (11.0**2 * 2), abs=1e-15)
    assert ciou(pred, truth) < 0


def test_ciou_shift_below_iou():
    truth = BoxCorner(0, 0, 2, 2)
    pred = BoxCorner(0.5, 0, 2.5, 2)
    assert ciou(pred, truth) < iou(pred, truth)


def test_ciou_point_boxes():
    p = BoxCorner(3, 3, 3, 3)
    assert ciou(p, p) == 1.0


@given(boxes(positive=True), boxes(positive=True))
def test_ciou_bounded_by_iou(a, b):
    # distance term < 1 and alpha * v <= 1/2, so the floor is -1.5
    c = ciou(a, b)
    assert -1.5 < c <= iou(a, b) + 1e-15


def test_ciou_can_fall_below_minus_one():
    # far apart with opposite aspect ratios
    assert ciou(BoxCorner(0, 0, 10, 0.01), BoxCorner(1000, 1000, 1000.01, 1010)) < -1.0


def test_ciou_equals_iou_iff_centers_and_aspect_match():
    truth = BoxCorner(0, 0, 4, 2)
    same_shape_centered = BoxCorner(-2, -1, 6, 3)  # twice the size, same center and aspect
    assert ciou(same_shape_centered, truth) == pytest.approx(iou(same_shape_centered, truth), abs=1e-15)
    wrong_aspect = BoxCorner(0, -1, 4, 3)
    assert ciou(wrong_aspect, truth) < iou(wrong_aspect, truth)


def test_center_roundtrip_property():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        b = BoxCenter(*rng.uniform(0, 1, 2), *rng.uniform(0, 1, 2))
        back = to_center(to_corner(b, 1.0, 1.0))
        assert max(abs(x - y) for x, y in zip(b.as_tuple(), back.as_tuple())) <= 1e-12
        assert math.isfinite(back.cx)
