import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lagrangian_bottleneck.contour import Defect, TracedContour, connected_components
from lagrangian_bottleneck.detector import (
    CandidatePair,
    Detection,
    DetectorParams,
    TrackState,
    enumerate_candidates,
    geometric_filter,
    update_tracks,
    validate,
)
from lagrangian_bottleneck.fields import BinaryMask


def contour_with_defects(n_points, farthest):
    angles = np.linspace(0, 2 * np.pi, n_points, endpoint=False)
    pts = np.column_stack([50 + 40 * np.cos(angles), 50 + 40 * np.sin(angles)]).round().astype(int)
    c = TracedContour.from_points(pts)
    defects = tuple(Defect(0, 0, i, 5.0) for i in farthest)
    return TracedContour(c.points, c.arc_length, c.hull, defects, 0)


def pair(d_c, arc, l_s, mid=(50.0, 50.0)):
    p0 = (mid[0] - d_c / 2, mid[1])
    p1 = (mid[0] + d_c / 2, mid[1])
    return CandidatePair(p0, p1, d_c, arc, 0, l_s)


# enumeration


@pytest.mark.parametrize("k, expected", [(0, 0), (1, 0), (2, 1), (3, 3), (5, 10)])
def test_pair_count(k, expected):
    c = contour_with_defects(200, [i * 30 for i in range(k)])
    assert len(enumerate_candidates([c])) == expected


def test_pairs_never_cross_contours():
    a = contour_with_defects(200, [0])
    b = contour_with_defects(200, [100])
    assert enumerate_candidates([a, b]) == []
    pairs = enumerate_candidates([a, contour_with_defects(200, [10, 110])])
    assert len(pairs) == 1 and pairs[0].contour_ref == 1


def test_pair_geometry():
    c = contour_with_defects(200, [0, 100])
    (p,) = enumerate_candidates([c])
    assert p.d_c == pytest.approx(math.dist(p.p0, p.p1))
    assert p.l_s == pytest.approx(c.arc_length)
    assert p.arc_between <= c.arc_length / 2 + 1e-9


# geometric filter


def test_funnel_like_pair_kept():
    assert geometric_filter([pair(20, 180, 400)], DetectorParams()) != []


@pytest.mark.parametrize(
    "d_c, arc, l_s",
    [
        (40, 180, 400),  # ratio exactly sigma_s
        (50, 180, 400),  # ratio above sigma_s
        (20, 40, 400),  # arc exactly 2 d_c
        (20, 30, 400),  # adjacent points along the contour
    ],
)
def test_filter_rejections(d_c, arc, l_s):
    assert geometric_filter([pair(d_c, arc, l_s)], DetectorParams()) == []


@given(st.lists(st.tuples(st.floats(0.1, 100), st.floats(0.1, 500), st.floats(10, 1000)), max_size=12), st.randoms())
def test_filter_is_order_independent(shapes, rnd):
    pairs = [pair(*s) for s in shapes]
    params = DetectorParams()
    kept = geometric_filter(pairs, params)
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    assert sorted(map(repr, geometric_filter(shuffled, params))) == sorted(map(repr, kept))


def test_params_validation():
    for bad in [dict(sigma_s=0), dict(sigma_s=1.0), dict(sigma_r=0), dict(sigma_o=0)]:
        with pytest.raises(ValueError):
            DetectorParams(**bad)


# validation


def val_mask(bits):
    m = BinaryMask(bits)
    return m, connected_components(m)[0]


def test_validate_empty_mask():
    m, labels = val_mask(np.zeros((100, 100), bool))
    assert not validate(pair(10, 100, 400), m, labels, 30)


def test_validate_two_bars():
    bits = np.zeros((100, 100), bool)
    bits[40, 30:70] = True
    bits[60, 30:70] = True
    m, labels = val_mask(bits)
    assert validate(pair(10, 100, 400), m, labels, 30)
    # window too small to reach either bar
    assert not validate(pair(10, 100, 400), m, labels, 10)


def test_validate_single_connected_ridge():
    bits = np.zeros((100, 100), bool)
    bits[40, 30:70] = True
    bits[40:61, 30] = True
    bits[60, 30:70] = True
    m, labels = val_mask(bits)
    assert not validate(pair(10, 100, 400), m, labels, 30)


def test_validate_monotone_in_window(rng):
    bits = rng.random((80, 80)) > 0.97
    m, labels = val_mask(bits)
    for _ in range(20):
        mid = tuple(rng.uniform(0, 80, 2))
        p = pair(4, 100, 400, mid)
        results = [validate(p, m, labels, s) for s in (4, 10, 20, 40, 80)]
        # once valid, larger windows stay valid
        assert results == sorted(results)


def test_validate_window_boundaries():
    bits = np.zeros((100, 100), bool)
    bits[35, :] = True
    bits[65, :] = True
    m, labels = val_mask(bits)
    assert validate(pair(4, 100, 400), m, labels, 30)
    assert not validate(pair(4, 100, 400), m, labels, 29.9)


# tracking


def det(x, y, frame=0):
    return Detection.from_pair(pair(4, 100, 400, (x, y)), frame)


def run_frames(per_frame, params):
    state, out = TrackState(), []
    for i, dets in enumerate(per_frame):
        state, confirmed = update_tracks(state, dets, params, i * 4)
        out.append(confirmed)
    return state, out


def test_confirmation_after_sigma_o_hits():
    params = DetectorParams(sigma_o=3)
    _, out = run_frames([[det(50, 50)]] * 5, params)
    assert [len(c) for c in out] == [0, 0, 1, 1, 1]
    assert all(d.confirmed for c in out for d in c)


def test_gap_resets_track():
    params = DetectorParams(sigma_o=3)
    frames = [[det(50, 50)], [det(50, 50)], [], [det(50, 50)], [det(50, 50)], [det(50, 50)]]
    _, out = run_frames(frames, params)
    assert [len(c) for c in out] == [0, 0, 0, 0, 0, 1]


def test_sigma_o_one_confirms_immediately():
    _, out = run_frames([[det(10, 10)]], DetectorParams(sigma_o=1))
    assert len(out[0]) == 1


def test_far_detection_opens_new_track():
    params = DetectorParams(sigma_o=2)
    _, out = run_frames([[det(50, 50)], [det(50 + 31, 50)]], params)
    assert out[1] == []
    _, out = run_frames([[det(50, 50)], [det(50 + 29, 50)]], params)
    assert len(out[1]) == 1


def test_two_distant_tracks_independent():
    params = DetectorParams(sigma_o=3)
    frames = [[det(10, 10), det(10 + 150, 10)]] * 3
    state, out = run_frames(frames, params)
    assert len(state.tracks) == 2
    assert len(out[2]) == 2


def test_running_center_is_mean():
    params = DetectorParams(sigma_o=10)
    state, _ = run_frames([[det(10, 10)], [det(12, 10)], [det(14, 13)]], params)
    (tr,) = state.tracks
    assert tr.running_center == pytest.approx((12.0, 11.0))
    assert tr.members == 3


def test_one_detection_per_track():
    params = DetectorParams(sigma_o=2)
    state, out = run_frames([[det(50, 50)], [det(50, 50), det(52, 50)]], params)
    assert len(state.tracks) == 2
    assert len(out[1]) == 1
