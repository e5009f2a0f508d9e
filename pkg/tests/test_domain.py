import math
import random

import pytest
from hypothesis import given, strategies as st

from cuasutm.domain import (
    Decision, DecisionKind, DomainError, DroneId, GeoPoint, OperatorId, RemoteIdMessage,
    TimeWindow, Zone, point_in_zone, windows_overlap,
)


def winding_number(x, y, pts):
    """Sum of signed angles subtended by each edge; +-2pi inside, 0 outside."""
    total = 0.0
    for (ax, ay), (bx, by) in zip(pts, pts[1:] + pts[:1]):
        a = math.atan2(ay - y, ax - x)
        b = math.atan2(by - y, bx - x)
        d = b - a
        while d > math.pi:
            d -= 2 * math.pi
        while d < -math.pi:
            d += 2 * math.pi
        total += d
    return round(total / (2 * math.pi))


def dist_to_boundary(x, y, pts):
    best = math.inf
    for (ax, ay), (bx, by) in zip(pts, pts[1:] + pts[:1]):
        dx, dy = bx - ax, by - ay
        t = max(0.0, min(1.0, ((x - ax) * dx + (y - ay) * dy) / (dx * dx + dy * dy)))
        best = min(best, math.hypot(x - ax - t * dx, y - ay - t * dy))
    return best


def star_polygon(rng, n):
    # jittered angles with gaps under pi keep the polygon star-shaped, hence simple
    cx, cy = rng.uniform(-40, 40), rng.uniform(-100, 100)
    step = 2 * math.pi / n
    angles = [k * step + rng.uniform(0.05, 0.95) * step for k in range(n)]
    radii = [rng.uniform(1, 10) for _ in angles]
    pts = [(cx + r * math.cos(a), cy + r * math.sin(a)) for r, a in zip(radii, angles)]
    return Zone.from_pairs(pts)


@pytest.fixture
def unit_square():
    return Zone.rectangle(0.0, 0.0, 1.0, 1.0)


def test_centre_of_square_is_inside(unit_square):
    assert point_in_zone(GeoPoint(0.5, 0.5), unit_square)


@pytest.mark.parametrize("lat,lon", [(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0), (1, 0.3)])
def test_boundary_counts_inside(unit_square, lat, lon):
    assert point_in_zone(GeoPoint(lat, lon), unit_square)


def test_far_point_is_outside(unit_square):
    diag = math.hypot(1, 1)
    assert not point_in_zone(GeoPoint(0.5 + 2 * diag, 0.5), unit_square)


def test_altitude_is_ignored(unit_square):
    assert point_in_zone(GeoPoint(0.5, 0.5, 5000.0), unit_square)


def test_ray_casting_agrees_with_winding_number():
    rng = random.Random(20240611)
    checked = 0
    for _ in range(100):
        zone = star_polygon(rng, rng.randint(3, 12))
        pts = zone.coords()
        lat0, lon0, lat1, lon1 = zone.bbox()
        for _ in range(110):
            x = rng.uniform(lat0 - 2, lat1 + 2)
            y = rng.uniform(lon0 - 2, lon1 + 2)
            if dist_to_boundary(x, y, pts) < 1e-9:
                continue
            assert point_in_zone(GeoPoint(x, y), zone) == (winding_number(x, y, pts) != 0)
            checked += 1
    assert checked >= 10_000


def test_self_intersecting_zone_rejected():
    with pytest.raises(DomainError):
        Zone.from_pairs([(0, 0), (1, 1), (1, 0), (0, 1)])


@pytest.mark.parametrize("pairs", [
    [(0, 0), (1, 1)],
    [(0, 0), (0, 0), (1, 1), (1, 0)],
    [(0, 0), (1, 1), (2, 2)],
])
def test_invalid_zones_rejected(pairs):
    with pytest.raises(DomainError):
        Zone.from_pairs(pairs)


def test_touching_windows_do_not_overlap():
    assert not windows_overlap(TimeWindow(0, 10), TimeWindow(10, 20))


def test_contained_window_overlaps():
    assert windows_overlap(TimeWindow(0, 10), TimeWindow(5, 6))
    assert windows_overlap(TimeWindow(3, 7), TimeWindow(6, 9))


def test_overlap_matches_integer_enumeration():
    windows = [TimeWindow(s, e) for s in range(6) for e in range(6) if s < e]
    for a in windows:
        for b in windows:
            common = set(range(a.start, a.end)) & set(range(b.start, b.end))
            assert windows_overlap(a, b) == bool(common), (a, b)


windows = st.tuples(st.integers(-10**6, 10**6), st.integers(1, 10**6)).map(
    lambda t: TimeWindow(t[0], t[0] + t[1]))


@given(windows, windows)
def test_overlap_is_symmetric(a, b):
    assert windows_overlap(a, b) == windows_overlap(b, a)


@given(st.integers(-10**6, 10**6), st.integers(-10**6, 0))
def test_empty_or_reversed_window_rejected(start, back):
    with pytest.raises(DomainError):
        TimeWindow(start, start + back)


def test_operator_id_is_eight_bytes():
    op = OperatorId.from_hex("00112233445566ff")
    assert op.hex() == "00112233445566ff"
    assert len(op.value) == 8
    assert OperatorId.from_int(1) < OperatorId.from_int(2)
    for bad in ("0011", "zz112233445566ff", "00112233445566ff00"):
        with pytest.raises(DomainError):
            OperatorId.from_hex(bad)
    with pytest.raises(DomainError):
        OperatorId(b"\x00" * 7)


@pytest.mark.parametrize("bad", ["", "x" * 21, "drone\n1", "a\x00b"])
def test_drone_id_rejects(bad):
    with pytest.raises(DomainError):
        DroneId(bad)


def test_drone_id_accepts_twenty_chars():
    assert DroneId("A" * 20).value == "A" * 20


@pytest.mark.parametrize("lat,lon,alt", [
    (91, 0, 0), (-90.5, 0, 0), (0, 181, 0), (0, -180.1, 0), (0, 0, -1),
    (math.nan, 0, 0), (0, math.inf, 0),
])
def test_geopoint_ranges(lat, lon, alt):
    with pytest.raises(DomainError):
        GeoPoint(lat, lon, alt)


def test_remote_id_velocity_and_skew():
    p = GeoPoint(1, 1, 10)
    with pytest.raises(DomainError):
        RemoteIdMessage(DroneId("D1"), p, -1.0, p, 0)
    with pytest.raises(DomainError):
        RemoteIdMessage(DroneId("D1"), p, math.inf, p, 0)
    msg = RemoteIdMessage(DroneId("D1"), p, 12.0, p, 1000)
    assert msg.check_skew(1400, 500)
    assert not msg.check_skew(1600, 500)


def test_timed_interdiction_needs_positive_timeout():
    assert Decision.timed(30).timeout_s == 30
    with pytest.raises(DomainError):
        Decision.timed(0)
    with pytest.raises(DomainError):
        Decision(DecisionKind.TOLERATE_MISSION, timeout_s=5)
