"""GPS trace ingestion, local projection, windowing and synthetic traces."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0
DEFAULT_MAX_GAP_S = 10


@dataclass(frozen=True)
class RawTracePoint:
    user_id: str
    timestamp: int
    lat: float
    lon: float


@dataclass
class CartesianTrace:
    user_id: str
    origin: tuple[float, float]
    points: np.ndarray  # (L, 2) meters, 1 s spacing
    origin_time: int = 0

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class Window:
    history: np.ndarray  # (T_h, 2)
    future: np.ndarray  # (T_p, 2)


@dataclass
class DatasetSplit:
    train: list[Window] = field(default_factory=list)
    validation: list[Window] = field(default_factory=list)
    test: list[Window] = field(default_factory=list)

    def extend(self, other: "DatasetSplit") -> None:
        self.train.extend(other.train)
        self.validation.extend(other.validation)
        self.test.extend(other.test)


@dataclass
class CleanReport:
    malformed_rows: int = 0
    duplicates_dropped: int = 0
    interpolated_points: int = 0
    segments: int = 0


# ---------------------------------------------------------------------------
# parsing / cleaning
# ---------------------------------------------------------------------------

def _read_rows(lines: Iterable[str] | str, report: CleanReport) -> dict[str, list[RawTracePoint]]:
    if isinstance(lines, str):
        lines = io.StringIO(lines)
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["user_id", "timestamp", "lat", "lon"]:
        raise ValueError("trace CSV must start with header 'user_id,timestamp,lat,lon'")
    users: dict[str, list[RawTracePoint]] = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            uid, ts, lat, lon = row
            ts_f = float(ts)
            point = RawTracePoint(uid.strip(), int(ts_f), float(lat), float(lon))
            if ts_f != int(ts_f) or not uid.strip():
                raise ValueError
            if not (-90.0 <= point.lat <= 90.0 and -180.0 <= point.lon <= 180.0):
                raise ValueError
        except ValueError:
            report.malformed_rows += 1
            log.warning("skipping malformed trace row %d: %r", lineno, row)
            continue
        users.setdefault(point.user_id, []).append(point)
    return users


def _clean_user(points: list[RawTracePoint], max_gap: int,
                report: CleanReport) -> list[list[RawTracePoint]]:
    # stable sort keeps file order among equal timestamps, so "first" wins
    ordered = sorted(points, key=lambda p: p.timestamp)
    unique: list[RawTracePoint] = []
    for p in ordered:
        if unique and unique[-1].timestamp == p.timestamp:
            report.duplicates_dropped += 1
            continue
        unique.append(p)
    segments: list[list[RawTracePoint]] = []
    current: list[RawTracePoint] = []
    for p in unique:
        if current:
            prev = current[-1]
            gap = p.timestamp - prev.timestamp
            if gap > max_gap:
                segments.append(current)
                current = []
            else:
                for k in range(1, gap):
                    frac = k / gap
                    current.append(RawTracePoint(
                        p.user_id, prev.timestamp + k,
                        prev.lat + frac * (p.lat - prev.lat),
                        prev.lon + frac * (p.lon - prev.lon)))
                    report.interpolated_points += 1
        current.append(p)
    if current:
        segments.append(current)
    return segments


def parse_and_clean(lines: Iterable[str] | str, max_gap: int = DEFAULT_MAX_GAP_S,
                    report: CleanReport | None = None) -> dict[str, list[list[RawTracePoint]]]:
    """Parse ``user_id,timestamp,lat,lon`` CSV text into gap-free 1 s segments.

    Returns ``{user_id: [segment, ...]}``.  Duplicate timestamps keep the first
    row, gaps up to ``max_gap`` seconds are linearly interpolated per
    coordinate, and longer gaps start a new segment.  Malformed rows are
    skipped and counted in ``report``.
    """
    report = report if report is not None else CleanReport()
    out: dict[str, list[list[RawTracePoint]]] = {}
    for uid, pts in _read_rows(lines, report).items():
        segs = [s for s in _clean_user(pts, max_gap, report) if s]
        if segs:
            out[uid] = segs
            report.segments += len(segs)
    return out


def format_points(segments: dict[str, list[list[RawTracePoint]]]) -> str:
    buf = io.StringIO()
    buf.write("user_id,timestamp,lat,lon\n")
    for uid, segs in segments.items():
        for seg in segs:
            for p in seg:
                buf.write(f"{uid},{p.timestamp},{p.lat!r},{p.lon!r}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# geodesy
# ---------------------------------------------------------------------------

def haversine_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in meters between ``(lat, lon)`` pairs in degrees."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def project_to_local(points: list[RawTracePoint], origin: tuple[float, float] | None = None) -> CartesianTrace:
    """Equirectangular projection built from Haversine distances.

    ``x`` is the signed distance along the origin's parallel, ``y`` the signed
    distance along the meridian.  Defaults to the first point as origin.
    """
    if not points:
        raise ValueError("cannot project an empty segment")
    if origin is None:
        origin = (points[0].lat, points[0].lon)
    lat0, lon0 = origin
    xy = np.empty((len(points), 2))
    for k, p in enumerate(points):
        dx = haversine_distance((lat0, lon0), (lat0, p.lon))
        dy = haversine_distance((lat0, lon0), (p.lat, lon0))
        xy[k, 0] = math.copysign(dx, p.lon - lon0)
        xy[k, 1] = math.copysign(dy, p.lat - lat0)
    return CartesianTrace(points[0].user_id, origin, xy, points[0].timestamp)


# ---------------------------------------------------------------------------
# windows and splits
# ---------------------------------------------------------------------------

def make_windows(trace: CartesianTrace | np.ndarray, T_h: int, T_p: int, stride: int = 1) -> list[Window]:
    pts = trace.points if isinstance(trace, CartesianTrace) else np.asarray(trace)
    span = T_h + T_p
    if len(pts) < span:
        return []
    return [Window(pts[k:k + T_h].copy(), pts[k + T_h:k + span].copy())
            for k in range(0, len(pts) - span + 1, stride)]


def split_windows(windows: list[Window]) -> DatasetSplit:
    """Temporal 7:2:1 split: earliest windows train, latest test."""
    k = len(windows)
    n_val = int(math.floor(0.2 * k))
    n_test = int(math.floor(0.1 * k))
    n_train = k - n_val - n_test
    return DatasetSplit(windows[:n_train], windows[n_train:n_train + n_val],
                        windows[n_train + n_val:])


def build_dataset(traces: Iterable[CartesianTrace | np.ndarray], T_h: int, T_p: int,
                  stride: int = 1) -> DatasetSplit:
    split = DatasetSplit()
    for tr in traces:
        split.extend(split_windows(make_windows(tr, T_h, T_p, stride)))
    return split


def stack_windows(windows: list[Window]) -> tuple[np.ndarray, np.ndarray]:
    if not windows:
        return np.zeros((0, 0, 2)), np.zeros((0, 0, 2))
    return (np.stack([w.history for w in windows]), np.stack([w.future for w in windows]))


# ---------------------------------------------------------------------------
# synthetic multi-scale traces
# ---------------------------------------------------------------------------

@dataclass
class SyntheticTraceParams:
    extent: float = 400.0  # side of the waypoint box, m
    drift_speed: tuple[float, float] = (0.2, 0.6)  # m/s
    sine_amplitude: tuple[float, float] = (5.0, 15.0)  # m
    sine_period: tuple[float, float] = (120.0, 240.0)  # s
    jitter_scale: float = 0.17  # m, innovation bound per axis
    jitter_memory: float = 0.8


def _drift(rng: np.random.Generator, length: int, p: SyntheticTraceParams) -> np.ndarray:
    pos = rng.uniform(0.0, p.extent, size=2)
    out = np.empty((length, 2))
    target = rng.uniform(0.0, p.extent, size=2)
    speed = rng.uniform(*p.drift_speed)
    for k in range(length):
        out[k] = pos
        delta = target - pos
        dist = float(np.hypot(*delta))
        if dist <= speed:
            pos = target.copy()
            target = rng.uniform(0.0, p.extent, size=2)
            speed = rng.uniform(*p.drift_speed)
        else:
            pos = pos + delta / dist * speed
    return out


def synthetic_components(n_users: int, length: int, seed: int,
                         params: SyntheticTraceParams | None = None) -> list[dict[str, np.ndarray]]:
    """Per-user drift / sinusoid / jitter components before summation."""
    if length < 1:
        raise ValueError("length must be >= 1")
    p = params or SyntheticTraceParams()
    root = np.random.default_rng(seed)
    comps = []
    t = np.arange(length, dtype=np.float64)
    for _ in range(n_users):
        rng = np.random.default_rng(root.integers(2**63))
        drift = _drift(rng, length, p)
        amp = rng.uniform(*p.sine_amplitude)
        period = rng.uniform(*p.sine_period)
        phase = rng.uniform(0, 2 * np.pi)
        heading = rng.uniform(0, 2 * np.pi)
        wave = amp * np.sin(2 * np.pi * t / period + phase)
        sine = np.stack([wave * np.cos(heading), wave * np.sin(heading)], axis=1)
        jitter = np.zeros((length, 2))
        noise = np.tanh(rng.normal(size=(length, 2)))
        for k in range(1, length):
            jitter[k] = p.jitter_memory * jitter[k - 1] + p.jitter_scale * noise[k]
        comps.append({"drift": drift, "sine": sine, "jitter": jitter})
    return comps


def gen_synthetic_traces(n_users: int, length: int, seed: int,
                         params: SyntheticTraceParams | None = None,
                         jitter: bool = True) -> list[CartesianTrace]:
    """Deterministic three-scale traces (drift + sinusoid + jitter), <= 2 m per step."""
    traces = []
    for u, c in enumerate(synthetic_components(n_users, length, seed, params)):
        pts = c["drift"] + c["sine"] + (c["jitter"] if jitter else 0.0)
        traces.append(CartesianTrace(f"user{u}", (0.0, 0.0), pts))
    return traces


def traces_to_csv(traces: list[CartesianTrace], origin: tuple[float, float] = (39.9, 116.3)) -> str:
    """Render Cartesian traces back to lat/lon CSV around ``origin`` (inverse projection)."""
    lat0, lon0 = origin
    deg = 180.0 / (math.pi * EARTH_RADIUS_M)
    buf = io.StringIO()
    buf.write("user_id,timestamp,lat,lon\n")
    for tr in traces:
        for k, (x, y) in enumerate(tr.points):
            lat = lat0 + y * deg
            lon = lon0 + x * deg / math.cos(math.radians(lat0))
            buf.write(f"{tr.user_id},{tr.origin_time + k},{lat:.9f},{lon:.9f}\n")
    return buf.getvalue()


def load_trace_csv(path: str, max_gap: int = DEFAULT_MAX_GAP_S) -> list[CartesianTrace]:
    """Read a trace CSV and return the longest projected segment per user."""
    with open(path, encoding="utf-8") as fh:
        cleaned = parse_and_clean(fh, max_gap)
    traces = []
    shared_origin = None
    for uid in sorted(cleaned):
        seg = max(cleaned[uid], key=len)
        if shared_origin is None:
            shared_origin = (seg[0].lat, seg[0].lon)
        traces.append(project_to_local(seg, shared_origin))
    return traces
