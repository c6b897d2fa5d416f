"""Shoebox rooms and image-source room impulse responses.

Walls share one absorption value ``a`` and an image with ``r`` wall
reflections keeps ``(1 - a)^(r/2)`` of its amplitude. ``sabine_absorption``
gives the Sabine coefficient for the room's target RT60. By default
``generate_rir`` calibrates ``a`` per room and geometry so that the
Schroeder-measured decay of the rendered response matches the target;
with ``calibrate=False`` the Sabine coefficient is used as is. An explicit
``absorption`` is always used directly.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..audio.wav import SAMPLE_RATE
from ..errors import ConfigError, GeometryError, InfeasibleRoomError

logger = logging.getLogger(__name__)

SPEED_OF_SOUND = 343.0
SABINE_CONSTANT = 0.161
MAX_ABSORPTION = 0.9999
SINC_HALF_WIDTH = 32
MAX_REFLECTION_ORDER = 60
MIN_SOURCE_DISTANCE = 0.01
RT60_FIT_DB = (-5.0, -25.0)
CALIBRATION_GRID = 48
CALIBRATION_STEPS = 24
MIN_DECAY_RATE = 1e-3
_IMAGE_CHUNK = 16384

Position = Tuple[float, float, float]


@dataclass(frozen=True)
class RoomSpec:
    floor_area: float
    height: float
    length: float
    width: float
    rt60: float
    speed_of_sound: float = SPEED_OF_SOUND

    @property
    def dims(self) -> np.ndarray:
        return np.array([self.length, self.width, self.height], dtype=np.float64)

    @property
    def volume(self) -> float:
        return self.length * self.width * self.height

    @property
    def surface(self) -> float:
        return 2.0 * (self.length * self.width + self.length * self.height + self.width * self.height)

    def contains(self, pos: Sequence[float], margin: float = 0.0) -> bool:
        p = np.asarray(pos, dtype=np.float64)
        return bool(np.all(p >= margin) and np.all(p <= self.dims - margin))

    @classmethod
    def from_dims(cls, length: float, width: float, height: float, rt60: float) -> RoomSpec:
        return cls(length * width, height, length, width, rt60)


@dataclass(frozen=True)
class RIR:
    taps: np.ndarray
    sample_rate: int = SAMPLE_RATE


def sabine_absorption(room: RoomSpec) -> float:
    if room.rt60 <= 0:
        raise ConfigError("rt60", f"must be positive, got {room.rt60}")
    alpha = SABINE_CONSTANT * room.volume / (room.rt60 * room.surface)
    if alpha >= 1.0:
        raise InfeasibleRoomError(
            "rt60",
            f"Sabine absorption {alpha:.4f} >= 1: room too small for rt60={room.rt60}s",
            {"alpha": alpha, "volume": room.volume, "surface": room.surface},
        )
    return min(alpha, MAX_ABSORPTION)


def reflection_order(room: RoomSpec, cap: int = MAX_REFLECTION_ORDER) -> int:
    """ceil(rt60 * c / min dimension), capped."""
    order = math.ceil(room.rt60 * room.speed_of_sound / float(np.min(room.dims)))
    return int(min(order, cap, MAX_REFLECTION_ORDER))


def _images(room: RoomSpec, src: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Image positions (N, 3) and reflection counts (N,) with count <= order."""
    span = order // 2 + 1
    m = np.arange(-span, span + 1)
    axes_pos = []
    axes_refl = []
    for axis in range(3):
        # image coordinate (1 - 2p) * s + 2 m L, reflections |m - p| + |m|
        coords = np.concatenate([src[axis] + 2 * m * room.dims[axis], -src[axis] + 2 * m * room.dims[axis]])
        refl = np.concatenate([2 * np.abs(m), np.abs(m - 1) + np.abs(m)])
        keep = refl <= order
        axes_pos.append(coords[keep])
        axes_refl.append(refl[keep])
    gx, gy, gz = np.meshgrid(*axes_pos, indexing="ij")
    rx, ry, rz = np.meshgrid(*axes_refl, indexing="ij")
    counts = (rx + ry + rz).ravel()
    keep = counts <= order
    positions = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)[keep]
    return positions, counts[keep]



def _render(delays: np.ndarray, amps: np.ndarray, rows: np.ndarray, n_rows: int, n_taps: int) -> np.ndarray:
    """Sum Hann-windowed sinc pulses centred at fractional ``delays`` (in samples) into ``rows``."""
    out = np.zeros(n_rows * n_taps)
    offsets = np.arange(-SINC_HALF_WIDTH + 1, SINC_HALF_WIDTH + 1)
    for lo in range(0, delays.shape[0], _IMAGE_CHUNK):
        d = delays[lo:lo + _IMAGE_CHUNK]
        a = amps[lo:lo + _IMAGE_CHUNK]
        r = rows[lo:lo + _IMAGE_CHUNK]
        idx = np.floor(d).astype(np.int64)[:, None] + offsets[None, :]
        x = idx - d[:, None]
        w = 0.5 * (1.0 + np.cos(np.pi * x / SINC_HALF_WIDTH))
        vals = a[:, None] * np.sinc(x) * w
        ok = (idx >= 0) & (idx < n_taps)
        flat = (r[:, None] * n_taps + idx)[ok]
        out += np.bincount(flat, weights=vals[ok], minlength=n_rows * n_taps)
    return out.reshape(n_rows, n_taps)


def _decay_slope(taps: np.ndarray, sample_rate: int, fit_db: Tuple[float, float]) -> float:
    """Slope in dB/s of the line fitted to the energy decay curve; nan if the fit range is never spanned."""
    energy = taps ** 2
    edc = np.cumsum(energy[::-1])[::-1]
    if edc[0] <= 0:
        return math.nan
    with np.errstate(divide="ignore"):
        edc_db = 10.0 * np.log10(edc / edc[0])
    hi, lo = fit_db
    sel = np.nonzero((edc_db <= hi) & (edc_db >= lo))[0]
    if sel.size < 2:
        return math.nan
    slope, _ = np.polyfit(sel / sample_rate, edc_db[sel], 1)
    return float(slope)


def _measured_rt60(taps: np.ndarray, sample_rate: int) -> float:
    slope = _decay_slope(taps, sample_rate, RT60_FIT_DB)
    if math.isnan(slope):
        return 0.0
    if slope >= 0:
        return math.inf
    return -60.0 / slope


def calibrate_absorption(basis: np.ndarray, rt60: float, sample_rate: int = SAMPLE_RATE) -> Optional[float]:
    """Wall absorption whose rendered response measures ``rt60`` by Schroeder integration.

    ``basis`` holds one rendered row per reflection count. Decay rates
    ``-ln(1 - a)`` are scanned from the most absorbing down and the first
    bracket that crosses the target is bisected, which keeps the search on
    the branch where the decay, not the truncation window, sets the
    measurement. Returns None when no rate reaches the target.
    """
    counts = np.arange(basis.shape[0])

    def measured(rate: float) -> float:
        return _measured_rt60(np.exp(-0.5 * rate * counts) @ basis, sample_rate)

    max_rate = -math.log(1.0 - MAX_ABSORPTION)
    previous = None
    for rate in np.geomspace(max_rate, MIN_DECAY_RATE, CALIBRATION_GRID):
        if measured(rate) >= rt60:
            break
        previous = rate
    else:
        return None
    if previous is None:
        return MAX_ABSORPTION
    fast, slow = float(previous), float(rate)
    for _ in range(CALIBRATION_STEPS):
        mid = math.sqrt(fast * slow)
        if measured(mid) >= rt60:
            slow = mid
        else:
            fast = mid
    return 1.0 - math.exp(-math.sqrt(fast * slow))


def generate_rir(
    room: RoomSpec,
    src_pos: Sequence[float],
    mic_pos: Sequence[float],
    order: Optional[int] = None,
    absorption: Optional[float] = None,
    delay_offset: float = 0.0,
    sample_rate: int = SAMPLE_RATE,
    calibrate: bool = True,
) -> RIR:
    """Image-source RIR of a shoebox room.

    Each image with r wall reflections at distance d contributes
    ``(1 - a)^(r/2) / (4 pi d)`` at ``d / c * fs + delay_offset`` samples,
    where ``a`` is the wall absorption. ``order`` defaults to
    ``reflection_order(room)``. Without an explicit ``absorption``, ``a`` is
    calibrated to the room's RT60 (falling back to the Sabine coefficient
    when the target cannot be reached at this order), or is the Sabine
    coefficient when ``calibrate`` is False.
    """
    src = np.asarray(src_pos, dtype=np.float64)
    mic = np.asarray(mic_pos, dtype=np.float64)
    for name, p in (("src_pos", src), ("mic_pos", mic)):
        if p.shape != (3,) or not room.contains(p):
            raise GeometryError(name, f"{p.tolist()} is not inside room {room.dims.tolist()}")
    if order is None:
        order = reflection_order(room)
    if order < 0:
        raise ConfigError("order", f"must be >= 0, got {order}")
    if not 0.0 <= delay_offset:
        raise ConfigError("delay_offset", f"must be >= 0, got {delay_offset}")
    if absorption is not None and not 0.0 <= absorption <= 1.0:
        raise ConfigError("absorption", f"must be in [0, 1], got {absorption}")
    direct = float(np.linalg.norm(src - mic))
    if direct < MIN_SOURCE_DISTANCE:
        raise GeometryError("src_pos", f"source and microphone coincide (d={direct:.4f} m)")

    c = room.speed_of_sound
    n_taps = int(math.ceil(direct / c * sample_rate + delay_offset + room.rt60 * sample_rate)) + SINC_HALF_WIDTH + 1

    positions, counts = _images(room, src, order)
    dist = np.linalg.norm(positions - mic[None, :], axis=1)
    delays = dist / c * sample_rate + delay_offset
    keep = delays < n_taps + SINC_HALF_WIDTH
    basis = _render(delays[keep], 1.0 / (4.0 * np.pi * dist[keep]), counts[keep], order + 1, n_taps)

    if absorption is not None:
        wall = float(absorption)
    else:
        wall = sabine_absorption(room)
        fitted = calibrate_absorption(basis, room.rt60, sample_rate) if calibrate and order > 0 else None
        if fitted is not None:
            logger.debug(f"wall absorption {fitted:.4f} (Sabine {wall:.4f}) for rt60={room.rt60:.3f}s")
            wall = fitted
        elif calibrate and order > 0:
            logger.debug(f"rt60={room.rt60:.3f}s unreachable at order {order}; using Sabine absorption {wall:.4f}")
    gains = (1.0 - wall) ** (np.arange(order + 1) / 2.0)
    return RIR(gains @ basis, sample_rate)


def direct_path_samples(room: RoomSpec, src_pos: Sequence[float], mic_pos: Sequence[float], sample_rate: int = SAMPLE_RATE) -> float:
    d = float(np.linalg.norm(np.asarray(src_pos, dtype=np.float64) - np.asarray(mic_pos, dtype=np.float64)))
    return d / room.speed_of_sound * sample_rate


def schroeder_rt60(rir: RIR, fit_db: Tuple[float, float] = RT60_FIT_DB) -> float:
    """RT60 from the backward-integrated energy decay curve.

    A line is fitted to the decay between ``fit_db`` levels and extrapolated
    to -60 dB.
    """
    taps = np.asarray(rir.taps, dtype=np.float64)
    if not np.any(taps):
        raise ConfigError("rir", "all-zero impulse response")
    slope = _decay_slope(taps, rir.sample_rate, fit_db)
    if math.isnan(slope):
        raise ConfigError("rir", f"decay never spans {fit_db[0]}..{fit_db[1]} dB")
    if slope >= 0:
        raise ConfigError("rir", "energy decay curve is not decreasing")
    return float(-60.0 / slope)
