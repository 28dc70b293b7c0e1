#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

"""Image-source room impulse responses, Schroeder T60 measurement, and y = s * g (n = 0)."""

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from numpy.polynomial.polynomial import polyval
from scipy.signal import fftconvolve
from scipy.stats import linregress

from DeReverb.logger import LOGGER
from ._dataclass import RirConfig, RoomSpec
from ._errors import DataError, DecayRangeError, InvalidSignalError, UnachievableT60Error
from ._signal import Waveform

SABINE = 0.161  # 24 ln(10) / 343, s/m
IMAGE_CHUNK = 20_000
FIT_UPPER_DB, FIT_LOWER_DB = -5.0, -25.0
CALIBRATION_STEPS = 12
CALIBRATION_TOL = 0.02
CALIBRATION_WARN = 0.1
MIN_ABSORPTION = 1e-6


@dataclass(frozen=True, eq=False)
class ImpulseResponse:
    taps: np.ndarray
    sample_rate: int
    beta: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "taps", np.asarray(self.taps, dtype=np.float64).reshape(-1))

    def __len__(self) -> int:
        return self.taps.shape[0]

    def validate(self) -> "ImpulseResponse":
        if not np.all(np.isfinite(self.taps)):
            raise InvalidSignalError("impulse response contains non-finite taps")
        if not np.sum(self.taps**2) > 0:
            raise InvalidSignalError("impulse response has no energy")
        return self


def reflection_from_t60(
    room: RoomSpec, t60: float, model: Literal["sabine", "eyring"] = "sabine"
) -> float:
    """Uniform wall reflection coefficient that yields ``t60`` in ``room``.

    Sabine: alpha = 0.161 V / (S T60). Eyring: alpha = 1 - exp(-0.161 V / (S T60)).
    beta = sqrt(1 - alpha) in both cases.
    """
    if t60 <= 0:
        raise DataError(f"T60 must be positive, got {t60}")
    ratio = SABINE * room.volume / (room.surface * t60)
    if model == "sabine":
        alpha = ratio
        if alpha >= 1.0:
            raise UnachievableT60Error(
                f"unachievable T60 {t60:.3f}s for room {room.dims} (alpha={alpha:.3f})"
            )
        return math.sqrt(1.0 - alpha)
    return math.exp(-ratio / 2.0)


def place_randomly(
    dims: tuple[float, float, float],
    seed: int,
    wall_margin: float = 0.5,
    min_separation: float = 1.0,
    max_tries: int = 10_000,
) -> RoomSpec:
    lengths = np.asarray(dims, dtype=np.float64)
    if np.any(lengths <= 2 * wall_margin):
        raise DataError(f"room {dims} too small for a {wall_margin} m wall margin")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        source = rng.uniform(wall_margin, lengths - wall_margin)
        receiver = rng.uniform(wall_margin, lengths - wall_margin)
        if np.linalg.norm(source - receiver) >= min_separation:
            return RoomSpec(
                dims=dims,
                source=tuple(float(v) for v in source),
                receiver=tuple(float(v) for v in receiver),
            )
    raise DataError(f"could not place source and receiver {min_separation} m apart in {dims}")


def image_order(room: RoomSpec, cfg: RirConfig) -> int:
    if cfg.max_image_order == "auto":
        return math.ceil(cfg.sound_speed * cfg.t60 / min(room.dims)) + 1
    return int(cfg.max_image_order)


def _axis_images(src: float, rcv: float, length: float, order: int):
    n = np.arange(-order, order + 1)
    q = np.array([0, 1])
    nn, qq = np.meshgrid(n, q, indexing="ij")
    nn, qq = nn.ravel(), qq.ravel()
    offset = (1 - 2 * qq) * src + 2 * nn * length - rcv
    reflections = np.abs(nn - qq) + np.abs(nn)
    image_index = np.abs(2 * nn - qq)
    return offset, reflections, image_index


def _image_sources(room: RoomSpec, cfg: RirConfig, order: int, max_dist: float):
    axes = [
        _axis_images(s, r, length, order)
        for s, r, length in zip(room.source, room.receiver, room.dims)
    ]
    (ox, rx, ix), (oy, ry, iy), (oz, rz, iz) = axes
    off_yz = oy[:, None] ** 2 + oz[None, :] ** 2
    refl_yz = ry[:, None] + rz[None, :]
    index_yz = iy[:, None] + iz[None, :]
    explicit = cfg.max_image_order != "auto"

    distances, reflections = [], []
    for off, refl, idx in zip(ox, rx, ix):
        dist = np.sqrt(off**2 + off_yz)
        keep = dist <= max_dist
        if explicit:
            keep &= (idx + index_yz) <= order
        distances.append(dist[keep])
        reflections.append((refl + refl_yz)[keep])
    return np.concatenate(distances), np.concatenate(reflections)


def _reflection_basis(
    distances: np.ndarray, reflections: np.ndarray, n_taps: int, cfg: RirConfig
) -> np.ndarray:
    """Tap patterns summed per reflection count, so taps(beta) = sum_k beta**k * basis[k]."""
    fs, c = cfg.sample_rate, cfg.sound_speed
    half = cfg.sinc_taps // 2
    n_orders = int(reflections.max()) + 1
    delay = distances / c * fs
    spreading = 1.0 / (4.0 * math.pi * distances)
    offsets = np.arange(-half, half + 1)
    basis = np.zeros(n_orders * n_taps)
    for start in range(0, delay.size, IMAGE_CHUNK):
        d = delay[start : start + IMAGE_CHUNK]
        a = spreading[start : start + IMAGE_CHUNK]
        k = reflections[start : start + IMAGE_CHUNK]
        center = np.rint(d).astype(np.int64)
        index = center[:, None] + offsets[None, :]
        t = index - d[:, None]
        lowpass = 0.5 * (1.0 + np.cos(np.pi * t / (half + 1))) * np.sinc(t)
        values = a[:, None] * lowpass
        valid = (index >= 0) & (index < n_taps)
        flat = k[:, None] * n_taps + index
        basis += np.bincount(flat[valid], weights=values[valid], minlength=basis.size)
    return basis.reshape(n_orders, n_taps)


def _render(basis: np.ndarray, beta: float, fs: int) -> ImpulseResponse:
    taps = polyval(beta, basis)
    return ImpulseResponse(taps=taps, sample_rate=fs, beta=beta).validate()


def _t60_ratio(rir: ImpulseResponse, target: float) -> float:
    try:
        return measure_t60(rir) / target
    except DecayRangeError:
        # still above the fit floor at the last tap: far too long
        return math.inf if energy_decay_curve(rir)[-1] > FIT_LOWER_DB else 0.0


def calibrate_reflection(basis: np.ndarray, target: float, beta0: float, fs: int) -> ImpulseResponse:
    """Search beta so the Schroeder T60 of the rendered RIR lands on ``target``.

    Works on the absorption exponent a = -ln(beta), which T60 scales roughly
    as 1/a. Each step rescales a by measured/target and falls back to
    bisection when that leaves the bracket. Deterministic for fixed inputs.
    """
    absorb = max(-math.log(beta0), MIN_ABSORPTION)
    lo, hi = 0.0, math.inf
    best, best_err = None, math.inf
    for _ in range(CALIBRATION_STEPS):
        rir = _render(basis, math.exp(-absorb), fs)
        ratio = _t60_ratio(rir, target)
        err = abs(math.log(ratio)) if 0.0 < ratio < math.inf else math.inf
        if err < best_err:
            best, best_err = rir, err
        if abs(ratio - 1.0) <= CALIBRATION_TOL:
            break
        if ratio > 1.0:
            lo = absorb
        else:
            hi = absorb
        step = absorb * ratio if 0.0 < ratio < math.inf else math.nan
        if not lo < step < hi:
            step = 2.0 * absorb if math.isinf(hi) else 0.5 * (lo + hi)
        absorb = step

    if best is None:
        raise DecayRangeError(f"no reflection coefficient gives a measurable decay for T60 {target:.3f}s")
    if best_err > math.log(1.0 + CALIBRATION_WARN):
        LOGGER.warning(
            "T60 calibration for %.3fs stopped %.0f%% off (beta=%.4f)",
            target, 100.0 * math.expm1(best_err), best.beta,
        )
    return best


def generate_rir(room: RoomSpec, cfg: RirConfig, seed: Optional[int] = None) -> ImpulseResponse:
    """Allen-Berkley image-source RIR with windowed-sinc fractional delays.

    Rooms without a source/receiver are placed from ``seed``; a placed room
    ignores it, so the output is a deterministic function of the inputs.
    Unless ``cfg.beta`` is forced, the wall reflection starts from the
    ``decay_model`` inversion and, with ``cfg.calibrate``, is tuned until the
    measured T60 matches ``cfg.t60``. The chosen value is kept on ``.beta``.
    """
    if not room.is_placed:
        if seed is None:
            raise DataError("room has no source/receiver positions and no seed to draw them")
        room = place_randomly(room.dims, seed)

    n_taps = cfg.n_taps
    order = image_order(room, cfg)
    max_dist = (n_taps + cfg.sinc_taps // 2) * cfg.sound_speed / cfg.sample_rate
    distances, reflections = _image_sources(room, cfg, order, max_dist)
    basis = _reflection_basis(distances, reflections, n_taps, cfg)

    if cfg.beta is not None:
        rir = _render(basis, cfg.beta, cfg.sample_rate)
    else:
        beta0 = reflection_from_t60(room, cfg.t60, cfg.decay_model)
        if cfg.calibrate:
            rir = calibrate_reflection(basis, cfg.t60, beta0, cfg.sample_rate)
        else:
            rir = _render(basis, beta0, cfg.sample_rate)
    LOGGER.debug(
        "RIR t60=%.2f beta=%.4f order=%d images=%d taps=%d",
        cfg.t60, rir.beta, order, distances.size, n_taps,
    )
    return rir


def energy_decay_curve(rir: ImpulseResponse) -> np.ndarray:
    energy = rir.taps**2
    edc = np.cumsum(energy[::-1])[::-1]
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(edc / edc[0])


def measure_t60(
    rir: ImpulseResponse, upper_db: float = FIT_UPPER_DB, lower_db: float = FIT_LOWER_DB
) -> float:
    """Schroeder backward integration, line fit on the upper..lower dB span, extrapolated to -60 dB."""
    rir.validate()
    edc_db = energy_decay_curve(rir)
    span = np.nonzero((edc_db <= upper_db) & (edc_db >= lower_db))[0]
    if span.size < 2 or not np.any(edc_db < lower_db):
        raise DecayRangeError(
            f"decay from {upper_db} dB to {lower_db} dB not reached within {len(rir)} taps"
        )
    fit = linregress(span / rir.sample_rate, edc_db[span])
    if fit.slope >= 0:
        raise DecayRangeError("energy decay curve is not decreasing")
    return -60.0 / fit.slope


def convolve(s: Waveform, g: ImpulseResponse) -> Waveform:
    """Full linear convolution truncated to ``len(s)``, aligned at lag 0."""
    s.validate()
    if s.sample_rate != g.sample_rate:
        raise DataError(
            f"sample-rate mismatch: signal {s.sample_rate} Hz, RIR {g.sample_rate} Hz"
        )
    y = fftconvolve(s.samples, g.taps)[: len(s)]
    return Waveform(samples=y, sample_rate=s.sample_rate)
