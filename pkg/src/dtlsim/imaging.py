"""Grayscale test images, PGM I/O and detector-based segmentation.

Images are 8-bit grayscale with maxval fixed at 255; both the ASCII
(P2) and binary (P5) PGM variants are read, P5 is the default on
write. Comments are tolerated anywhere in a header being read but are
never emitted, so writes are byte-deterministic.

Segmentation maps pixel intensities onto detector input voltages, looks
the swept response up in a table and normalizes it to [0, 1]. Applied
to a centered Gaussian intensity blob, a band detector lights an
annulus: the ring's radius tracks where the blob crosses the band and
its thickness tracks the band width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (BadHeader, BadMagic, DomainError, LutRangeError, NoRing,
                     TruncatedData, UnsupportedMaxval)
from .solver import SweepResult

__all__ = [
    "ImageGray",
    "ResponseLut",
    "RingMetrics",
    "apply_detector",
    "gen_gaussian_image",
    "pixel_to_voltage",
    "read_pgm",
    "ring_metrics",
    "write_pgm",
]


class ImageGray:
    """8-bit grayscale image backed by a (height, width) uint8 array."""

    def __init__(self, pixels):
        arr = np.asarray(pixels)
        if arr.ndim != 2 or arr.size == 0:
            raise DomainError("ImageGray needs a non-empty 2-D pixel array")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise DomainError(f"pixels must be integers, got {arr.dtype}")
            if arr.min() < 0 or arr.max() > 255:
                raise DomainError("pixel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        self.pixels = arr

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ImageGray):
            return NotImplemented
        return (self.pixels.shape == other.pixels.shape
                and bool(np.all(self.pixels == other.pixels)))

    def __repr__(self):
        return f"ImageGray({self.width}x{self.height})"


def gen_gaussian_image(size: int = 129, sigma: float | None = None,
                       amplitude: int = 255) -> ImageGray:
    """Centered Gaussian intensity blob.

    Pixel (y, x) gets round(amplitude * exp(-r^2 / (2 sigma^2))) where r
    is the distance to the image center (size-1)/2. sigma defaults to
    size/6 so the blob decays to roughly nothing at the borders.
    """
    if size < 3:
        raise DomainError(f"size must be >= 3, got {size}")
    if sigma is None:
        sigma = size / 6.0
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if not 0 < amplitude <= 255:
        raise DomainError(f"amplitude must lie in (0, 255], got {amplitude}")
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    r2 = (yy - c) ** 2 + (xx - c) ** 2
    vals = np.rint(amplitude * np.exp(-r2 / (2.0 * sigma * sigma)))
    return ImageGray(vals.astype(np.uint8))


def _read_header_tokens(data: bytes) -> tuple[list[bytes], int]:
    """First four whitespace-separated tokens, skipping # comments.

    Returns the tokens and the offset one byte past the single
    whitespace character that terminates the maxval token.
    """
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < 4:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
            j += 1
        if j == i:
            raise BadHeader("header ended before magic, size and maxval")
        tokens.append(data[i:j])
        i = j
    if i < n and data[i:i + 1].isspace():
        i += 1  # exactly one whitespace separates maxval from raster data
    return tokens, i


def read_pgm(path) -> ImageGray:
    """Read a P2 or P5 PGM file with maxval 255."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith((b"P2", b"P5")):
        magic = data[:2].decode("ascii", "replace") if data else "<empty>"
        raise BadMagic(f"not a P2/P5 PGM file (magic {magic!r})")
    tokens, off = _read_header_tokens(data)
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise BadHeader(f"non-integer size or maxval in header: "
                        f"{b' '.join(tokens[1:]).decode('ascii', 'replace')}")
    if width <= 0 or height <= 0:
        raise BadHeader(f"image size {width}x{height} is not positive")
    if maxval != 255:
        raise UnsupportedMaxval(f"only maxval 255 is supported, got {maxval}")
    count = width * height
    if magic == b"P5":
        raster = data[off:off + count]
        if len(raster) < count:
            raise TruncatedData(f"expected {count} raster bytes, "
                                f"got {len(raster)}")
        arr = np.frombuffer(raster, dtype=np.uint8, count=count)
    else:
        fields = data[off:].split()
        if len(fields) < count:
            raise TruncatedData(f"expected {count} samples, "
                                f"got {len(fields)}")
        try:
            vals = [int(f) for f in fields[:count]]
        except ValueError:
            raise TruncatedData("non-numeric sample in P2 raster")
        if min(vals) < 0 or max(vals) > 255:
            raise TruncatedData("P2 sample outside [0, 255]")
        arr = np.array(vals, dtype=np.uint8)
    return ImageGray(arr.reshape(height, width))


def write_pgm(path, image: ImageGray, binary: bool = True) -> None:
    """Write a PGM file, P5 by default, P2 when binary=False."""
    px = image.pixels
    header = f"{'P5' if binary else 'P2'}\n{image.width} {image.height}\n255\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(px.tobytes())
        else:
            for row in px:
                fh.write((" ".join(str(int(v)) for v in row) + "\n")
                         .encode("ascii"))


def pixel_to_voltage(pixels, v_low: float = 0.0,
                     v_high: float = 3.0) -> np.ndarray:
    """Affine map of 8-bit intensities onto [v_low, v_high]."""
    if not v_high > v_low:
        raise DomainError(f"need v_high > v_low, got {v_low} .. {v_high}")
    arr = np.asarray(pixels, dtype=float)
    return v_low + (v_high - v_low) * arr / 255.0


class ResponseLut:
    """Lookup table over a swept response, normalized on application.

    Inputs must be strictly increasing. Lookups between samples are
    linearly interpolated; lookups outside the swept range raise
    LutRangeError rather than extrapolating.
    """

    def __init__(self, inputs, outputs):
        x = np.asarray(inputs, dtype=float)
        y = np.asarray(outputs, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
            raise DomainError("lut needs matching 1-D arrays of >= 2 points")
        if not np.all(np.diff(x) > 0):
            raise DomainError("lut inputs must be strictly increasing")
        self.inputs = x
        self.outputs = y

    @classmethod
    def from_sweep(cls, sweep: SweepResult, node: str) -> "ResponseLut":
        return cls(sweep.inputs, sweep.column(node))

    def __call__(self, voltages) -> np.ndarray:
        v = np.asarray(voltages, dtype=float)
        lo, hi = self.inputs[0], self.inputs[-1]
        if v.size and (v.min() < lo or v.max() > hi):
            bad = float(v.min()) if v.min() < lo else float(v.max())
            raise LutRangeError(
                f"voltage {bad:.6g} outside sweep range [{lo:.6g}, {hi:.6g}]")
        return np.interp(v, self.inputs, self.outputs)

    def normalized(self, voltages) -> np.ndarray:
        """Interpolated response scaled by the table's global extrema.

        A constant table normalizes to all zeros.
        """
        raw = self(voltages)
        lo = float(self.outputs.min())
        hi = float(self.outputs.max())
        if hi <= lo:
            return np.zeros_like(raw)
        return (raw - lo) / (hi - lo)


def apply_detector(image: ImageGray, lut: ResponseLut,
                   v_low: float = 0.0, v_high: float = 3.0) -> np.ndarray:
    """Per-pixel normalized detector response of an image.

    Pixels map affinely onto [v_low, v_high], the swept response is
    interpolated at those voltages and normalized by the table's global
    extrema, giving a float array in [0, 1].
    """
    volts = pixel_to_voltage(image.pixels, v_low, v_high)
    return lut.normalized(volts)


@dataclass(frozen=True)
class RingMetrics:
    """Radial summary of an annular response."""

    peak_radius: float
    thickness: float
    peak_brightness: float


def _radial_profile(response: np.ndarray,
                    center: tuple[float, float] | None) -> np.ndarray:
    h, w = response.shape
    if center is None:
        center = ((h - 1) / 2.0, (w - 1) / 2.0)
    cy, cx = center
    yy, xx = np.mgrid[0:h, 0:w]
    radii = np.rint(np.hypot(yy - cy, xx - cx)).astype(int)
    rmax = int(min(cy, cx, h - 1 - cy, w - 1 - cx))
    if rmax < 2:
        raise NoRing("image too small for a radial profile")
    prof = np.empty(rmax + 1)
    for r in range(rmax + 1):
        m = radii == r
        prof[r] = response[m].mean() if m.any() else 0.0
    return prof


def ring_metrics(response, center: tuple[float, float] | None = None
                 ) -> RingMetrics:
    """Ring position, full width at half maximum and peak brightness.

    The response is averaged over integer-rounded radii out to the
    largest full annulus. Raises NoRing when the profile is flat, peaks
    at the center (a blob, not a ring), or never falls back to half
    height on both sides of the peak.
    """
    resp = np.asarray(response, dtype=float)
    if resp.ndim != 2:
        raise DomainError("response must be a 2-D array")
    prof = _radial_profile(resp, center)
    peak = float(prof.max())
    if peak <= 0.0 or peak - float(prof.min()) < 1e-12:
        raise NoRing("radial profile is flat")
    ipk = int(prof.argmax())
    if ipk == 0:
        raise NoRing("response peaks at the center, not on a ring")
    half = 0.5 * peak
    lo = None
    for i in range(ipk, 0, -1):
        if prof[i - 1] < half <= prof[i]:
            lo = (i - 1) + (half - prof[i - 1]) / (prof[i] - prof[i - 1])
            break
    hi = None
    for i in range(ipk, len(prof) - 1):
        if prof[i] >= half > prof[i + 1]:
            hi = i + (prof[i] - half) / (prof[i] - prof[i + 1])
            break
    if lo is None or hi is None:
        raise NoRing("ring does not fall to half height on both sides")
    return RingMetrics(peak_radius=float(ipk),
                       thickness=float(hi - lo),
                       peak_brightness=peak)
