"""Sensor-signal conditioning: padding, resampling, velocity, spectra.

These operate on raw numeric arrays, before any basis machinery. Rows are
subjects, the last axis is time (or frequency after ``fft_magnitude``).
"""

import dataclasses

import numpy as np

WINDOWS = ("hann", "rect")


def pad_last_observation(signals):
    """Extend every signal to the longest length by repeating its last value."""
    arrays = [np.asarray(s, dtype=float) for s in signals]
    for i, arr in enumerate(arrays):
        if arr.ndim != 1:
            raise ValueError(f"signal {i} is not one-dimensional")
        if arr.size == 0:
            raise ValueError(f"signal {i} is empty and cannot be padded")
    target = max(arr.size for arr in arrays)
    return [
        np.concatenate([arr, np.full(target - arr.size, arr[-1])])
        if arr.size < target
        else arr.copy()
        for arr in arrays
    ]


def resample_linear(signal, source_grid, target_grid):
    """Piecewise-linear resampling; exact at shared points, no extrapolation."""
    source = np.asarray(source_grid, dtype=float)
    target = np.asarray(target_grid, dtype=float)
    values = np.asarray(signal, dtype=float)
    if source.ndim != 1 or source.size < 2:
        raise ValueError("source grid must be one-dimensional with >= 2 points")
    if np.any(np.diff(source) <= 0):
        raise ValueError("source grid must be strictly increasing")
    if values.shape[-1] != source.size:
        raise ValueError("signal length does not match the source grid")
    if target.min() < source[0] or target.max() > source[-1]:
        raise ValueError("target grid extends beyond the source span")
    if values.ndim == 1:
        return np.interp(target, source, values)
    return np.apply_along_axis(lambda row: np.interp(target, source, row), -1, values)


def differentiate(signal, grid):
    """First derivative on a uniform grid: central interior, one-sided ends."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(signal, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise ValueError("grid must be one-dimensional with >= 3 points")
    steps = np.diff(grid)
    h = steps[0]
    if h <= 0 or not np.allclose(steps, h, rtol=1e-8, atol=0.0):
        raise ValueError("grid must be uniformly spaced and increasing")
    if values.shape[-1] != grid.size:
        raise ValueError("signal length does not match the grid")
    return np.gradient(values, h, axis=-1, edge_order=2)


@dataclasses.dataclass(frozen=True)
class Spectrum:
    """One-sided amplitude spectrum, usable as a functional covariate."""

    frequencies: np.ndarray
    magnitudes: np.ndarray
    window: str
    sample_rate: float


def fft_magnitude(signal, sample_rate, f_max, window="hann"):
    """Amplitude spectrum on [0, f_max].

    The signal is tapered (``window="hann"``, the default) or left as is
    (``"rect"``), then scaled by 2/sum(window) so a pure tone at a bin
    center reads off its amplitude; the DC bin (and the Nyquist bin, when
    present) carries no mirror image and is scaled by 1/sum(window).
    """
    values = np.asarray(signal, dtype=float)
    n = values.shape[-1]
    if n < 2:
        raise ValueError("need at least two samples")
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    nyquist = sample_rate / 2.0
    if not 0.0 < f_max <= nyquist:
        raise ValueError(f"f_max must lie in (0, {nyquist}] (the Nyquist limit)")
    if window == "hann":
        w = np.hanning(n)
    elif window == "rect":
        w = np.ones(n)
    else:
        raise ValueError(f"window must be one of {WINDOWS}")

    spectrum = np.abs(np.fft.rfft(values * w, axis=-1))
    scale = np.full(spectrum.shape[-1], 2.0 / w.sum())
    scale[0] = 1.0 / w.sum()
    if n % 2 == 0:  # the Nyquist bin also has no mirror
        scale[-1] = 1.0 / w.sum()
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    keep = freqs <= f_max * (1.0 + 1e-12)
    return Spectrum(
        frequencies=freqs[keep],
        magnitudes=spectrum[..., keep] * scale[keep],
        window=window,
        sample_rate=float(sample_rate),
    )
