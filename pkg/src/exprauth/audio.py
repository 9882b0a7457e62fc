"""Frame-level audio features.

The conditioning sequence is an L x D array, frame-synchronous with the
expression sequence. The built-in extractor computes windowed spectral
band energies and linearly resamples them to exactly L frames; it is a
pluggable stand-in for any stronger pretrained speech encoder.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class Waveform:
    """Raw mono audio samples."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        if np.asarray(self.samples).size == 0:
            raise InputError("waveform is empty")


def encode_audio(waveform, L, feature_dim=16, window=400, hop=160):
    """Deterministic L x D spectral-band energy features.

    The waveform is framed with the given window/hop, each frame's power
    spectrum is pooled into feature_dim log-energy bands with
    geometrically spaced edges, and the band tracks are linearly
    resampled to exactly L frames.
    """
    samples = np.asarray(waveform.samples, dtype=np.float64).ravel()
    if samples.size == 0:
        raise InputError("waveform is empty")
    if samples.size < window:
        samples = np.pad(samples, (0, window - samples.size))

    n_frames = 1 + (samples.size - window) // hop
    hann = np.hanning(window)
    frames = np.stack(
        [samples[i * hop : i * hop + window] * hann for i in range(n_frames)]
    )
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2  # (n_frames, window//2+1)

    n_bins = power.shape[1]
    edges = np.unique(
        np.round(np.geomspace(1, n_bins, feature_dim + 1)).astype(int)
    )
    while len(edges) < feature_dim + 1:  # tiny windows: pad degenerate edges
        edges = np.append(edges, edges[-1])
    bands = np.stack(
        [power[:, edges[i] - 1 : max(edges[i + 1], edges[i] + 1)].sum(axis=1)
         for i in range(feature_dim)],
        axis=1,
    )
    feats = np.log1p(bands)

    # resample each band track to exactly L frames
    src = np.linspace(0.0, 1.0, n_frames) if n_frames > 1 else np.array([0.0])
    dst = np.linspace(0.0, 1.0, L)
    out = np.stack([np.interp(dst, src, feats[:, d]) for d in range(feature_dim)],
                   axis=1)
    return np.ascontiguousarray(out)
