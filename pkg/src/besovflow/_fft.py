"""FFT entry points. scipy's pocketfft with multithreading when available."""

import numpy as np

try:
    import scipy.fft as _sfft

    def fftn(a):
        return _sfft.fftn(a, workers=-1)

    def ifftn(a):
        return _sfft.ifftn(a, workers=-1)

    def rfftn(a):
        return _sfft.rfftn(a, workers=-1)

    def irfftn(a, shape):
        return _sfft.irfftn(a, s=shape, workers=-1)

except ImportError:  # pragma: no cover
    fftn = np.fft.fftn
    ifftn = np.fft.ifftn
    rfftn = np.fft.rfftn

    def irfftn(a, shape):
        return np.fft.irfftn(a, s=shape)
