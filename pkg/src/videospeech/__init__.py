"""Raw-waveform speech reconstruction from silent mouth-region video with WGAN-GP."""

__version__ = "0.1.0"
