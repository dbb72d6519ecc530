"""Shaped-pulse dynamical decoupling: waveforms, analytic response, spin simulation."""

__version__ = "0.1.0"
