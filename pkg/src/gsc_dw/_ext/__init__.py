"""Compiled kernels; see :mod:`gsc_dw.kernels` for the dispatching wrapper."""
