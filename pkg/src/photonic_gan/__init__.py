"""Simulator for GAN inference on a silicon-photonic accelerator.

Layers are described as a :class:`~photonic_gan.ir.ModelGraph`, executed by
an exact reference (:mod:`photonic_gan.numerics`) or the zero-skipping
transposed conv (:mod:`photonic_gan.sparse`), mapped onto ring-bank units
(:mod:`photonic_gan.schedule`) and costed (:mod:`photonic_gan.perf`).
"""
__version__ = "0.1.0"
