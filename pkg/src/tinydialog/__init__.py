"""Desk-scale goal-oriented dialog pipeline.

Subpackages cover the full loop: a tiny reverse-mode autodiff engine
(`tensor`), utterance featurization (`featurize`), an embedding intent
classifier (`nlu`), a recurrent embedding dialog policy with memory
fusion (`policy`), entrainment-based response adaptation (`adapt`), a
synthetic corpus generator with parsers (`corpus`), and a CLI (`cli`).
"""

__version__ = "0.1.0"
