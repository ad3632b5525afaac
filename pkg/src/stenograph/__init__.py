"""Desk-scale multi-task AI-ECG pipeline.

Library layout:

- :mod:`stenograph.autodiff` -- float64 tensors + reverse-mode differentiation
- :mod:`stenograph.cohort` -- ECG/label domain types, normalization, grouped CV
- :mod:`stenograph.synthgen` -- synthetic 12-lead cohorts with planted lesions
- :mod:`stenograph.augment` -- stochastic ECG augmentations on a cosine schedule
- :mod:`stenograph.model` -- compact Net1D-style CNN with four vessel heads
- :mod:`stenograph.training` -- uncertainty-weighted multi-task training, PCGrad
- :mod:`stenograph.metrics` -- AUC/CI, calibration, Brier, Spearman, box summaries
- :mod:`stenograph.survival` -- risk thresholds, cumulative incidence, log-rank
- :mod:`stenograph.explain` -- R-peak detection, beat alignment, waveform overlays
- :mod:`stenograph.cli` -- the `stenograph` command
"""

__version__ = "0.1.0"

VESSELS = ("RCA", "LM", "LAD", "LCX")

LEADS = ("I", "II", "III", "aVR", "aVL", "aVF",
         "V1", "V2", "V3", "V4", "V5", "V6")
