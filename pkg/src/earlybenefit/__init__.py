"""earlybenefit: benefit-driven early classification of time series.

Trains per-class benefit regressors over prefixes of multivariate,
variable-length sequences and, at inference time, streams observations and
emits a label the moment the estimated benefit of doing so turns positive.
"""

__version__ = "0.1.0"
