"""widthlab: min-max sweepout tightening, harmonic replacement, varifold
distances and Ricci width decay, on discretized sphere/disk/cylinder domains."""

__version__ = "0.1.0"
