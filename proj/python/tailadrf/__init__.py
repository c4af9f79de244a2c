"""Robust dose-response estimation with extreme-value tail diagnostics."""

from tailadrf._core import (
    analyze,
    build_tail_report,
    effective_n,
    estimate_adrf,
    gaussian_weights,
    generate,
    pdhte_curve,
    pwm_fit,
    qr_quantile_curve,
    silverman_bandwidth,
    structural_theta,
    weighted_quantile,
)

__all__ = [
    "analyze",
    "build_tail_report",
    "effective_n",
    "estimate_adrf",
    "gaussian_weights",
    "generate",
    "pdhte_curve",
    "pwm_fit",
    "qr_quantile_curve",
    "silverman_bandwidth",
    "structural_theta",
    "weighted_quantile",
]
