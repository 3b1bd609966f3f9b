"""Resonance analysis, normal-form coefficients and Sobolev growth experiments
for gravity water waves with constant vorticity."""

__version__ = "0.1.0"

from .exact import Ball, RadicalSum, Sign, radical_sum_sign, rational_sqrt_canonicalize  # noqa: E402
from .dispersion import FrequencyTable, Vorticity, multipliers, omega_big, omega_small  # noqa: E402
from .resonance import (GoodSet, certify_good_set, construct_good_sets, four_wave_classify,  # noqa: E402
                        three_wave_min, two_wave_gap_scan, two_wave_partner)

__all__ = [
    "Ball", "RadicalSum", "Sign", "radical_sum_sign", "rational_sqrt_canonicalize",
    "FrequencyTable", "Vorticity", "multipliers", "omega_big", "omega_small",
    "GoodSet", "certify_good_set", "construct_good_sets", "four_wave_classify",
    "three_wave_min", "two_wave_gap_scan", "two_wave_partner",
]
