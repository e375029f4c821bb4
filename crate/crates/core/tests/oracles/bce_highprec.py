"""High-precision reference for the mean preference BCE loss.

Run with: python3 bce_highprec.py
"""
import mpmath

mpmath.mp.dps = 50
margins = [-7.25, -3.5, -1.0, -0.125, 0.0, 1e-9, 0.3, 0.75, 2.5, 6.0, 12.0, 33.0]
total = sum(mpmath.log(1 + mpmath.exp(-mpmath.mpf(m))) for m in margins)
print(mpmath.nstr(total / len(margins), 25))
