"""
Acoustic channel: absorption, noise and attenuation
====================================================

Absorption grows roughly with f^2 while ambient noise falls with f, so the
usable band of an underwater link shrinks as links get longer.
"""

import numpy as np

from uwcap.channel import AbsorptionProfile, absorption_db_per_km, noise_psd_ln

prof = AbsorptionProfile()  # one grid unit = 1 km

freqs = np.array([0.5, 1, 2, 5, 10, 20, 50, 100])
print(" f [kHz]   absorption [dB/km]   noise [dB re 1 uPa^2/Hz]")
for f in freqs:
    noise_db = noise_psd_ln(prof, f).ln_value * 10 / np.log(10)
    print(f"{f:8.1f}   {absorption_db_per_km(prof, f):18.4f}   {noise_db:10.2f}")

# Attenuation is c0 * r^alpha * a(f)^r. For long links a(f)^r overflows a
# double, so everything stays in log domain.
ch = prof.at(10.0)
r = np.array([1.0, 10.0, 100.0, 1000.0, 10000.0])
print("\nln A(r, 10 kHz) for r =", r, "km:", np.array2string(ch.ln_attenuation(r), precision=2))

# The grid unit rescales the absorption exponent. With 500 km per unit the
# same carriers see a per-hop absorption of tens of nepers.
far = AbsorptionProfile(unit_km=500.0)
for f in (1.0, 2.83, 8.0):
    print(f"unit 500 km, f = {f:5.2f} kHz: ln a = {far.at(f).ln_a:8.3f}")
