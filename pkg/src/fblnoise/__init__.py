"""Photocurrent noise spectra of a laser, a laser in a feedback loop, and a
strongly coupled two-laser measuring scheme."""
__version__ = "0.1.0"
