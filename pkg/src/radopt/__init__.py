"""Search-mode design toolkit for software-defined phased-array radars.

Stages: beam synthesis (CMA-ES), pulse-Doppler waveform selection, scan
pattern selection (weighted set cover), wrapped in a digital-twin loop that
re-plans the mode after element failures or threat changes.
"""

__version__ = "0.1.0"
