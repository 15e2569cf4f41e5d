"""Inactivity-leak analysis and simulation toolkit.

Submodules:

* :mod:`leaklab.leak_math`: continuous stake decay and finalization times
* :mod:`leaklab.bounce_stats`: inactivity-score diffusion under bouncing
* :mod:`leaklab.ffg`: checkpoint voting, justification and penalties
* :mod:`leaklab.scenarios`: partition and attack scenarios
* :mod:`leaklab.cli`: the ``leaklab`` command
"""

__version__ = "0.1.0"
