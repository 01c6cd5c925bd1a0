"""
Coherence-Trapping Frequency Estimation Toolkit
Lindblad simulation, closed-form decoherence functions, precision bounds and
the trapped-ion realization of the coherence-trapping Ramsey strategy.
"""

__version__ = "1.0.0"
__author__ = "Coherence Trapping Team"
__description__ = "Noisy frequency estimation with coherence trapping"
