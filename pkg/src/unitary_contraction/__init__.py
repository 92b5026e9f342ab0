"""Matrix-scale simulation of the two-stage contraction of the unitary group.

Modules
-------
circle_measure
    Atomic probability measures on the circle, moments, pushforwards.
transport
    Quadratic Wasserstein distance for the chordal cost.
free_conv
    Free multiplicative convolution: moment recursion and random-matrix sampler.
matrix_model
    Haar unitaries, spectral measures, functional calculus, the trace 2-norm.
homotopy
    The randomizing path, the deformation ``g_t``, and the composite contraction.
"""
__version__ = "0.1.0"

from .circle_measure import (
    CircleMeasure,
    MomentSequence,
    dirac,
    haar_discretization,
    moments,
    normalize_angle,
    pushforward,
    quantile_sample,
)
from .free_conv import boxtimes_moments, boxtimes_sampled, freeness_defect, w2_contraction_check
from .homotopy import build_ladder, contract, f_map, g_deform, h_path, lemma32_bound, schedule_s
from .matrix_model import (
    functional_calculus,
    principal_log_generator,
    sample_haar_unitary,
    spectral_measure,
    two_norm,
)
from .transport import w2_bruteforce, w2_cyclic, w2_exact, w2_to_delta1, w2_to_haar

__all__ = [
    "CircleMeasure",
    "MomentSequence",
    "dirac",
    "haar_discretization",
    "moments",
    "normalize_angle",
    "pushforward",
    "quantile_sample",
    "boxtimes_moments",
    "boxtimes_sampled",
    "freeness_defect",
    "w2_contraction_check",
    "build_ladder",
    "contract",
    "f_map",
    "g_deform",
    "h_path",
    "lemma32_bound",
    "schedule_s",
    "functional_calculus",
    "principal_log_generator",
    "sample_haar_unitary",
    "spectral_measure",
    "two_norm",
    "w2_bruteforce",
    "w2_cyclic",
    "w2_exact",
    "w2_to_delta1",
    "w2_to_haar",
]
