from .action import ActionValidator, ZlAction
from .certificates import anosov_check, ergodicity_certificate, shape_is_anosov
from .characters import Character, GaloisOrbit, galois_orbits, simultaneous_spectrum
from .lyapunov import lemma21_constant, lyapunov_map

__all__ = [
    "ActionValidator",
    "Character",
    "GaloisOrbit",
    "ZlAction",
    "anosov_check",
    "ergodicity_certificate",
    "galois_orbits",
    "lemma21_constant",
    "lyapunov_map",
    "shape_is_anosov",
    "simultaneous_spectrum",
]
