from .intervals import CertifiedComplex, working_precision
from .matrices import UnimodularMatrix, char_poly
from .numberfield import NumberField, NumberFieldElement, nf_arith, nf_embeddings
from .polynomials import IntPolynomial, certified_roots, roots_of_unity_free

__all__ = [
    "CertifiedComplex",
    "IntPolynomial",
    "NumberField",
    "NumberFieldElement",
    "UnimodularMatrix",
    "certified_roots",
    "char_poly",
    "nf_arith",
    "nf_embeddings",
    "roots_of_unity_free",
    "working_precision",
]
