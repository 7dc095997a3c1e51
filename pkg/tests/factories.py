"""Actions shared by the test modules."""

from nilmix.algebra.matrices import UnimodularMatrix
from nilmix.spectrum.action import ZlAction

CAT_MATRIX = UnimodularMatrix(((2, 1), (1, 1)))
CAT = ZlAction((CAT_MATRIX,))

# companion(x^3 - 3x - 1) and A^2 - 2I
T3_A = UnimodularMatrix(((0, 0, 1), (1, 0, 3), (0, 1, 0)))
T3_B = UnimodularMatrix(((-2, 1, 0), (0, 1, 1), (1, 0, 1)))
T3 = ZlAction((T3_A, T3_B))
# the same Z^2 action on other generating pairs
T3_AB_B = ZlAction((T3_A @ T3_B, T3_B))
T3_A_AB = ZlAction((T3_A, T3_A @ T3_B))

IDENTITY = ZlAction((UnimodularMatrix.identity(2),))
MINUS_IDENTITY = ZlAction((UnimodularMatrix(((-1, 0), (0, -1))),))

# companion of the Salem polynomial x^4 - x^3 - x^2 - x + 1
SALEM = ZlAction(
    (UnimodularMatrix(((0, 0, 0, -1), (1, 0, 0, 1), (0, 1, 0, 1), (0, 0, 1, 1))),)
)
