"""Fixed quadrature rules shared by the assembly and field-evaluation code.

Triangles use a symmetric 6-point rule exact for degree 4, so products of P1
functions against smoothly varying metric weights integrate at O(h^4) element
consistency. Boundary edges use 3-point Gauss-Legendre (degree 5).
"""

import numpy as np

# Dunavant degree-4 rule, two symmetric orbits of 3 points each.
_A1, _B1, _W1 = 0.108103018168070, 0.445948490915965, 0.223381589678011
_A2, _B2, _W2 = 0.816847572980459, 0.091576213509771, 0.109951743655322

TRI_BARY = np.array(
    [
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
TRI_WEIGHTS = np.array([_W1, _W1, _W1, _W2, _W2, _W2])  # sums to 1

# Gauss-Legendre on [0, 1].
_G = np.sqrt(3.0 / 5.0)
EDGE_NODES = np.array([(1.0 - _G) / 2.0, 0.5, (1.0 + _G) / 2.0])
EDGE_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


def triangle_points(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Physical quadrature points, shape (n_triangles, 6, 2)."""
    corners = vertices[triangles]  # (nt, 3, 2)
    return np.einsum("qk,tkd->tqd", TRI_BARY, corners)


def edge_points(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gauss nodes on segments a->b, shape (n_edges, 3, 2)."""
    s = EDGE_NODES[None, :, None]
    return a[:, None, :] * (1.0 - s) + b[:, None, :] * s
