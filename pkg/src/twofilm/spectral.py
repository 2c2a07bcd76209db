"""Cosine spectral basis with midpoint collocation.

Orthonormal basis on (0, L):

    phi_0(x) = sqrt(1/L),   phi_k(x) = sqrt(2/L) * cos(k*pi*x/L),  k >= 1.

Every basis function has vanishing first and third derivatives at x = 0 and
x = L, so the no-flux boundary conditions of the film system hold by
construction for any truncated expansion.

Quadrature uses the midpoint rule on Q equispaced cells, x_q = L(q+1/2)/Q
with uniform weight L/Q.  The midpoint rule integrates cos(m*pi*x/L) exactly
for every 1 <= m < 2Q, hence products of two basis functions (or of their
derivatives) are integrated exactly whenever both indices are <= n and
Q >= n + 1; discrete orthonormality then holds to rounding.  Transforms are
direct dense matrix products - at the intended resolutions (n <= 64) that is
both fast enough and free of FFT layout subtleties.
"""

import math

import numpy as np


class CosineBasis:
    """Truncated cosine basis {phi_0, ..., phi_n} with collocation grid."""

    def __init__(self, n: int, length: float, oversample: float = 4.0):
        if n < 1:
            raise ValueError(f"need at least modes 0..1, got n = {n}")
        if length <= 0.0:
            raise ValueError(f"domain length must be positive, got {length}")
        if oversample < 1.0:
            raise ValueError(f"oversample factor must be >= 1, got {oversample}")

        self.n = int(n)
        self.length = float(length)
        self.oversample = float(oversample)
        self.num_nodes = int(math.ceil(oversample * (n + 1)))
        if self.num_nodes < n + 1:
            raise ValueError("collocation grid coarser than the basis")

        q = np.arange(self.num_nodes)
        self.nodes = self.length * (q + 0.5) / self.num_nodes
        self.weight = self.length / self.num_nodes

        k = np.arange(self.n + 1)
        self.wavenumbers = k * np.pi / self.length          # k*pi/L
        amp = np.full(self.n + 1, np.sqrt(2.0 / self.length))
        amp[0] = np.sqrt(1.0 / self.length)

        arg = np.outer(self.wavenumbers, self.nodes)        # (n+1, Q)
        cos_part = np.cos(arg)
        sin_part = np.sin(arg)
        self._phi = amp[:, None] * cos_part
        self._dphi = -amp[:, None] * self.wavenumbers[:, None] * sin_part
        self._d2phi = -amp[:, None] * self.wavenumbers[:, None] ** 2 * cos_part
        self._d3phi = amp[:, None] * self.wavenumbers[:, None] ** 3 * sin_part
        # rows k = 0 of the derivative tables are exactly zero already
        # (wavenumber 0), but pin them to remove any -0.0 noise
        self._dphi[0, :] = 0.0
        self._d2phi[0, :] = self._d2phi[0, :]  # -0*cos stays 0
        self._d3phi[0, :] = 0.0

    # ------------------------------------------------------------------
    # transforms
    # ------------------------------------------------------------------

    def synthesize(self, coeffs):
        """Grid values of the expansion; coeffs may be stacked (..., n+1)."""
        return np.asarray(coeffs, dtype=float) @ self._phi

    def analyze(self, values):
        """Quadrature projection of grid values onto the basis.

        Exact inverse of `synthesize` (to rounding) whenever the grid
        resolves the basis, i.e. num_nodes >= n + 1.
        """
        return self.weight * (np.asarray(values, dtype=float) @ self._phi.T)

    def derivative_on_grid(self, coeffs, order: int = 1):
        """Grid values of the order-th spatial derivative (order in 1..3)."""
        table = {1: self._dphi, 2: self._d2phi, 3: self._d3phi}.get(order)
        if table is None:
            raise ValueError(f"derivative order must be 1, 2 or 3, got {order}")
        return np.asarray(coeffs, dtype=float) @ table

    def test_against_dx(self, values):
        """Inner products <values, phi_j'> by quadrature, for all j.

        Row j = 0 vanishes identically (phi_0 is constant), which is what
        makes the tested film equations conserve every mean exactly.
        """
        return self.weight * (np.asarray(values, dtype=float) @ self._dphi.T)

    # ------------------------------------------------------------------
    # small helpers
    # ------------------------------------------------------------------

    def mass(self, coeffs):
        """Integral over (0, L) of the expansion: sqrt(L) * coeffs[0]."""
        return np.sqrt(self.length) * np.asarray(coeffs, dtype=float)[..., 0]

    def gram(self):
        """Discrete Gram matrix <phi_j, phi_k>; identity to rounding."""
        return self.weight * (self._phi @ self._phi.T)

    def weighted_gram(self, node_weights):
        """Matrix of <omega*phi_k, phi_j> for a grid weight field omega."""
        scaled = (self.weight * np.asarray(node_weights, dtype=float)) * self._phi
        return scaled @ self._phi.T

    def coeffs_from_cosine(self, base: float, modes: dict | None = None):
        """Coefficients of base + sum_k amp_k * cos(k*pi*x/L).

        Exact (no quadrature): the constant maps to sqrt(L)*base and each
        cosine of mode k to sqrt(L/2)*amp_k.
        """
        out = np.zeros(self.n + 1)
        out[0] = base * np.sqrt(self.length)
        for k, amplitude in (modes or {}).items():
            if not (1 <= k <= self.n):
                raise ValueError(f"mode {k} outside basis range 1..{self.n}")
            out[k] = amplitude * np.sqrt(self.length / 2.0)
        return out


def evaluate_coeffs(coeffs, length: float, x):
    """Evaluate a coefficient vector at arbitrary points of [0, L].

    Unlike CosineBasis.synthesize this is not tied to the collocation grid,
    so expansions of different orders can be compared on a common set of
    points.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    x = np.asarray(x, dtype=float)
    k = np.arange(coeffs.shape[-1])
    amp = np.where(k == 0, np.sqrt(1.0 / length), np.sqrt(2.0 / length))
    table = amp[:, None] * np.cos(np.outer(k, x) * (np.pi / length))
    return coeffs @ table
