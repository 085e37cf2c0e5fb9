"""Discrete functions and the weighted Sobolev norm machinery.

Norms are (int |u|^p + int a |grad u|^p)^(1/p) for piecewise-linear u, with
per-cell Gauss quadrature of order >= 5.  The module also estimates the
sup-norm embedding constant k = sup max|u| / ||u|| from below (hat sweep plus
gradient ascent) and from above (Talenti's constant combined with a Hoelder
bound through int a^(-s))."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Domain, Mesh, distance_to_boundary, domain_measure
from .weight import WeightSpec, compute_ps, eval_weight, weight_lower_bound

__all__ = [
    "DiscreteFunction",
    "NormReport",
    "EmbeddingEstimate",
    "QuadratureError",
    "weighted_norm",
    "sup_norm",
    "talenti_bound",
    "estimate_k",
    "norm_equivalence_probe",
]


class QuadratureError(RuntimeError):
    """Non-finite quadrature contribution (weight singularity hit a node)."""


@dataclass
class DiscreteFunction:
    """Piecewise-linear function given by one value per mesh vertex."""

    mesh: Mesh
    values: np.ndarray
    boundary_zero: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.num_vertices,):
            raise ValueError("need one value per vertex")
        if self.boundary_zero:
            self.values = self.values.copy()
            self.values[self.mesh.boundary_vertices] = 0.0

    @staticmethod
    def from_callable(mesh: Mesh, fn, boundary_zero: bool = True) -> "DiscreteFunction":
        return DiscreteFunction(mesh, np.asarray(fn(mesh.vertices)).reshape(-1), boundary_zero)

    @staticmethod
    def zero(mesh: Mesh) -> "DiscreteFunction":
        return DiscreteFunction(mesh, np.zeros(mesh.num_vertices))

    def copy_with(self, values) -> "DiscreteFunction":
        return DiscreteFunction(self.mesh, values, self.boundary_zero)


@dataclass(frozen=True)
class NormReport:
    lp_term: float     # int |u|^p
    grad_term: float   # int a |grad u|^p
    p: float

    @property
    def full_norm(self) -> float:
        return (self.lp_term + self.grad_term) ** (1.0 / self.p)

    @property
    def a_norm(self) -> float:
        return self.grad_term ** (1.0 / self.p)


def _interp_matrix(mesh: Mesh):
    """Dense (nq, nv) map from nodal values to quadrature-point values and
    (nc, N, nv) map to per-cell gradients, cached on the mesh."""
    if "interp" not in mesh._cache:
        pts, wts, cid, shp = mesh.quadrature()
        nv, nc = mesh.num_vertices, mesh.num_cells
        B = np.zeros((pts.shape[0], nv))
        rows = np.arange(pts.shape[0])
        for b in range(mesh.dim + 1):
            np.add.at(B, (rows, mesh.cells[cid, b]), shp[:, b])
        G = np.zeros((nc, mesh.dim, nv))
        carange = np.arange(nc)
        sg = mesh.shape_gradients
        for b in range(mesh.dim + 1):
            for k in range(mesh.dim):
                np.add.at(G, (carange, k, mesh.cells[:, b]), sg[:, b, k])
        mesh._cache["interp"] = (B, G)
    return mesh._cache["interp"]


def _cell_weight_integrals(mesh: Mesh, w: WeightSpec) -> np.ndarray:
    """int_cell a dx for every cell (order-5 Gauss), with a finiteness guard."""
    pts, wts, cid, _ = mesh.quadrature()
    aq = np.atleast_1d(eval_weight(w, mesh.domain, pts))
    contrib = wts * aq
    if not np.all(np.isfinite(contrib)):
        bad = int(cid[int(np.argmax(~np.isfinite(contrib)))])
        raise QuadratureError(f"non-finite weight contribution in cell {bad}")
    return np.bincount(cid, weights=contrib, minlength=mesh.num_cells)


def _norm_terms_batch(mesh: Mesh, w: WeightSpec, p: float, V: np.ndarray):
    """lp and gradient terms for a batch of nodal vectors V (nv, m)."""
    _, wts, _, _ = mesh.quadrature()
    B, G = _interp_matrix(mesh)
    cellA = _cell_weight_integrals(mesh, w)
    uq = B @ V                                    # (nq, m)
    lp = wts @ np.abs(uq) ** p
    gq = np.einsum("ckv,vm->ckm", G, V)           # (nc, N, m)
    gnorm = np.linalg.norm(gq, axis=1)            # (nc, m)
    grad = cellA @ gnorm ** p
    return lp, grad


def weighted_norm(u: DiscreteFunction, w: WeightSpec, p: float) -> NormReport:
    """Weighted Sobolev norm terms of u: int |u|^p and int a |grad u|^p."""
    lp, grad = _norm_terms_batch(u.mesh, w, p, u.values[:, None])
    lp, grad = float(lp[0]), float(grad[0])
    if not (math.isfinite(lp) and math.isfinite(grad)):
        raise QuadratureError("non-finite norm contribution")
    return NormReport(lp_term=lp, grad_term=grad, p=p)


def sup_norm(u: DiscreteFunction) -> float:
    """max |u| over the vertices (exact for piecewise-linear u)."""
    return float(np.max(np.abs(u.values)))


def talenti_bound(n: int, p_s: float, measure: float) -> float:
    """Sharp constant for max|u| <= C ||grad u||_{L^{p_s}}, valid for p_s > N:

    C = N^(-1/p_s) / sqrt(pi) * Gamma(1 + N/2)^(1/N)
        * ((p_s - 1)/(p_s - N))^(1 - 1/p_s) * |Omega|^(1/N - 1/p_s)
    """
    if p_s <= n:
        raise ValueError(f"Talenti bound needs p_s > N, got p_s={p_s}, N={n}")
    return (n ** (-1.0 / p_s) / math.sqrt(math.pi)
            * math.gamma(1.0 + n / 2.0) ** (1.0 / n)
            * ((p_s - 1.0) / (p_s - n)) ** (1.0 - 1.0 / p_s)
            * measure ** (1.0 / n - 1.0 / p_s))


@dataclass
class EmbeddingEstimate:
    k_lower: float
    k_upper: float
    k_upper_mode: str          # 'certified' | 'heuristic'
    p_s: float
    witness: DiscreteFunction  # maximizer found for the lower bound

    @property
    def k(self) -> float:
        """Value used by certificates: the upper bound (conservative)."""
        return self.k_upper


def _ratio_batch(mesh: Mesh, w: WeightSpec, p: float, V: np.ndarray) -> np.ndarray:
    lp, grad = _norm_terms_batch(mesh, w, p, V)
    sup = np.max(np.abs(V), axis=0)
    denom = (lp + grad) ** (1.0 / p)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, sup / denom, 0.0)


def estimate_k(domain: Domain, w: WeightSpec, p: float, s: float, mesh: Mesh,
               ascent_steps: int = 50, fd_step_rel: float = 1e-3) -> EmbeddingEstimate:
    """Two-sided estimate of k = sup max|u| / ||u||.

    Lower bound: cone hats (apex 1 at a node, radius = its boundary distance)
    at every interior node, then fixed-step-count gradient ascent on the best
    one (central differences on the nodal values).  Upper bound: Talenti's
    constant for p_s = p*s/(s+1) times (int a^(-s))^(1/((s+1) p_s)); certified
    only when a >= 1 a.e., heuristic otherwise."""
    p_s = compute_ps(p, s)
    interior = np.flatnonzero(mesh.interior_vertices)
    if interior.size == 0:
        raise ValueError("mesh has no interior vertices")

    verts = mesh.vertices
    rho = np.atleast_1d(distance_to_boundary(domain, verts))
    # cone hats, one column per interior node
    dists = np.linalg.norm(verts[:, None, :] - verts[None, interior, :], axis=2)
    hats = np.maximum(0.0, 1.0 - dists / rho[interior][None, :])
    hats[mesh.boundary_vertices, :] = 0.0
    ratios = _ratio_batch(mesh, w, p, hats)
    best = int(np.argmax(ratios))
    k_lower = float(ratios[best])
    v = hats[:, best].copy()

    # gradient ascent on the ratio, free interior nodes only
    step = 0.1
    for _ in range(ascent_steps):
        eps = fd_step_rel * float(np.linalg.norm(v))
        P = np.tile(v[:, None], (1, 2 * interior.size))
        cols = np.arange(interior.size)
        P[interior, 2 * cols] += eps
        P[interior, 2 * cols + 1] -= eps
        r = _ratio_batch(mesh, w, p, P)
        g = np.zeros_like(v)
        g[interior] = (r[2 * cols] - r[2 * cols + 1]) / (2.0 * eps)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            break
        improved = False
        while step > 1e-12:
            cand = v + step * float(np.linalg.norm(v)) * g / gn
            rc = float(_ratio_batch(mesh, w, p, cand[:, None])[0])
            if rc > k_lower:
                v, k_lower, improved = cand, rc, True
                step *= 1.3
                break
            step *= 0.5
        if not improved:
            break

    refined = DiscreteFunction(mesh, v)
    # int a^(-s) over the mesh quadrature
    pts, wts, _, _ = mesh.quadrature()
    aq = np.atleast_1d(eval_weight(w, mesh.domain, pts))
    int_a_ms = float(wts @ aq ** (-s))
    k_upper = talenti_bound(domain.dim, p_s, domain_measure(domain)) \
        * int_a_ms ** (1.0 / ((s + 1.0) * p_s))
    mode = "certified" if weight_lower_bound(w, domain) >= 1.0 - 1e-12 else "heuristic"
    return EmbeddingEstimate(k_lower=k_lower, k_upper=float(k_upper),
                             k_upper_mode=mode, p_s=p_s, witness=refined)


def norm_equivalence_probe(family, w: WeightSpec, p: float):
    """(min, max) of full_norm / a_norm over a family of DiscreteFunctions."""
    ratios = []
    for u in family:
        rep = weighted_norm(u, w, p)
        if rep.a_norm == 0.0:
            raise ValueError("norm equivalence probe needs nonzero functions")
        ratios.append(rep.full_norm / rep.a_norm)
    return float(np.min(ratios)), float(np.max(ratios))
