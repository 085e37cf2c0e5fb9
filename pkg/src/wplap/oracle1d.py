"""Independent 1D solver: shooting on the first-order flux system.

With q = a(x) |u'|^(p-2) u' the equation becomes

    u' = |q / a(x)|^(1/(p-1)) sign(q)
    q' = |u|^(p-2) u - lambda f(x, u) - mu g(x, u)

integrated by classical RK4 from u(x_a) = 0, q(x_a) = a(x_a)|sigma|^(p-2)sigma.
Roots of the terminal map sigma -> u(x_b) enumerate the solutions of the
boundary value problem.  Everything here is independent of the finite element
machinery except for the final interpolation onto a mesh.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import Nonlinearity
from .geometry import Domain, Mesh, UnsupportedDomainError
from .space import DiscreteFunction
from .weight import WeightSpec, eval_weight

__all__ = ["ShootingRoot", "ShootingProfile", "shoot", "enumerate_solutions",
           "profile_on_mesh"]

_BLOWUP = 1e8
_TERMINAL_TOL = 1e-8


@dataclass
class ShootingRoot:
    sigma: float
    terminal: float
    x: np.ndarray
    u: np.ndarray


@dataclass
class ShootingProfile:
    sigma_grid: np.ndarray
    terminal_values: np.ndarray
    diverged: np.ndarray           # bool per sigma
    brackets: list
    roots: list = field(default_factory=list)
    degenerate_flat: bool = False  # terminal map vanished on a whole sigma run


def _check_domain(domain: Domain):
    if domain.kind not in ("interval",) and not (domain.kind == "ball" and domain.dim == 1):
        raise UnsupportedDomainError("shooting oracle handles one dimension only")


def _interval(domain: Domain):
    if domain.kind == "interval":
        return float(domain.bounds[0]), float(domain.bounds[1])
    c, r = float(domain.bounds[0]), float(domain.bounds[1])
    return c - r, c + r


def _rhs_factory(w: WeightSpec, p: float, lam: float, mu: float,
                 f: Nonlinearity | None, g: Nonlinearity | None,
                 zero_order: bool, domain: Domain):
    pm1 = p - 1.0

    def rhs(x: float, u: np.ndarray, q: np.ndarray):
        a = float(eval_weight(w, domain, np.array([[x]]))[0])
        du = np.abs(q / a) ** (1.0 / pm1) * np.sign(q)
        dq = np.abs(u) ** (p - 2.0) * u if zero_order else np.zeros_like(u)
        xs = np.full((u.size, 1), x)
        if f is not None and lam != 0.0:
            dq = dq - lam * f.eval(xs, u)
        if g is not None and mu != 0.0:
            dq = dq - mu * g.eval(xs, u)
        return du, dq

    return rhs


def _ode_grid(domain: Domain, w: WeightSpec, steps_per_unit: int):
    """Integration nodes; distance-power weights blow up at the ends, so the
    march starts one step in and the boundary values are linearly
    extrapolated."""
    x_a, x_b = _interval(domain)
    n = max(4, int(round((x_b - x_a) * steps_per_unit)))
    h = (x_b - x_a) / n
    if w.form == "distance_power":
        grid = np.linspace(x_a + h, x_b - h, n - 1)
    else:
        grid = np.linspace(x_a, x_b, n + 1)
    return grid, h


def shoot(sigmas: np.ndarray, domain: Domain, w: WeightSpec, p: float,
          lam: float, mu: float, f: Nonlinearity | None = None,
          g: Nonlinearity | None = None, zero_order: bool = True,
          steps_per_unit: int = 1024, keep_trajectory: bool = False):
    """March the flux system for a batch of slopes sigma.

    Returns (terminal values of u at x_b, diverged flags) and, when
    keep_trajectory is set, the grid and the full u history."""
    _check_domain(domain)
    sigmas = np.atleast_1d(np.asarray(sigmas, dtype=float))
    x_a, x_b = _interval(domain)
    grid, h = _ode_grid(domain, w, steps_per_unit)
    rhs = _rhs_factory(w, p, lam, mu, f, g, zero_order, domain)

    a0 = float(eval_weight(w, domain, np.array([[grid[0]]]))[0])
    if grid[0] > x_a:
        # start just inside; u grows linearly with slope sigma over the layer
        u = sigmas * (grid[0] - x_a)
    else:
        u = np.zeros_like(sigmas)
    q = a0 * np.abs(sigmas) ** (p - 1.0) * np.sign(sigmas)

    diverged = np.zeros(sigmas.shape, dtype=bool)
    history = np.empty((grid.size, sigmas.size)) if keep_trajectory else None
    if keep_trajectory:
        history[0] = u
    for i in range(grid.size - 1):
        x = grid[i]
        step = grid[i + 1] - grid[i]
        k1u, k1q = rhs(x, u, q)
        k2u, k2q = rhs(x + 0.5 * step, u + 0.5 * step * k1u, q + 0.5 * step * k1q)
        k3u, k3q = rhs(x + 0.5 * step, u + 0.5 * step * k2u, q + 0.5 * step * k2q)
        k4u, k4q = rhs(x + step, u + step * k3u, q + step * k3q)
        u = u + (step / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        q = q + (step / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q)
        bad = ~np.isfinite(u) | ~np.isfinite(q) | (np.abs(u) > _BLOWUP)
        if np.any(bad):
            diverged |= bad
            u = np.where(bad, np.sign(np.where(np.isfinite(u), u, 1.0)) * _BLOWUP, u)
            q = np.where(bad, 0.0, q)
        if keep_trajectory:
            history[i + 1] = u
    if grid[-1] < x_b:
        # extrapolate the boundary layer with the local slope
        a_end = float(eval_weight(w, domain, np.array([[grid[-1]]]))[0])
        slope = np.abs(q / a_end) ** (1.0 / (p - 1.0)) * np.sign(q)
        terminal = u + slope * (x_b - grid[-1])
    else:
        terminal = u
    terminal = np.where(diverged, np.sign(terminal) * _BLOWUP, terminal)
    if keep_trajectory:
        return terminal, diverged, grid, history
    return terminal, diverged


def _bisect_all(brackets, t_at, shooter_batch):
    """Bisect every bracket simultaneously (one batched march per level)."""
    if not brackets:
        return []
    lo = np.array([b[0] for b in brackets])
    hi = np.array([b[1] for b in brackets])
    t_lo = np.array([t_at[b[0]] for b in brackets])
    done = np.zeros(lo.size, dtype=bool)
    mid = 0.5 * (lo + hi)
    t_mid = shooter_batch(mid)
    for _ in range(80):
        done |= (np.abs(t_mid) <= _TERMINAL_TOL) | ((hi - lo) < 1e-15 * np.maximum(1.0, np.abs(mid)))
        if np.all(done):
            break
        same = (t_mid < 0) == (t_lo < 0)
        lo = np.where(~done & same, mid, lo)
        t_lo = np.where(~done & same, t_mid, t_lo)
        hi = np.where(~done & ~same, mid, hi)
        nxt = 0.5 * (lo + hi)
        mid = np.where(done, mid, nxt)
        t_new = shooter_batch(mid)
        t_mid = np.where(done, t_mid, t_new)
    return [(float(m), float(t)) for m, t in zip(mid, t_mid)]


def enumerate_solutions(domain: Domain, w: WeightSpec, p: float, lam: float,
                        mu: float, f: Nonlinearity | None = None,
                        g: Nonlinearity | None = None, zero_order: bool = True,
                        sigma_range: tuple[float, float] = (-50.0, 50.0),
                        n_scan: int = 2001,
                        steps_per_unit: int = 1024) -> ShootingProfile:
    """Scan the terminal map over the slope range, bracket its sign changes,
    bisect each bracket to |u(x_b)| <= 1e-8 and store the root profiles.

    Exact and near-zero scan values are kept as roots directly; a long run of
    vanishing terminals raises the degenerate_flat flag (the map carries no
    bracketing information there)."""
    _check_domain(domain)
    sigma_grid = np.linspace(sigma_range[0], sigma_range[1], n_scan)
    terminal, diverged = shoot(sigma_grid, domain, w, p, lam, mu, f, g,
                               zero_order, steps_per_unit)

    # integration error grows with |sigma|, so "vanishing" is sigma-relative
    near_zero = (np.abs(terminal) <= _TERMINAL_TOL * np.maximum(1.0, np.abs(sigma_grid))) \
        & ~diverged
    degenerate = bool(near_zero.sum() > max(3, n_scan // 100))

    def shooter_batch(ss: np.ndarray) -> np.ndarray:
        t, _ = shoot(ss, domain, w, p, lam, mu, f, g, zero_order, steps_per_unit)
        return t

    root_sigmas: list[float] = []
    # representative of each exact-zero run
    i = 0
    while i < n_scan:
        if near_zero[i]:
            j = i
            while j + 1 < n_scan and near_zero[j + 1]:
                j += 1
            root_sigmas.append(float(sigma_grid[(i + j) // 2]))
            i = j + 1
        else:
            i += 1
    # sign-change brackets between usable neighbours
    brackets = []
    t_at = {}
    for i in range(n_scan - 1):
        if diverged[i] or diverged[i + 1] or near_zero[i] or near_zero[i + 1]:
            continue
        if (terminal[i] < 0) != (terminal[i + 1] < 0):
            brackets.append((float(sigma_grid[i]), float(sigma_grid[i + 1])))
            t_at[float(sigma_grid[i])] = float(terminal[i])
    for s, t in _bisect_all(brackets, t_at, shooter_batch):
        if abs(t) <= _TERMINAL_TOL:
            root_sigmas.append(s)

    # dedupe (a zero run adjacent to a bracket can double-report)
    root_sigmas.sort()
    spacing = (sigma_range[1] - sigma_range[0]) / (n_scan - 1)
    kept: list[float] = []
    for s in root_sigmas:
        if not kept or s - kept[-1] > 0.5 * spacing:
            kept.append(s)

    roots = []
    for s in kept:
        term, div, grid, hist = shoot(np.array([s]), domain, w, p, lam, mu, f,
                                      g, zero_order, steps_per_unit,
                                      keep_trajectory=True)
        if div[0]:
            continue
        roots.append(ShootingRoot(sigma=s, terminal=float(term[0]),
                                  x=grid.copy(), u=hist[:, 0].copy()))
    return ShootingProfile(sigma_grid=sigma_grid, terminal_values=terminal,
                           diverged=diverged, brackets=brackets, roots=roots,
                           degenerate_flat=degenerate)


def profile_on_mesh(root: ShootingRoot, mesh: Mesh, domain: Domain) -> DiscreteFunction:
    """Sample a shooting trajectory at the mesh vertices (linear interpolation;
    with matching steps_per_unit every interior vertex is an integration node)."""
    if mesh.dim != 1:
        raise UnsupportedDomainError("profiles interpolate onto 1D meshes only")
    x_a, x_b = _interval(domain)
    xs = np.concatenate([[x_a], root.x, [x_b]])
    us = np.concatenate([[0.0], root.u, [0.0]])
    vals = np.interp(mesh.vertices[:, 0], xs, us)
    return DiscreteFunction(mesh, vals)
