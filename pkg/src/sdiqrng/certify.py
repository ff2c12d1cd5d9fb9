"""Energy-bounded randomness certification.

Feasible-set model
------------------
A hidden-variable strategy ``lambda`` is a behavior ``q`` (indexed
``[x][b]``) together with its average photon number ``e``. Any pair of
states with average photon number ``e`` has overlap at least
``max(0, 1 - 2e)``, so a single strategy can reach discrimination success at
most :func:`max_success` ``(e)``. Writing ``u = q(1|0)`` and ``v = q(1|1)``,
that is the band ``|v - u| <= 2 sqrt(e (1 - e))``; conversely the cheapest
energy able to produce bias ``|v - u|`` is :func:`min_energy`.

The certified entropy of observed frequencies ``f`` is the least average
conditional entropy of any mixture of strategies that reproduces ``f`` and
whose mixture-averaged energy stays within ``omega``. It is a convex function
of ``f``. We discretize strategies on a ``(u, v)`` grid, each grid atom
carrying its exact minimal energy, and add atoms on the edge of the energy-
``omega`` band so that every feasible ``f`` lies in their hull. The
resulting linear program has four rows (two marginals, normalization,
energy); its dual is the linear witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog, minimize

from ._validation import check_behavior, check_count, check_mean_photon, check_scalar

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}
_DUAL_BOUND = 1e6


class InfeasibleBehaviorError(ValueError):
    """Behavior cannot be produced within the energy bound."""


@dataclass(frozen=True)
class Grid:
    """Resolution of the strategy grid over ``(p(1|0), p(1|1))``."""

    n_u: int = 101
    n_v: int = 101

    def __post_init__(self):
        for name in ("n_u", "n_v"):
            value = check_count(getattr(self, name), name)
            if value < 2:
                raise ValueError(f"grid needs at least 2 points per axis, got {name}={value}")

    def refined(self) -> "Grid":
        """Grid with half the spacing; contains every point of this grid."""
        return Grid(2 * self.n_u - 1, 2 * self.n_v - 1)

    def __str__(self):
        return f"{self.n_u}x{self.n_v}"

    @classmethod
    def parse(cls, text: str) -> "Grid":
        parts = text.lower().split("x")
        if len(parts) == 1:
            return cls(int(parts[0]), int(parts[0]))
        if len(parts) == 2:
            return cls(int(parts[0]), int(parts[1]))
        raise ValueError(f"cannot parse grid spec {text!r}")


DEFAULT_GRID = Grid()


@dataclass(frozen=True)
class FiniteSizeParams:
    n: int
    epsilon: float
    c: float
    d: float = 1.0

    def __post_init__(self):
        check_count(self.n, "n", min_val=1)
        check_scalar(self.epsilon, "epsilon", min_val=0.0, max_val=1.0,
                     include_min=False, include_max=False)
        check_scalar(self.c, "c", min_val=0.0)
        check_scalar(self.d, "d", min_val=0.0)

    @classmethod
    def for_witness(cls, n, epsilon, witness, d=1.0):
        """Default ``c`` is the spread of the per-round witness contributions."""
        return cls(n, epsilon, witness.gamma_range, d)


def binary_entropy(p):
    """Binary Shannon entropy in bits, elementwise."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    out = np.zeros_like(p)
    inner = (p > 0.0) & (p < 1.0)
    pi = p[inner]
    out[inner] = -(pi * np.log2(pi) + (1.0 - pi) * np.log2(1.0 - pi))
    return out


def conditional_entropy(q) -> float:
    """``H(B|X)`` in bits for uniformly chosen inputs."""
    q = check_behavior(q)
    return float(0.5 * binary_entropy(q[:, 1]).sum())


def max_bias(e: float) -> float:
    """Largest ``|p(1|1) - p(1|0)|`` reachable by one strategy of energy ``e``."""
    e = check_mean_photon(e, "e")
    if e >= 0.5:
        return 1.0
    return 2.0 * math.sqrt(e * (1.0 - e))


def max_success(e: float) -> float:
    return 0.5 * (1.0 + max_bias(e))


def min_energy(bias):
    """Least strategy energy producing ``|p(1|1) - p(1|0)| = bias``; inverse of :func:`max_bias`."""
    d = np.abs(np.asarray(bias, dtype=float))
    return d * d / (2.0 * (1.0 + np.sqrt(np.clip(1.0 - d * d, 0.0, None))))


def _guessing(q):
    return max(q[0, 0] + q[1, 1], q[0, 1] + q[1, 0]) / 2.0


def quantum_set_membership(q, e: float) -> bool:
    q = check_behavior(q)
    # 1e-15 absorbs rounding when q sits exactly on the band edge
    return bool(_guessing(q) <= max_success(e) + 1e-15)


@lru_cache(maxsize=64)
def _atoms(omega: float, n_u: int, n_v: int):
    gu = np.linspace(0.0, 1.0, n_u)
    gv = np.linspace(0.0, 1.0, n_v)
    U, V = np.meshgrid(gu, gv, indexing="ij")
    U, V = U.ravel(), V.ravel()
    E = min_energy(V - U)
    band = max_bias(omega)
    if band < 1.0:
        eu = np.concatenate([gu, gu, gv - band, gv + band])
        ev = np.concatenate([gu + band, gu - band, gv, gv])
        inside = (eu >= 0.0) & (eu <= 1.0) & (ev >= 0.0) & (ev <= 1.0)
        eu, ev = eu[inside], ev[inside]
        U = np.concatenate([U, eu])
        V = np.concatenate([V, ev])
        E = np.concatenate([E, np.full(eu.size, omega)])
    cost = 0.5 * (binary_entropy(U) + binary_entropy(V))
    for arr in (U, V, E, cost):
        arr.setflags(write=False)
    return U, V, E, cost


def strategy_atoms(omega: float, grid: Grid = DEFAULT_GRID):
    """Atoms ``(u, v, energy, entropy)`` of the discretized strategy set at bound ``omega``."""
    omega = check_mean_photon(omega)
    return _atoms(omega, grid.n_u, grid.n_v)


@dataclass(frozen=True)
class Dual:
    """Affine minorant ``a_u u + a_v v + a_0 - mu * omega`` of the certified entropy."""

    a_u: float
    a_v: float
    a_0: float
    mu: float

    def slack(self, U, V, E, cost):
        return cost + self.mu * E - self.a_u * U - self.a_v * V - self.a_0

    def value(self, fu, fv, omega):
        return self.a_u * fu + self.a_v * fv + self.a_0 - self.mu * omega

    def shifted(self, delta):
        return Dual(self.a_u, self.a_v, self.a_0 + delta, self.mu)


@dataclass(frozen=True)
class EntropyBound:
    """Result of :func:`solve_entropy_bound`.

    ``value`` is the grid linear-program optimum. ``lower`` is a certified
    lower bound for the continuum strategy set, obtained by making the LP dual
    feasible everywhere; ``tolerance = value - lower``.
    """

    value: float
    lower: float
    tolerance: float
    dual: Dual
    support: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


def _min_continuum_slack(dual: Dual, resolution: int = 1001) -> float:
    g = np.linspace(0.0, 1.0, resolution)
    U, V = np.meshgrid(g, g, indexing="ij")
    cost = 0.5 * (binary_entropy(U) + binary_entropy(V))
    S = dual.slack(U, V, min_energy(V - U), cost)
    best = float(S.min())
    flat = np.argsort(S, axis=None)[:4]

    def fun(p):
        u, v = np.clip(p, 0.0, 1.0)
        c = 0.5 * (binary_entropy(u) + binary_entropy(v))
        return float(dual.slack(u, v, min_energy(v - u), c))

    for idx in flat:
        i, j = np.unravel_index(idx, S.shape)
        res = minimize(fun, [g[i], g[j]], method="Nelder-Mead",
                       bounds=[(0.0, 1.0), (0.0, 1.0)],
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400})
        best = min(best, float(res.fun))
    return best


def _check_feasible(f, omega):
    f = check_behavior(f, "f")
    omega = check_mean_photon(omega)
    if not quantum_set_membership(f, omega):
        raise InfeasibleBehaviorError(
            f"behavior with guessing probability {_guessing(f):.6g} exceeds "
            f"max_success({omega:.6g}) = {max_success(omega):.6g}")
    return f, omega


def _polish(res, U, V, E, cost, fu, fv, omega):
    """Recompute the LP optimum on its support by an exact small solve."""
    w = res.x
    support = np.flatnonzero(w > 1e-13)
    rows = [U[support], V[support], np.ones(support.size)]
    rhs = [fu, fv, 1.0]
    if omega - float(E @ w) < 1e-9:
        rows.append(E[support])
        rhs.append(omega)
    A = np.vstack(rows)
    ws, *_ = np.linalg.lstsq(A, np.array(rhs), rcond=None)
    ok = (np.all(ws >= -1e-12) and np.allclose(A @ ws, rhs, atol=1e-13, rtol=0)
          and float(E[support] @ ws) <= omega + 1e-13)
    if not ok:
        return support, w[support], float(res.fun)
    ws = np.clip(ws, 0.0, None)
    return support, ws, float(cost[support] @ ws)


def solve_entropy_bound(f, omega: float, grid: Grid = DEFAULT_GRID, *,
                        certify: bool = True) -> EntropyBound:
    """Certified conditional entropy of frequencies ``f`` under energy bound ``omega``.

    With ``certify=False`` the continuum check is skipped and ``lower`` is
    the plain grid dual value (``tolerance`` is then 0).
    """
    f, omega = _check_feasible(f, omega)
    U, V, E, cost = strategy_atoms(omega, grid)
    fu, fv = float(f[0, 1]), float(f[1, 1])
    res = linprog(cost, A_ub=E[None, :], b_ub=[omega],
                  A_eq=np.vstack([U, V, np.ones_like(U)]), b_eq=[fu, fv, 1.0],
                  bounds=(0, None), method="highs", options=_HIGHS_OPTIONS)
    if res.status != 0:
        raise InfeasibleBehaviorError(f"entropy-bound LP failed: {res.message}")
    support, weights, value = _polish(res, U, V, E, cost, fu, fv, omega)
    a_u, a_v, a_0 = res.eqlin.marginals
    dual = Dual(float(a_u), float(a_v), float(a_0), float(-res.ineqlin.marginals[0]))
    if certify:
        gap = min(float(dual.slack(U, V, E, cost).min()), _min_continuum_slack(dual))
        dual = dual.shifted(min(0.0, gap))
    lower = min(dual.value(fu, fv, omega), value)
    return EntropyBound(value=max(value, 0.0), lower=lower, tolerance=value - lower,
                        dual=dual, support=support, weights=weights)


def entropy_bound(f, omega: float, grid: Grid = DEFAULT_GRID) -> float:
    """Least average entropy of strategy mixtures reproducing ``f`` within energy ``omega``."""
    return solve_entropy_bound(f, omega, grid, certify=False).value


@dataclass(frozen=True)
class Witness:
    """Linear witness ``sum_{b,x} gamma[b][x] f(b|x) / 2 - zeta``, valid only at ``omega``."""

    gamma: np.ndarray
    zeta: float
    omega: float
    grid: Grid = DEFAULT_GRID
    tolerance: float = 0.0

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(gamma)) or not np.isfinite(self.zeta):
            raise ValueError("witness coefficients must be finite")
        gamma.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "zeta", float(self.zeta))
        object.__setattr__(self, "omega", check_mean_photon(self.omega))

    @property
    def gamma_range(self) -> float:
        return float(self.gamma.max() - self.gamma.min())

    def __eq__(self, other):
        if not isinstance(other, Witness):
            return NotImplemented
        return (np.array_equal(self.gamma, other.gamma) and self.zeta == other.zeta
                and self.omega == other.omega and self.grid == other.grid
                and self.tolerance == other.tolerance)

    def __hash__(self):
        return hash((self.gamma.tobytes(), self.zeta, self.omega, self.grid))

    def to_text(self) -> str:
        lines = ["# linear entropy witness"]
        for b in range(2):
            for x in range(2):
                lines.append(f"gamma[{b}][{x}] = {self.gamma[b, x]:.16e}")
        lines += [
            f"zeta = {self.zeta:.16e}",
            f"omega = {self.omega:.16e}",
            f"grid = {self.grid}",
            f"tolerance = {self.tolerance:.16e}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Witness":
        fields = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"malformed witness line: {raw!r}")
            fields[key.strip()] = value.strip()
        gamma = np.empty((2, 2))
        try:
            for b in range(2):
                for x in range(2):
                    gamma[b, x] = float(fields.pop(f"gamma[{b}][{x}]"))
            zeta = float(fields.pop("zeta"))
            omega = float(fields.pop("omega"))
        except KeyError as exc:
            raise ValueError(f"witness text is missing {exc.args[0]}") from None
        grid = Grid.parse(fields.pop("grid")) if "grid" in fields else DEFAULT_GRID
        tolerance = float(fields.pop("tolerance", 0.0))
        if fields:
            raise ValueError(f"unknown witness fields: {sorted(fields)}")
        return cls(gamma, zeta, omega, grid, tolerance)




def _witness_from_dual(dual: Dual, omega, grid, tolerance) -> Witness:
    # gamma[0][x] = -gamma[1][x]; the constant part goes into zeta
    gamma = np.array([[-dual.a_u, -dual.a_v], [dual.a_u, dual.a_v]])
    zeta = dual.mu * omega - dual.a_0 - 0.5 * (dual.a_u + dual.a_v)
    return Witness(gamma, zeta, omega, grid, tolerance)


def _solve_dual(U, V, E, cost, objective, extra_ub=(), bounds=None):
    A = np.column_stack([U, V, np.ones_like(U), -E])
    b = cost
    if extra_ub:
        A = np.vstack([A] + [row for row, _ in extra_ub])
        b = np.concatenate([b, [rhs for _, rhs in extra_ub]])
    if bounds is None:
        bounds = [(-_DUAL_BOUND, _DUAL_BOUND)] * 3 + [(0.0, _DUAL_BOUND)]
    res = linprog(objective, A_ub=A, b_ub=b, bounds=bounds, method="highs",
                  options=_HIGHS_OPTIONS)
    if res.status != 0:
        raise RuntimeError(f"witness LP failed: {res.message}")
    return res


def build_witness(p_expected, omega: float, grid: Grid = DEFAULT_GRID) -> Witness:
    """Supporting hyperplane of the certified entropy at ``p_expected``.

    Among optimal duals the one with lexicographically smallest ``gamma``
    (row-major over ``[b][x]``) is kept. The constant is then lowered until
    the hyperplane stays below every strategy of the continuum, so the
    witness is sound for the grid bound and for its continuum limit.
    """
    f, omega = _check_feasible(p_expected, omega)
    U, V, E, cost = strategy_atoms(omega, grid)
    fu, fv = float(f[0, 1]), float(f[1, 1])
    value_row = np.array([fu, fv, 1.0, -omega])
    res = _solve_dual(U, V, E, cost, -value_row)
    best = -res.fun
    slack = 1e-12 * max(1.0, abs(best))
    keep_optimal = (-value_row, -(best - slack))
    # gamma[0][0] = -a_u, then gamma[0][1] = -a_v
    res = _solve_dual(U, V, E, cost, np.array([-1.0, 0, 0, 0]), [keep_optimal])
    a_u = res.x[0]
    res = _solve_dual(U, V, E, cost, np.array([0, -1.0, 0, 0]), [keep_optimal],
                      bounds=[(a_u, a_u), (-_DUAL_BOUND, _DUAL_BOUND),
                              (-_DUAL_BOUND, _DUAL_BOUND), (0.0, _DUAL_BOUND)])
    a_v = res.x[1]
    res = _solve_dual(U, V, E, cost, -value_row,
                      bounds=[(a_u, a_u), (a_v, a_v),
                              (-_DUAL_BOUND, _DUAL_BOUND), (0.0, _DUAL_BOUND)])
    dual = Dual(float(a_u), float(a_v), float(res.x[2]), float(res.x[3]))
    gap = min(float(dual.slack(U, V, E, cost).min()), _min_continuum_slack(dual))
    dual = dual.shifted(min(0.0, gap))
    bound = solve_entropy_bound(f, omega, grid, certify=False).value
    tolerance = max(0.0, bound - dual.value(fu, fv, omega))
    return _witness_from_dual(dual, omega, grid, tolerance)


def evaluate_witness(w: Witness, f) -> float:
    f = check_behavior(f, "f")
    return float(0.5 * np.sum(w.gamma * f.T) - w.zeta)


def finite_size_min_entropy(h: float, fs: FiniteSizeParams) -> float:
    """Smooth min-entropy (bits) certified for ``fs.n`` rounds passing threshold ``h``."""
    h = check_scalar(h, "h", min_val=0.0, max_val=1.0)
    n = fs.n
    penalty_log = math.log2(2.0 / fs.epsilon)
    rate = h - fs.c * math.sqrt(penalty_log / n) - fs.d * penalty_log / n
    return max(0.0, n * rate)
