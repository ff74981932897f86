"""Offload allocation inside one cooperation group by successive convex approximation.

The group energy is the RP's processing energy plus every RD's local and
transmit energy. Transmit powers couple the RDs through the NOMA term, which
makes the problem non-convex; each outer iteration replaces every power by a
strongly convex quadratic model anchored at the current plan, solves the
resulting convex problem over the box and the modelled power caps, and moves
towards its solution with a step that never increases the true energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import LN2, GroupLoads
from .model import Scenario

FEASIBILITY_MARGIN = 1e-12  # accepted iterates keep p <= Pmax * (1 - margin)


@dataclass(frozen=True, eq=False)
class Group:
    rp: int
    members: tuple[int, ...]
    task: np.ndarray  # L_i of members, bits
    rd_coeff: np.ndarray  # gamma_i C_i^3 / tau^2
    rp_task: float
    rp_coeff: float
    n0: np.ndarray  # sigma^2 / g_{i,rp}
    p_max: np.ndarray
    slot: float
    c: float  # ln(alpha) = ln 2 / (tau w)

    @property
    def size(self) -> int:
        return len(self.members)


def make_group(scenario: Scenario, rp: int, members) -> Group:
    members = tuple(int(i) for i in members)
    ues, params = scenario.ues, scenario.params
    slot = params.slot_length
    return Group(
        rp=rp,
        members=members,
        task=np.array([ues[i].task_bits for i in members], dtype=float),
        rd_coeff=np.array([ues[i].energy_coeff for i in members], dtype=float) / slot**2,
        rp_task=ues[rp].task_bits,
        rp_coeff=ues[rp].energy_coeff / slot**2,
        n0=np.array([params.noise_power / scenario.gain(i, rp) for i in members], dtype=float),
        p_max=np.array([ues[i].max_tx_power for i in members], dtype=float),
        slot=slot,
        c=LN2 / params.slot_bits,
    )


# --- true model -------------------------------------------------------------------

def powers(group: Group, D: np.ndarray) -> np.ndarray:
    """Minimum NOMA transmit power of every member for offload vector ``D``."""
    D = np.asarray(D, dtype=float)
    S = D.sum()
    return group.n0 * np.expm1(group.c * D) * np.exp(group.c * (S - D))


def group_objective(group: Group, D: np.ndarray) -> float:
    D = np.asarray(D, dtype=float)
    S = D.sum()
    compute = group.rp_coeff * (group.rp_task + S) ** 3 + float(
        np.sum(group.rd_coeff * (group.task - D) ** 3)
    )
    return compute + group.slot * float(powers(group, D).sum())


def group_objective_batch(group: Group, D: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Energies and feasibility masks for a batch of offload vectors (rows of ``D``)."""
    S = D.sum(axis=1, keepdims=True)
    p = group.n0 * np.expm1(group.c * D) * np.exp(group.c * (S - D))
    energy = (
        group.rp_coeff * (group.rp_task + S[:, 0]) ** 3
        + np.sum(group.rd_coeff * (group.task - D) ** 3, axis=1)
        + group.slot * p.sum(axis=1)
    )
    feasible = np.all(p <= group.p_max, axis=1)
    return energy, feasible


def power_gradient(group: Group, D: np.ndarray, i: int) -> np.ndarray:
    """Gradient of member ``i``'s power (``i`` is a position in the group) w.r.t. ``D``."""
    D = np.asarray(D, dtype=float)
    S = D.sum()
    all_term = math.exp(group.c * S)
    own_out = math.exp(group.c * (S - D[i]))
    g = np.full(group.size, group.n0[i] * group.c * (all_term - own_out))
    g[i] = group.n0[i] * group.c * all_term
    return g


def power_hessian_diag(group: Group, D: np.ndarray, i: int) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    S = D.sum()
    all_term = math.exp(group.c * S)
    own_out = math.exp(group.c * (S - D[i]))
    h = np.full(group.size, group.n0[i] * group.c**2 * (all_term - own_out))
    h[i] = group.n0[i] * group.c**2 * all_term
    return h


def lipschitz_constants(group: Group, i: int) -> tuple[float, float]:
    """Lipschitz constants of member ``i``'s own and cross power derivatives on the box.

    Both derivatives are increasing and convex in the loads, so the tight
    constant is the slope at the upper corner of the box (all loads at their
    maxima). The end-to-end secant slope is smaller and does not bound the
    derivative's variation near that corner.
    """
    if group.task[i] == 0:
        return 0.0, 0.0
    full = math.exp(group.c * float(group.task.sum()))
    others = math.exp(group.c * float(group.task.sum() - group.task[i]))
    own = group.n0[i] * group.c**2 * full
    cross = group.n0[i] * group.c**2 * (full - others) if group.size > 1 else 0.0
    return own, cross


# --- surrogate --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Surrogate:
    """Quadratic models of all member powers anchored at ``anchor``."""

    anchor: np.ndarray
    value: np.ndarray  # p_i(anchor)
    grad: np.ndarray  # row i: gradient of p_i
    curv: np.ndarray  # row i: diagonal curvature (lambda + Hessian diagonal)

    def powers(self, D: np.ndarray) -> np.ndarray:
        d = D - self.anchor
        return self.value + self.grad @ d + 0.5 * (self.curv @ (d * d))

    def power_grads(self, D: np.ndarray) -> np.ndarray:
        return self.grad + self.curv * (D - self.anchor)


def build_surrogate(group: Group, anchor: np.ndarray, prox_weight: float) -> Surrogate:
    anchor = np.asarray(anchor, dtype=float)
    m = group.size
    grad = np.array([power_gradient(group, anchor, i) for i in range(m)]).reshape(m, m)
    hess = np.array([power_hessian_diag(group, anchor, i) for i in range(m)]).reshape(m, m)
    return Surrogate(anchor.copy(), powers(group, anchor), grad, hess + prox_weight)


def surrogate_power(
    group: Group, D: np.ndarray, anchor: np.ndarray, prox_weight: float, i: int
) -> tuple[float, np.ndarray]:
    """Value and gradient of member ``i``'s power model at ``D``."""
    sur = build_surrogate(group, anchor, prox_weight)
    D = np.asarray(D, dtype=float)
    return float(sur.powers(D)[i]), sur.power_grads(D)[i]


# --- convex subproblem ------------------------------------------------------------

def _sub_model(group: Group, sur: Surrogate):
    """Value, gradient and Hessian of the convexified group energy."""
    tau = group.slot

    def fgh(D: np.ndarray):
        S = D.sum()
        rest = group.task - D
        rp_load = group.rp_task + S
        p = sur.powers(D)
        f = group.rp_coeff * rp_load**3 + float(np.sum(group.rd_coeff * rest**3)) + tau * p.sum()
        g = 3 * group.rp_coeff * rp_load**2 - 3 * group.rd_coeff * rest**2
        g = g + tau * sur.power_grads(D).sum(axis=0)
        H = np.full((group.size, group.size), 6 * group.rp_coeff * rp_load)
        H[np.diag_indices_from(H)] += 6 * group.rd_coeff * rest + tau * sur.curv.sum(axis=0)
        return f, g, H

    return fgh


def _with_barrier(fgh, sur: Surrogate, p_max: np.ndarray, mu: float):
    def bfgh(D: np.ndarray):
        slack = p_max - sur.powers(D)
        if np.any(slack <= 0):
            return math.inf, None, None
        f, g, H = fgh(D)
        pg = sur.power_grads(D)
        f = f - mu * float(np.sum(np.log(slack)))
        g = g + mu * (pg / slack[:, None]).sum(axis=0)
        H = H + mu * (pg.T / slack**2) @ pg + mu * np.diag((sur.curv / slack[:, None]).sum(axis=0))
        return f, g, H

    return bfgh


def projected_newton(fgh, x0: np.ndarray, upper: np.ndarray, tol: float, max_iter: int = 100):
    """Minimize a smooth convex function over ``[0, upper]`` by projected Newton steps.

    Bound-active coordinates whose gradient pushes outward are frozen; the
    Newton step on the rest is projected back onto the box and shortened by
    Armijo backtracking.
    """
    x = np.clip(np.asarray(x0, dtype=float), 0.0, upper)
    f, g, H = fgh(x)
    eps = 1e-9 * np.maximum(upper, 1.0)
    ok = True
    for _ in range(max_iter):
        active = ((x <= eps) & (g > 0)) | ((x >= upper - eps) & (g < 0)) | (upper <= 0)
        free = ~active
        if not free.any():
            break
        d = np.zeros_like(x)
        try:
            d[free] = -np.linalg.solve(H[np.ix_(free, free)], g[free])
        except np.linalg.LinAlgError:
            d[free] = -g[free] / np.maximum(np.diag(H)[free], 1e-300)
        decrement = -float(g[free] @ d[free])
        if decrement <= tol * max(abs(f), 1e-300):
            break
        t = 1.0
        while t > 1e-12:
            xn = np.clip(x + t * d, 0.0, upper)
            fn, gn, Hn = fgh(xn)
            if fn <= f + 1e-4 * float(g @ (xn - x)):
                break
            t *= 0.5
        else:
            ok = False
            break
        moved = float(np.max(np.abs(xn - x)))
        x, f, g, H = xn, fn, gn, Hn
        if moved <= 1e-9:
            break
    return x, f, ok


def solve_subproblem(group: Group, sur: Surrogate, tol: float) -> tuple[np.ndarray, bool]:
    """Minimize the convexified energy over the box and the modelled power caps."""
    fgh = _sub_model(group, sur)
    x, f, ok = projected_newton(fgh, sur.anchor, group.task, tol)
    if np.all(sur.powers(x) <= group.p_max):
        return x, ok
    # caps bind: interior path from the (strictly feasible) anchor
    x = sur.anchor.copy()
    m = group.size
    f0 = abs(fgh(x)[0])
    mu = 1e-3 * max(f0, 1e-300)
    while True:
        x, _, ok_mu = projected_newton(_with_barrier(fgh, sur, group.p_max, mu), x, group.task, tol)
        ok = ok and ok_mu
        if m * mu <= tol * max(f0, 1e-300):
            break
        mu *= 0.1
    return x, ok


# --- outer loop -------------------------------------------------------------------

@dataclass(frozen=True)
class ScaConfig:
    prox_weight: float | None = None  # None: 1e-6 x largest own-derivative Lipschitz constant
    rel_tol: float = 1e-13
    step_tol: float = 1e-3  # bits
    max_iters: int = 200
    inner_tol: float = 1e-12
    min_step: float = 2.0**-30

    def __post_init__(self) -> None:
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.prox_weight is not None and self.prox_weight < 0:
            raise ValueError("prox_weight must be >= 0")


@dataclass(frozen=True, eq=False)
class ScaResult:
    rp: int
    members: tuple[int, ...]
    loads: np.ndarray
    objective: float
    iterations: int
    history: tuple[float, ...] = field(repr=False)
    converged: bool = True
    inner_ok: bool = True

    def group_loads(self) -> GroupLoads:
        return GroupLoads(self.rp, self.members, tuple(float(x) for x in self.loads))


def default_prox_weight(group: Group) -> float:
    return 1e-6 * max((lipschitz_constants(group, i)[0] for i in range(group.size)), default=0.0)


def _feasible_step(group: Group, D: np.ndarray, step: np.ndarray, cap: np.ndarray) -> float:
    """Largest step fraction (up to 1) keeping every true power under its cap."""

    def ok(t: float) -> bool:
        return bool(np.all(powers(group, np.clip(D + t * step, 0.0, group.task)) <= cap))

    if ok(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def solve_group(group: Group, config: ScaConfig = ScaConfig()) -> ScaResult:
    """Minimize the group energy starting from the no-offload plan.

    Every accepted iterate satisfies the box and the true power caps and has
    true energy no larger than its predecessor; ``history`` lists those energies.
    """
    m = group.size
    D = np.zeros(m)
    F = group_objective(group, D)
    history = [F]
    if m == 0 or not np.any(group.task > 0):
        return ScaResult(group.rp, group.members, D, F, 0, tuple(history))
    lam = default_prox_weight(group) if config.prox_weight is None else config.prox_weight
    cap = group.p_max * (1 - FEASIBILITY_MARGIN)
    converged = False
    inner_ok = True
    it = 0
    for it in range(1, config.max_iters + 1):
        sur = build_surrogate(group, D, lam)
        target, ok = solve_subproblem(group, sur, config.inner_tol)
        inner_ok = inner_ok and ok
        step = target - D
        if float(np.max(np.abs(step))) <= config.step_tol:
            converged = True
            break
        gamma = _feasible_step(group, D, step, cap)
        accepted = False
        while gamma >= config.min_step:
            Dn = np.clip(D + gamma * step, 0.0, group.task)
            Fn = group_objective(group, Dn)
            if Fn <= F:
                accepted = True
                break
            gamma *= 0.5
        if not accepted:
            converged = True  # no descent left along the model direction
            break
        moved = float(np.max(np.abs(Dn - D)))
        change = F - Fn
        D, F = Dn, Fn
        history.append(F)
        if change <= config.rel_tol * abs(F) and moved <= config.step_tol:
            converged = True
            break
    return ScaResult(group.rp, group.members, D, F, it, tuple(history), converged, inner_ok)


def grid_oracle(group: Group, resolution: int) -> tuple[np.ndarray, float]:
    """Exhaustive grid scan of the feasible box (groups of at most two RDs)."""
    if group.size > 2:
        raise ValueError("grid oracle supports at most two RDs per group")
    if group.size == 0:
        return np.zeros(0), group_objective(group, np.zeros(0))
    axes = [np.linspace(0.0, L, resolution) for L in group.task]
    mesh = np.meshgrid(*axes, indexing="ij")
    D = np.stack([a.ravel() for a in mesh], axis=1)
    energy, feasible = group_objective_batch(group, D)
    energy = np.where(feasible, energy, np.inf)
    k = int(np.argmin(energy))
    return D[k], float(energy[k])
