"""Directional derivatives of player costs by three independent routes.

* FD: common-random-number resimulation differences with a geometric
  epsilon schedule and Richardson extrapolation;
* SENS: forward sensitivity processes contracted against cost
  gradients;
* BSDE: adjoint pairs contracted against the control loadings, which
  needs no forward sensitivity at all for first derivatives and no
  mixed second-order sensitivity for second derivatives.

All dt-integrals use the left endpoint, matching the Euler filtration.
Standard errors always come from pathwise differences, never from
differencing two independent estimates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bsde import AdjointSolution, SecondAdjointSolution
from .model import Control, ControlProfile, GameSpec, NoiseBundle, TimeGrid
from .sim import (PathEnsemble, SecondSensitivityEnsemble,
                  SensitivityEnsemble, assemble_variational,
                  second_order_cross_sources, simulate_cost_batch,
                  simulate_paths)

__all__ = [
    "DerivativeEstimate",
    "cost_pathwise",
    "cost_value",
    "first_derivative_fd",
    "first_derivative_fd_sweep",
    "first_derivative_fd_table",
    "first_derivative_table",
    "first_derivative_sens",
    "first_derivative_bsde",
    "second_derivative_fd",
    "second_derivative_fd_sweep",
    "second_derivative_z_oracle",
    "second_derivative_bsde",
]

EPS_SCHEDULE = (1e-2, 5e-3, 2.5e-3)


@dataclass
class DerivativeEstimate:
    value: float
    std_error: float
    method: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise FloatingPointError("derivative estimate is not finite")
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")


def cost_pathwise(spec: GameSpec, controls: ControlProfile,
                  ensemble: PathEnsemble) -> np.ndarray:
    """Per-path realized cost of every player, shape (P, N)."""
    grid = ensemble.grid
    P = ensemble.n_paths
    N = spec.n_players
    out = np.zeros((P, N))
    for k, t in enumerate(grid.nodes[:-1]):
        x = ensemble.states[:, k, :]
        u = ensemble.realized_controls[:, k, :]
        for i in range(N):
            out[:, i] += spec.running_cost[i].value(t, x, u) * grid.dt
    xT = ensemble.states[:, -1, :]
    for i in range(N):
        out[:, i] += spec.terminal_cost[i].value(xT)
    return out


def cost_value(spec: GameSpec, controls: ControlProfile,
               ensemble: PathEnsemble):
    """Sample mean and standard error of each player's cost."""
    pc = cost_pathwise(spec, controls, ensemble)
    P = pc.shape[0]
    return pc.mean(axis=0), pc.std(axis=0, ddof=1) / np.sqrt(P)


def _richardson(columns: list, order: int = 2) -> np.ndarray:
    """Richardson table for a halving step schedule; ``columns`` holds
    pathwise estimates at eps, eps/2, eps/4, ...; leading error term
    eps^order, subsequent terms two orders apart."""
    table = [np.asarray(c, dtype=float) for c in columns]
    level = 0
    while len(table) > 1:
        level += 1
        factor = 2.0 ** (order + 2 * (level - 1))
        table = [(factor * table[j + 1] - table[j]) / (factor - 1.0)
                 for j in range(len(table) - 1)]
    return table[0]


def _check_schedule(eps_schedule):
    eps = list(eps_schedule)
    if not eps:
        raise ValueError("epsilon schedule must be nonempty")
    for a, b in zip(eps, eps[1:]):
        if not np.isclose(a / b, 2.0):
            raise ValueError("epsilon schedule must halve at each level")
    return eps


def first_derivative_fd_sweep(spec: GameSpec, controls: ControlProfile,
                              h: int, direction: Control, grid: TimeGrid,
                              noise: NoiseBundle,
                              eps_schedule=EPS_SCHEDULE) -> list:
    """Central difference in player h's direction for every cost
    functional at once; all resimulation legs run in one batched sweep
    under common random numbers.  Returns one estimate per player."""
    eps = _check_schedule(eps_schedule)
    profiles = []
    for e in eps:
        profiles.append(controls.perturbed(h, direction, e))
        profiles.append(controls.perturbed(h, direction, -e))
    costs = simulate_cost_batch(spec, profiles, grid, noise)
    out = []
    P = costs.shape[1]
    for i in range(spec.n_players):
        columns = [(costs[2 * m, :, i] - costs[2 * m + 1, :, i]) / (2 * e)
                   for m, e in enumerate(eps)]
        est = _richardson(columns, order=2)
        out.append(DerivativeEstimate(
            value=float(est.mean()),
            std_error=float(est.std(ddof=1) / np.sqrt(P)),
            method="FD",
            metadata={"player": i, "perturbed": h,
                      "direction": direction.label,
                      "eps_schedule": list(eps),
                      "levels": [float(np.mean(c)) for c in columns]}))
    return out


def first_derivative_fd(spec: GameSpec, controls: ControlProfile, i: int,
                        h: int, direction: Control, grid: TimeGrid,
                        noise: NoiseBundle,
                        eps_schedule=EPS_SCHEDULE) -> DerivativeEstimate:
    """Central difference of player i's cost in player h's direction,
    resimulated under common random numbers."""
    return first_derivative_fd_sweep(spec, controls, h, direction, grid,
                                     noise, eps_schedule)[i]


def first_derivative_fd_table(spec: GameSpec, controls: ControlProfile,
                              targets, grid: TimeGrid, noise: NoiseBundle,
                              eps_schedule=EPS_SCHEDULE) -> dict:
    """FD estimates for a whole list of (player, direction) targets
    with every resimulation leg in one stacked common-random-number
    sweep; returns {(h, direction index): [estimate per cost player]}."""
    eps = _check_schedule(eps_schedule)
    profiles = []
    for h, direction in targets:
        for e in eps:
            profiles.append(controls.perturbed(h, direction, e))
            profiles.append(controls.perturbed(h, direction, -e))
    costs = simulate_cost_batch(spec, profiles, grid, noise)
    P = costs.shape[1]
    out = {}
    per_target = 2 * len(eps)
    for idx, (h, direction) in enumerate(targets):
        base = idx * per_target
        ests = []
        for i in range(spec.n_players):
            columns = [(costs[base + 2 * m, :, i]
                        - costs[base + 2 * m + 1, :, i]) / (2 * e)
                       for m, e in enumerate(eps)]
            est = _richardson(columns, order=2)
            ests.append(DerivativeEstimate(
                value=float(est.mean()),
                std_error=float(est.std(ddof=1) / np.sqrt(P)),
                method="FD",
                metadata={"player": i, "perturbed": h,
                          "direction": direction.label,
                          "eps_schedule": list(eps)}))
        out[(h, idx)] = ests
    return out


def first_derivative_table(spec: GameSpec, controls: ControlProfile,
                           ensemble: PathEnsemble, noise: NoiseBundle,
                           sens_list, adjoints) -> dict:
    """Sensitivity- and adjoint-route first derivatives for every
    (cost player, sensitivity target) combination in one time sweep.

    ``sens_list`` holds SensitivityEnsembles (one per perturbation
    target), ``adjoints`` one AdjointSolution per cost player.  The
    coefficient slice, cost gradients, and direction values are
    evaluated once per step and contracted against all targets.
    Returns {(i, target index): {"SENS": estimate, "BSDE": estimate}}.
    """
    grid = ensemble.grid
    P = ensemble.n_paths
    N = spec.n_players
    S = len(sens_list)
    hs = [s.perturbed_player for s in sens_list]
    unique_h = sorted(set(hs))
    acc_sens = np.zeros((P, N, S))
    acc_bsde = np.zeros((P, N, S))
    for k, t in enumerate(grid.nodes[:-1]):
        x = ensemble.states[:, k, :]
        u = ensemble.realized_controls[:, k, :]
        dub, dus_coef = {}, {}
        for h in unique_h:
            xh, uh = x[:, h], u[:, h]
            dub[h] = spec.drift[h].du(t, xh, x, uh)
            dus_coef[h] = spec.diffusion[h].du(t, xh, x, uh)
        ystack = np.stack([s.values[:, k, :] for s in sens_list], axis=1)
        dvals = np.stack([s.direction(t, k, noise.increments)
                          for s in sens_list], axis=1)  # (P, S)
        for i in range(N):
            fy = spec.running_cost[i].dy(t, x, u)
            fu = spec.running_cost[i].du(t, x, u)
            sv = np.einsum("pa,psa->ps", fy.astype(ystack.dtype), ystack,
                           optimize=False)
            for sidx, h in enumerate(hs):
                sv[:, sidx] += fu[:, h] * dvals[:, sidx]
                integ = (adjoints[i].P_vals[:, k, h] * dub[h]
                         + dus_coef[h] * adjoints[i].Q_vals[:, k, h, h]
                         + fu[:, h])
                acc_bsde[:, i, sidx] += integ * dvals[:, sidx] * grid.dt
            acc_sens[:, i, :] += sv * grid.dt
    xT = ensemble.states[:, -1, :]
    yT = np.stack([s.values[:, -1, :] for s in sens_list], axis=1)
    for i in range(N):
        gy = spec.terminal_cost[i].dy(xT)
        acc_sens[:, i, :] += np.einsum("pa,psa->ps", gy, yT, optimize=False)
    out = {}
    for i in range(N):
        for sidx, s in enumerate(sens_list):
            meta = {"player": i, "perturbed": s.perturbed_player,
                    "direction": s.direction.label}
            a = acc_sens[:, i, sidx]
            b = acc_bsde[:, i, sidx]
            out[(i, sidx)] = {
                "SENS": DerivativeEstimate(
                    value=float(a.mean()),
                    std_error=float(a.std(ddof=1) / np.sqrt(P)),
                    method="SENS", metadata=dict(meta)),
                "BSDE": DerivativeEstimate(
                    value=float(b.mean()),
                    std_error=float(b.std(ddof=1) / np.sqrt(P)),
                    method="BSDE", metadata=dict(meta)),
            }
    return out


def first_derivative_sens(spec: GameSpec, controls: ControlProfile,
                          ensemble: PathEnsemble, sens: SensitivityEnsemble,
                          i: int, noise: NoiseBundle) -> DerivativeEstimate:
    """Sensitivity-process route: contract the linearized state response
    against the running/terminal cost gradients, plus the direct
    control term."""
    h = sens.perturbed_player
    grid = ensemble.grid
    P = ensemble.n_paths
    acc = np.zeros(P)
    for k, t in enumerate(grid.nodes[:-1]):
        x = ensemble.states[:, k, :]
        u = ensemble.realized_controls[:, k, :]
        du_h = sens.direction(t, k, noise.increments)
        fy = spec.running_cost[i].dy(t, x, u)
        fu = spec.running_cost[i].du(t, x, u)
        acc += (np.einsum("pa,pa->p", fy, sens.values[:, k, :],
                          optimize=False)
                + fu[:, h] * du_h) * grid.dt
    gy = spec.terminal_cost[i].dy(ensemble.states[:, -1, :])
    acc += np.einsum("pa,pa->p", gy, sens.values[:, -1, :], optimize=False)
    return DerivativeEstimate(
        value=float(acc.mean()),
        std_error=float(acc.std(ddof=1) / np.sqrt(P)),
        method="SENS",
        metadata={"player": i, "perturbed": h,
                  "direction": sens.direction.label})


def first_derivative_bsde(spec: GameSpec, controls: ControlProfile,
                          ensemble: PathEnsemble, noise: NoiseBundle,
                          adjoint: AdjointSolution, h: int,
                          direction: Control,
                          return_pathwise: bool = False):
    """Adjoint route: the derivative is the time integral of the
    direction times (costate against the drift control loading, the
    diffusion control loading against the matching martingale
    component, and the direct cost term)."""
    i = adjoint.player
    grid = ensemble.grid
    P = ensemble.n_paths
    acc = np.zeros(P)
    for k, t in enumerate(grid.nodes[:-1]):
        x = ensemble.states[:, k, :]
        u = ensemble.realized_controls[:, k, :]
        du_h = direction(t, k, noise.increments)
        dub_h = spec.drift[h].du(t, x[:, h], x, u[:, h])
        dus_h = spec.diffusion[h].du(t, x[:, h], x, u[:, h])
        fu = spec.running_cost[i].du(t, x, u)
        integrand = (adjoint.P_vals[:, k, h] * dub_h
                     + dus_h * adjoint.Q_vals[:, k, h, h]
                     + fu[:, h])
        acc += integrand * du_h * grid.dt
    est = DerivativeEstimate(
        value=float(acc.mean()),
        std_error=float(acc.std(ddof=1) / np.sqrt(P)),
        method="BSDE",
        metadata={"player": i, "perturbed": h, "direction": direction.label})
    if return_pathwise:
        return est, acc
    return est


def second_derivative_fd_sweep(spec: GameSpec, controls: ControlProfile,
                               h: int, l: int, dir_h: Control, dir_l: Control,
                               grid: TimeGrid, noise: NoiseBundle,
                               eps_schedule=EPS_SCHEDULE) -> list:
    """Four-point central mixed difference for every cost functional at
    once, with all legs in one batched common-random-number sweep."""
    if h == l:
        raise ValueError("mixed second derivative requires distinct players")
    eps = _check_schedule(eps_schedule)
    signs = ((1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0))
    profiles = [controls.perturbed(h, dir_h, sa * e).perturbed(l, dir_l,
                                                               sb * e)
                for e in eps for sa, sb in signs]
    costs = simulate_cost_batch(spec, profiles, grid, noise)
    out = []
    P = costs.shape[1]
    for i in range(spec.n_players):
        columns = []
        for m, e in enumerate(eps):
            acc = sum(sa * sb * costs[4 * m + q, :, i]
                      for q, (sa, sb) in enumerate(signs))
            columns.append(acc / (4.0 * e * e))
        est = _richardson(columns, order=2)
        out.append(DerivativeEstimate(
            value=float(est.mean()),
            std_error=float(est.std(ddof=1) / np.sqrt(P)),
            method="FD",
            metadata={"player": i, "pair": (h, l),
                      "directions": (dir_h.label, dir_l.label),
                      "eps_schedule": list(eps),
                      "levels": [float(np.mean(c)) for c in columns]}))
    return out


def second_derivative_fd(spec: GameSpec, controls: ControlProfile, i: int,
                         h: int, l: int, dir_h: Control, dir_l: Control,
                         grid: TimeGrid, noise: NoiseBundle,
                         eps_schedule=EPS_SCHEDULE) -> DerivativeEstimate:
    """Four-point central mixed difference under common random numbers."""
    return second_derivative_fd_sweep(spec, controls, h, l, dir_h, dir_l,
                                      grid, noise, eps_schedule)[i]


def _cost_cross_terms(spec, i, t, x, u, yh, yl, du_h, du_l, h, l):
    """Running-cost quadratic form in the two responses and directions."""
    f = spec.running_cost[i]
    fyy = f.dyy(t, x, u)
    fyu = f.dyu(t, x, u)
    fuu = f.duu(t, x, u)
    return (np.einsum("pa,pab,pb->p", yh, fyy, yl, optimize=False)
            + du_h * np.einsum("pa,pa->p", fyu[:, :, h], yl, optimize=False)
            + du_l * np.einsum("pa,pa->p", yh, fyu[:, :, l], optimize=False)
            + fuu[:, h, l] * du_h * du_l)


def second_derivative_z_oracle(spec: GameSpec, controls: ControlProfile,
                               ensemble: PathEnsemble, noise: NoiseBundle,
                               sens_h: SensitivityEnsemble,
                               sens_l: SensitivityEnsemble,
                               mixed: SecondSensitivityEnsemble,
                               i: int, return_pathwise: bool = False):
    """Mixed-sensitivity route: cost quadratic form in the first-order
    responses plus cost gradients against the mixed response."""
    h, l = sens_h.perturbed_player, sens_l.perturbed_player
    if mixed.players != (h, l):
        raise ValueError("mixed sensitivity was built for different players")
    grid = ensemble.grid
    P = ensemble.n_paths
    acc = np.zeros(P)
    for k, t in enumerate(grid.nodes[:-1]):
        x = ensemble.states[:, k, :]
        u = ensemble.realized_controls[:, k, :]
        du_h = sens_h.direction(t, k, noise.increments)
        du_l = sens_l.direction(t, k, noise.increments)
        acc += _cost_cross_terms(spec, i, t, x, u, sens_h.values[:, k, :],
                                 sens_l.values[:, k, :], du_h, du_l,
                                 h, l) * grid.dt
        fy = spec.running_cost[i].dy(t, x, u)
        acc += np.einsum("pa,pa->p", fy, mixed.values[:, k, :],
                         optimize=False) * grid.dt
    xT = ensemble.states[:, -1, :]
    gyy = spec.terminal_cost[i].dyy(xT)
    gy = spec.terminal_cost[i].dy(xT)
    acc += np.einsum("pa,pab,pb->p", sens_h.values[:, -1, :], gyy,
                     sens_l.values[:, -1, :], optimize=False)
    acc += np.einsum("pa,pa->p", gy, mixed.values[:, -1, :], optimize=False)
    est = DerivativeEstimate(
        value=float(acc.mean()),
        std_error=float(acc.std(ddof=1) / np.sqrt(P)),
        method="Z-ORACLE",
        metadata={"player": i, "pair": (h, l)})
    if return_pathwise:
        return est, acc
    return est


def second_derivative_bsde(spec: GameSpec, controls: ControlProfile,
                           ensemble: PathEnsemble, noise: NoiseBundle,
                           first: AdjointSolution,
                           second: SecondAdjointSolution,
                           sens_h: SensitivityEnsemble,
                           sens_l: SensitivityEnsemble,
                           return_pathwise: bool = False):
    """Adjoint route for the mixed second derivative; the mixed
    sensitivity is eliminated entirely.

    The martingale loadings enter with a fixed orientation: the term in
    player h's direction reads row h of driver h's loading, the term in
    player l's direction reads column l of driver l's loading.  That is
    the orientation under which the product-trace bookkeeping closes.
    """
    i = first.player
    if second.player != i:
        raise ValueError("adjoint pairs belong to different players")
    h, l = sens_h.perturbed_player, sens_l.perturbed_player
    if h == l:
        raise ValueError("mixed second derivative requires distinct players")
    grid = ensemble.grid
    P = ensemble.n_paths
    acc = np.zeros(P)
    for k, t in enumerate(grid.nodes[:-1]):
        x = ensemble.states[:, k, :]
        u = ensemble.realized_controls[:, k, :]
        yh = sens_h.values[:, k, :]
        yl = sens_l.values[:, k, :]
        du_h = sens_h.direction(t, k, noise.increments)
        du_l = sens_l.direction(t, k, noise.increments)
        vc = assemble_variational(spec, t, x, u)
        P2 = second.P2[:, k]

        dub_h = vc.dub[:, h]
        dus_h = vc.dus[:, h]
        pi_row_h = vc.diffusion_row(h)
        term_h = (dub_h * np.einsum("pa,pa->p", P2[:, h, :], yl,
                                    optimize=False)
                  + dus_h * P2[:, h, h]
                  * np.einsum("pa,pa->p", pi_row_h, yl, optimize=False)
                  + dus_h * np.einsum(
                      "pa,pa->p", second.Q2[:, k, h, h, :], yl,
                      optimize=False))
        fyu = spec.running_cost[i].dyu(t, x, u)
        term_h += np.einsum("pa,pa->p", fyu[:, :, h], yl, optimize=False)

        dub_l = vc.dub[:, l]
        dus_l = vc.dus[:, l]
        pi_row_l = vc.diffusion_row(l)
        term_l = (dub_l * np.einsum("pa,pa->p", yh, P2[:, :, l],
                                    optimize=False)
                  + dus_l * P2[:, l, l]
                  * np.einsum("pa,pa->p", pi_row_l, yh, optimize=False)
                  + dus_l * np.einsum(
                      "pa,pa->p", yh, second.Q2[:, k, l, :, l],
                      optimize=False))
        term_l += np.einsum("pa,pa->p", yh, fyu[:, :, l], optimize=False)

        fuu = spec.running_cost[i].duu(t, x, u)
        direct = fuu[:, h, l] * du_h * du_l

        drift_src, diff_src = second_order_cross_sources(
            spec, t, x, u, yh, yl, du_h, du_l, h, l)
        coupling = np.einsum("pa,pa->p", first.P_vals[:, k, :], drift_src,
                             optimize=False)
        qdiag = np.stack([first.Q_vals[:, k, j, j]
                          for j in range(spec.n_players)], axis=1)
        coupling += np.einsum("pj,pj->p", qdiag, diff_src, optimize=False)

        acc += (term_h * du_h + term_l * du_l + direct + coupling) * grid.dt

    est = DerivativeEstimate(
        value=float(acc.mean()),
        std_error=float(acc.std(ddof=1) / np.sqrt(P)),
        method="BSDE",
        metadata={"player": i, "pair": (h, l)})
    if return_pathwise:
        return est, acc
    return est
