"""Aggregate market built from many independent semi-Markov agents.

Each agent holds a trading mood x^a on a sped-up clock t/eps; the market
amplitude Psi scales order sizes.  The centered integrated imbalance

    X_t = ∫_0^t sum_a Psi_s (x^a_{s/eps} - mu) ds

is accumulated exactly: agents are simulated in vectorized chunks, their jump
events merged, and the piecewise-linear cumulative occupation integral is
evaluated at the grid points.  Agents are never stored whole.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .distributions import Exponential
from .paths import SamplePath
from .semi_markov import SemiMarkovModel, StationaryLaw, stationary_law, \
    theorem_condition_value

__all__ = [
    "AmplitudeModel",
    "MarketConfig",
    "AggregatePath",
    "simulate_amplitude",
    "simulate_market",
    "markov_market",
    "mixed_market",
    "theorem_condition",
]


@dataclass(frozen=True)
class AmplitudeModel:
    """Trade-size process: a positive constant or a geometric diffusion.

    The diffusion dPsi = drift*Psi dt + vol*Psi dW is stepped in exponential
    form, so paths stay positive and E[Psi_t] = psi0 * exp(drift * t) holds
    exactly at the grid points.
    """

    kind: str = "constant"
    level: float = 1.0
    drift: float = 0.0
    vol: float = 0.0
    initial: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "diffusion"):
            raise ValueError(f"unknown amplitude kind {self.kind!r}")
        if self.kind == "constant" and not np.isfinite(self.level):
            raise ValueError("constant amplitude level must be finite")
        if self.kind == "diffusion" and self.vol < 0.0:
            raise ValueError("diffusion volatility must be nonnegative")

    @property
    def is_unit(self):
        return self.kind == "constant" and self.level == 1.0


def simulate_amplitude(amp: AmplitudeModel, dt, n_points, rng) -> SamplePath:
    if amp.kind == "constant":
        return SamplePath(dt=dt, values=np.full(n_points, amp.level, dtype=float))
    shocks = (amp.drift - 0.5 * amp.vol**2) * dt \
        + amp.vol * np.sqrt(dt) * rng.standard_normal(n_points - 1)
    log_path = np.concatenate([[0.0], np.cumsum(shocks)])
    return SamplePath(dt=dt, values=amp.initial * np.exp(log_path))


@dataclass(frozen=True)
class MarketConfig:
    model: SemiMarkovModel
    n_agents: int
    epsilon: float
    amplitude: AmplitudeModel
    horizon: float
    seed: int
    n_grid: int = 2**13
    s0: float = 0.0
    chunk_size: int = 2000
    budget_mb: float = 4096.0

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("need at least one agent")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        if self.n_grid < 2:
            raise ValueError("need at least two grid points")

    @property
    def dt(self):
        return self.horizon / (self.n_grid - 1)


@dataclass(frozen=True)
class AggregatePath:
    """Aggregate rate, raw and rescaled integrated imbalance, amplitude, log-price."""

    dt: float
    y: np.ndarray
    x_raw: np.ndarray
    x_scaled: np.ndarray
    psi: np.ndarray
    log_price: np.ndarray
    scaling: float
    mu: float

    @property
    def times(self):
        return self.dt * np.arange(self.y.size)

    def path(self, field="x_scaled") -> SamplePath:
        return SamplePath(dt=self.dt, values=getattr(self, field))


# -- vectorized agent chunk engine ------------------------------------------

def _draw_grouped(rng, group_idx, n_groups, samplers):
    """Draw one value per element, sampler chosen by group index."""
    out = np.empty(group_idx.size)
    for g in range(n_groups):
        mask = group_idx == g
        if mask.any():
            out[mask] = samplers[g](rng, int(mask.sum()))
    return out


def _transition_pairs(model):
    """Feasible (i_idx, j_idx, law) transitions, merged by state when laws allow."""
    states = list(model.space.states)
    pairs = []
    per_state = True
    for ii, i in enumerate(states):
        row_laws = {model.law(i, j) for jj, j in enumerate(states)
                    if model.chain.p[ii, jj] > 0.0}
        if len(row_laws) > 1:
            per_state = False
        for jj, j in enumerate(states):
            if model.chain.p[ii, jj] > 0.0:
                pairs.append((ii, jj, model.law(i, j)))
    return pairs, per_state


def _chunk_events(model, law: StationaryLaw, n_agents, horizon, rng,
                  stationary=True, initial_state=None):
    """Simulate one chunk of agents; return (x0_sum, event times, state deltas).

    Events are the jump epochs in (0, horizon) with the signed change of the
    aggregate mood at that epoch.  One vectorized jump per loop round; the
    active set shrinks as agents pass the horizon.
    """
    states = np.array(model.space.states)
    n_states = states.size
    p = model.chain.p
    cum_rows = np.cumsum(p, axis=1)
    pairs, per_state = _transition_pairs(model)
    state_laws = {ii: lw for ii, jj, lw in pairs} if per_state else None

    if stationary:
        cur = np.searchsorted(np.cumsum(law.nu), rng.random(n_agents), side="right")
    elif initial_state is not None:
        cur = np.full(n_agents, model.space.index(initial_state), dtype=np.int64)
    else:
        cur = np.searchsorted(np.cumsum(law.pi), rng.random(n_agents), side="right")
    cur = np.clip(cur, 0, n_states - 1)
    x0_sum = float(states[cur].sum())

    nxt = np.empty(n_agents, dtype=np.int64)
    t_next = np.empty(n_agents)
    for k_idx in range(n_states):
        mask = cur == k_idx
        count = int(mask.sum())
        if count == 0:
            continue
        if stationary:
            w = p[k_idx] * law.m_cond[k_idx]
            w = w / w.sum()
            nxt[mask] = np.searchsorted(np.cumsum(w), rng.random(count), side="right")
        else:
            nxt[mask] = np.searchsorted(cum_rows[k_idx], rng.random(count), side="right")
        for j_idx in range(n_states):
            sub = mask & (nxt == j_idx)
            hits = int(sub.sum())
            if hits:
                lw = model.law(int(states[k_idx]), int(states[j_idx]))
                draw = lw.equilibrium_sample if stationary else lw.sample
                t_next[sub] = draw(rng, hits)

    ev_times, ev_deltas = [], []
    idx = np.flatnonzero(t_next < horizon)
    t_now = t_next.copy()
    while idx.size:
        # jump: record the mood change at t_now
        ev_times.append(t_now[idx].copy())
        ev_deltas.append((states[nxt[idx]] - states[cur[idx]]).astype(float))
        cur_a = nxt[idx]
        cur[idx] = cur_a
        u = rng.random(idx.size)
        nxt_a = (u[:, None] > cum_rows[cur_a]).sum(axis=1)
        nxt[idx] = nxt_a
        dt_draw = np.empty(idx.size)
        if per_state:
            for ii in state_laws:
                sub = np.flatnonzero(cur_a == ii)
                if sub.size:
                    dt_draw[sub] = state_laws[ii].sample(rng, sub.size)
        else:
            code_a = cur_a * n_states + nxt_a
            for ii, jj, lw in pairs:
                sub = np.flatnonzero(code_a == ii * n_states + jj)
                if sub.size:
                    dt_draw[sub] = lw.sample(rng, sub.size)
        t_now[idx] = t_now[idx] + dt_draw
        idx = idx[t_now[idx] < horizon]
    if ev_times:
        return x0_sum, np.concatenate(ev_times), np.concatenate(ev_deltas)
    return x0_sum, np.empty(0), np.empty(0)


def _chunk_occupation(x0_sum, ev_t, ev_d, horizon, query_times):
    """Exact (∫_0^s Z du, Z(s)) at the query times for one chunk's event stream."""
    order = np.argsort(ev_t, kind="stable")
    tau = np.concatenate([[0.0], ev_t[order]])
    z = x0_sum + np.concatenate([[0.0], np.cumsum(ev_d[order])])
    tau_x = np.concatenate([tau, [horizon]])
    v = np.concatenate([[0.0], np.cumsum(z * np.diff(tau_x))])
    cum = np.interp(query_times, tau_x, v)
    z_idx = np.clip(np.searchsorted(tau, query_times, side="right") - 1, 0, z.size - 1)
    return cum, z[z_idx]


def _estimate_events(law: StationaryLaw, n_agents, horizon):
    mean_between_jumps = float(law.pi @ law.m)
    return n_agents * horizon / mean_between_jumps


def _aggregate_occupation(model, law, cfg: MarketConfig, replicate, stream_base,
                          n_agents, stationary=True, initial_state=None):
    """Sum of per-chunk cumulative occupation integrals and rates at grid points."""
    horizon_scaled = cfg.horizon / cfg.epsilon
    est = _estimate_events(law, n_agents, horizon_scaled)
    est_mb = est * 3 * 8 / 1e6
    if est_mb > cfg.budget_mb:
        raise MemoryError(
            f"estimated {est:.2e} jump events (~{est_mb:.0f} MB) exceed the "
            f"{cfg.budget_mb} MB budget; lower N, horizon or 1/epsilon")
    grid_scaled = np.linspace(0.0, cfg.horizon, cfg.n_grid) / cfg.epsilon
    cum = np.zeros(cfg.n_grid)
    rate = np.zeros(cfg.n_grid)
    start = 0
    chunk_index = 0
    while start < n_agents:
        stop = min(start + cfg.chunk_size, n_agents)
        rng = np.random.default_rng([cfg.seed, replicate, stream_base + chunk_index])
        x0_sum, ev_t, ev_d = _chunk_events(model, law, stop - start, horizon_scaled, rng,
                                           stationary=stationary, initial_state=initial_state)
        c, z = _chunk_occupation(x0_sum, ev_t, ev_d, horizon_scaled, grid_scaled)
        cum += c
        rate += z
        start = stop
        chunk_index += 1
    return cum, rate


def _assemble(cfg, psi, cum, rate, mu, scaling):
    dt = cfg.dt
    inflow = cfg.epsilon * np.diff(cum)          # ∫_cell sum_a x^a_{s/eps} ds, exact
    x_inc = psi.values[:-1] * (inflow - mu * cfg.n_agents * dt)
    x_raw = np.concatenate([[0.0], np.cumsum(x_inc)])
    price = cfg.s0 + np.concatenate([[0.0], np.cumsum(psi.values[:-1] * inflow)])
    return AggregatePath(
        dt=dt,
        y=psi.values * rate,
        x_raw=x_raw,
        x_scaled=x_raw / scaling,
        psi=psi.values,
        log_price=price,
        scaling=scaling,
        mu=mu,
    )


def simulate_market(cfg: MarketConfig, replicate=0, stationary=True,
                    initial_state=None, center_mu=None) -> AggregatePath:
    """Aggregate path of N inert agents under the fractional scaling.

    x_scaled = x_raw / (eps^(1-H) sqrt(N L(1/eps))) with H = (3-alpha)/2.
    Degenerate light-tailed models (diagnostics only) fall back to the
    sqrt(eps N) normalisation.
    """
    law = stationary_law(cfg.model)
    mu = law.mu if center_mu is None else center_mu
    if cfg.model.alpha is not None:
        h = cfg.model.hurst()
        l_eps = float(cfg.model.tail_scale(1.0 / cfg.epsilon))
        scaling = cfg.epsilon ** (1.0 - h) * np.sqrt(cfg.n_agents * l_eps)
    else:
        scaling = float(np.sqrt(cfg.epsilon * cfg.n_agents))
    psi_rng = np.random.default_rng([cfg.seed, replicate, 0])
    psi = simulate_amplitude(cfg.amplitude, cfg.dt, cfg.n_grid, psi_rng)
    cum, rate = _aggregate_occupation(cfg.model, law, cfg, replicate, 1, cfg.n_agents,
                                      stationary=stationary, initial_state=initial_state)
    return _assemble(cfg, psi, cum, rate, mu, scaling)


def markov_market(cfg: MarketConfig, replicate=0) -> AggregatePath:
    """Aggregate path of exponential (Markov) agents under the 1/sqrt(eps N) scaling."""
    for law in cfg.model.sojourns.laws.values():
        if not isinstance(law, Exponential):
            raise ValueError("markov_market requires all-exponential sojourn laws")
    law = stationary_law(cfg.model)
    scaling = float(np.sqrt(cfg.epsilon * cfg.n_agents))
    psi_rng = np.random.default_rng([cfg.seed, replicate, 0])
    psi = simulate_amplitude(cfg.amplitude, cfg.dt, cfg.n_grid, psi_rng)
    cum, rate = _aggregate_occupation(cfg.model, law, cfg, replicate, 1, cfg.n_agents)
    return _assemble(cfg, psi, cum, rate, law.mu, scaling)


def mixed_market(cfg: MarketConfig, rho, markov_model: SemiMarkovModel, replicate=0):
    """Inert block plus rho*N active Markov agents, each under its own scaling.

    Requires Psi = 1.  Returns (inert AggregatePath, active AggregatePath,
    combined SamplePath); the active block is scaled by 1/sqrt(N eps) with N
    the inert count, so the combined path approximates c1 B^H + c2 sqrt(rho) W.
    """
    if not cfg.amplitude.is_unit:
        raise ValueError("mixed market is defined for unit amplitude Psi = 1")
    if rho < 0.0:
        raise ValueError("rho must be nonnegative")
    inert = simulate_market(cfg, replicate=replicate)
    n_active = int(round(rho * cfg.n_agents))
    if n_active == 0:
        combined = SamplePath(dt=cfg.dt, values=inert.x_scaled)
        return inert, None, combined
    law_y = stationary_law(markov_model)
    active_cfg = replace(cfg, model=markov_model, n_agents=n_active)
    cum, rate = _aggregate_occupation(markov_model, law_y, active_cfg, replicate,
                                      10_000, n_active)
    scaling = float(np.sqrt(cfg.n_agents * cfg.epsilon))
    psi = SamplePath(dt=cfg.dt, values=np.ones(cfg.n_grid))
    active = _assemble(replace(active_cfg, model=markov_model), psi, cum, rate,
                       law_y.mu, scaling)
    combined = SamplePath(dt=cfg.dt, values=inert.x_scaled + active.x_scaled)
    return inert, active, combined


def theorem_condition(model: SemiMarkovModel):
    """Evaluate the positivity condition mu sum_k k m_k/eta_k^2 > 0 with a factor report."""
    holds, product, mu, s = theorem_condition_value(model)
    report = {
        "mu": mu,
        "sum_k_mk_over_eta2": s,
        "product": product,
        "holds": bool(holds),
    }
    return report["holds"], report
