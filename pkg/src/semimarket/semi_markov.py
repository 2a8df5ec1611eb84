"""Semi-Markov trading-mood model: kernel, equilibrium law, limit constants, samplers.

A model is (E, P, G): a finite integer state space E containing the inactive
state 0, the embedded chain transition matrix P, and per-transition sojourn
laws G(i,j,.).  Exits from state 0 are heavy-tailed with common index
alpha in (1,2); the induced self-similarity exponent is H = (3-alpha)/2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import SojournLaw
from .paths import SamplePath

__all__ = [
    "StateSpace",
    "TransitionMatrix",
    "SojournFamily",
    "SemiMarkovModel",
    "StationaryLaw",
    "Trajectory",
    "validate_model",
    "stationary_law",
    "expected_visits_before_hit",
    "limit_constant_c2",
    "hurst_from_alpha",
    "sample_path",
    "sample_stationary_path",
    "integrate_trajectory",
    "states_at_times",
]

_ROW_TOL = 1e-12


@dataclass(frozen=True)
class StateSpace:
    """Ordered integer trading moods, containing the inactive state 0."""

    states: tuple

    def __post_init__(self):
        states = tuple(int(s) for s in self.states)
        if len(set(states)) != len(states):
            raise ValueError("state labels must be distinct")
        if 0 not in states:
            raise ValueError("state space must contain the inactive state 0")
        if len(states) < 2:
            raise ValueError("need at least two states")
        object.__setattr__(self, "states", states)

    @property
    def size(self):
        return len(self.states)

    @property
    def index_of_zero(self):
        return self.states.index(0)

    def index(self, label):
        return self.states.index(label)


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic embedded-chain matrix; off-diagonal entries positive."""

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("transition matrix must be square")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def violations(self):
        out = []
        rows = self.p.sum(axis=1)
        for k, s in enumerate(rows):
            if abs(s - 1.0) > _ROW_TOL:
                out.append(f"row {k} of the transition matrix sums to {s!r}, not 1")
        if np.any(self.p < 0.0):
            out.append("transition matrix has negative entries")
        elif not self._irreducible():
            out.append("embedded chain is not irreducible: no unique stationary law")
        return out

    def _irreducible(self):
        n = self.p.shape[0]
        reach = (self.p > 0.0) | np.eye(n, dtype=bool)
        for _ in range(n):
            reach = reach @ reach
        return bool(reach.all())


@dataclass(frozen=True)
class SojournFamily:
    """Map (i, j) state labels -> sojourn law of the holding time in i before jumping to j."""

    laws: dict

    @classmethod
    def from_state_laws(cls, states, by_state):
        """Common case: the sojourn law depends on the current state only."""
        laws = {(i, j): by_state[i] for i in states for j in states}
        return cls(laws=laws)

    def law(self, i, j):
        return self.laws[(i, j)]


@dataclass(frozen=True)
class SemiMarkovModel:
    space: StateSpace
    chain: TransitionMatrix
    sojourns: SojournFamily
    alpha: float | None = None
    slowly_varying: str = "constant"

    def __post_init__(self):
        n = self.space.size
        if self.chain.p.shape != (n, n):
            raise ValueError("transition matrix does not match the state space size")
        heavy = sorted({law.tail_index for law in self._zero_exit_laws() if law.is_heavy})
        if self.alpha is None and heavy:
            if len(heavy) > 1:
                raise ValueError(f"inactive-state exits carry distinct tail indices {heavy}")
            object.__setattr__(self, "alpha", heavy[0])
        if self.alpha is not None and not (1.0 < self.alpha < 2.0):
            raise ValueError(f"tail index must satisfy 1 < alpha < 2, got {self.alpha}")

    @classmethod
    def from_state_laws(cls, states, p, by_state, slowly_varying="constant"):
        space = StateSpace(tuple(states))
        return cls(
            space=space,
            chain=TransitionMatrix(np.asarray(p, dtype=float)),
            sojourns=SojournFamily.from_state_laws(space.states, by_state),
            slowly_varying=slowly_varying,
        )

    def law(self, i, j) -> SojournLaw:
        return self.sojourns.law(i, j)

    def _zero_exit_laws(self):
        return [self.sojourns.laws[(0, j)] for j in self.space.states
                if (0, j) in self.sojourns.laws]

    def hurst(self):
        if self.alpha is None:
            raise ValueError("model has no heavy-tailed inactive state; Hurst exponent undefined")
        return hurst_from_alpha(self.alpha)

    def tail_scale(self, t):
        """Effective slowly varying factor L(t) = t^alpha * P{sojourn at 0 >= t}.

        Exact for the built-in heavy families once t exceeds their scale; used
        for the 1/(eps^(1-H) sqrt(N L(1/eps))) normalisation at large arguments.
        """
        if self.alpha is None:
            raise ValueError("tail scale undefined without a heavy-tailed inactive state")
        t = np.asarray(t, dtype=float)
        zero = self.space.index_of_zero
        p = self.chain.p
        h0 = np.zeros_like(t)
        for j_idx, j in enumerate(self.space.states):
            if p[zero, j_idx] > 0.0:
                h0 = h0 + p[zero, j_idx] * self.law(0, j).tail(t)
        return t**self.alpha * h0


@dataclass(frozen=True)
class StationaryLaw:
    """Every equilibrium quantity of the model, indexed like space.states."""

    states: tuple
    pi: np.ndarray
    nu: np.ndarray
    m: np.ndarray
    m_cond: np.ndarray
    eta: np.ndarray
    mu: float

    def of_state(self, vec, label):
        return vec[self.states.index(label)]


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-constant path: states[k] on [jump_times[k], jump_times[k+1])."""

    jump_times: np.ndarray
    states: np.ndarray
    horizon: float

    def __post_init__(self):
        jt = np.asarray(self.jump_times, dtype=float)
        st = np.asarray(self.states)
        if jt[0] != 0.0 or np.any(np.diff(jt) <= 0.0):
            raise ValueError("jump times must start at 0 and strictly increase")
        if jt.size != st.size:
            raise ValueError("one state per inter-jump segment required")
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "states", st)

    def state_at(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.jump_times, t, side="right") - 1
        return self.states[np.clip(idx, 0, self.states.size - 1)]

    def occupation_times(self, labels):
        """Total time spent in each label over [0, horizon]."""
        ends = np.append(self.jump_times[1:], self.horizon)
        ends = np.minimum(ends, self.horizon)
        durations = np.clip(ends - np.minimum(self.jump_times, self.horizon), 0.0, None)
        return np.array([durations[self.states == s].sum() for s in labels])

    def integral_at(self, t):
        """∫_0^t x_s ds, exact (closed form over segments)."""
        t = np.asarray(t, dtype=float)
        seg_end = np.append(self.jump_times[1:], max(self.horizon, self.jump_times[-1]))
        seg_int = self.states * (seg_end - self.jump_times)
        cum = np.concatenate([[0.0], np.cumsum(seg_int)])
        idx = np.clip(np.searchsorted(self.jump_times, t, side="right") - 1, 0, self.states.size - 1)
        return cum[idx] + self.states[idx] * (t - self.jump_times[idx])


# -- validation and equilibrium --------------------------------------------

def validate_model(model: SemiMarkovModel):
    """Return the list of assumption violations (empty when the model is admissible)."""
    out = list(model.chain.violations())
    states = model.space.states
    for i in states:
        for j in states:
            if model.chain.p[model.space.index(i), model.space.index(j)] <= 0.0:
                continue
            key = (i, j)
            if key not in model.sojourns.laws:
                out.append(f"missing sojourn law for transition {i} -> {j}")
                continue
            law = model.sojourns.laws[key]
            if not np.isfinite(law.mean) or law.mean <= 0.0:
                out.append(f"sojourn law for {i} -> {j} has non-finite mean")
            if i != 0 and law.is_heavy:
                out.append(
                    f"heavy-tailed sojourn on active exit {i} -> {j}: active states must be "
                    "thin-tailed relative to t^-(alpha+1)")
            if i == 0 and model.alpha is not None and not law.is_heavy:
                out.append(f"inactive-state exit 0 -> {j} is not heavy-tailed")
            if i == 0 and law.is_heavy and model.alpha is not None and law.tail_index != model.alpha:
                out.append(f"inactive-state exit 0 -> {j} has tail index {law.tail_index}, "
                           f"expected the common alpha = {model.alpha}")
    return out


def stationary_law(model: SemiMarkovModel) -> StationaryLaw:
    """Solve pi P = pi and assemble the occupation law, mean sojourns and recurrence times."""
    p = model.chain.p
    n = model.space.size
    a = np.vstack([p.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    residual = np.abs(pi @ p - pi).max()
    if residual > 1e-10 or np.any(pi <= 0.0):
        raise np.linalg.LinAlgError(
            f"stationary solve failed (residual {residual:.2e}); chain not irreducible?")
    states = model.space.states
    m_cond = np.zeros((n, n))
    for ii, i in enumerate(states):
        for jj, j in enumerate(states):
            if p[ii, jj] > 0.0:
                m_cond[ii, jj] = model.law(i, j).mean
    m = (p * m_cond).sum(axis=1)
    nu = pi * m / (pi @ m)
    eta = m / nu
    mu = float(np.array(states) @ nu)
    return StationaryLaw(states=states, pi=pi, nu=nu, m=m, m_cond=m_cond, eta=eta, mu=mu)


def expected_visits_before_hit(model: SemiMarkovModel, start, target):
    """Expected visits of the embedded chain to state 0 strictly before hitting `target`.

    Starting at xi_0 = start; a visit at time 0 is not counted.  Computed from
    the fundamental matrix of the chain with `target` absorbing.
    """
    p = model.chain.p
    states = list(model.space.states)
    t_idx = states.index(target)
    keep = [k for k in range(len(states)) if k != t_idx]
    sub = p[np.ix_(keep, keep)]
    fundamental = np.linalg.inv(np.eye(len(keep)) - sub)
    zero_col = keep.index(states.index(0)) if states.index(0) in keep else None
    if zero_col is None:
        # counting visits to the absorbing state itself: none before the hit
        return 0.0
    if start == target:
        # one step out of target, then absorb on return
        visits = 0.0
        for col, k in enumerate(keep):
            visits += p[t_idx, k] * fundamental[col, zero_col]
        return float(visits)
    s_row = keep.index(states.index(start))
    correction = 1.0 if start == 0 else 0.0
    return float(fundamental[s_row, zero_col] - correction)


def hurst_from_alpha(alpha):
    """Self-similarity exponent H = (3 - alpha)/2 for tail index alpha in (1,2)."""
    if not 1.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie strictly inside (1, 2), got {alpha}")
    return (3.0 - alpha) / 2.0


def theorem_condition_value(model: SemiMarkovModel, law: StationaryLaw | None = None):
    """The product mu * sum_k k m_k / eta_k^2 whose positivity the limit theorem requires.

    Returns (holds, product, mu, sum); `holds` uses a relative zero threshold so
    exactly-centered models (mu = 0 up to roundoff) are reported as violations.
    """
    law = law or stationary_law(model)
    k = np.array(law.states, dtype=float)
    s = float((k * law.m / law.eta**2).sum())
    product = law.mu * s
    scale = float((np.abs(k) * law.m / law.eta**2).sum()) + 1e-300
    holds = product > 1e-9 * scale
    return holds, product, law.mu, s


def limit_constant_c2(model: SemiMarkovModel):
    """Limit constant c^2 = [mu sum_j j (m_j/eta_j^2) E N_j] / [2H(1-H)(2H-1)].

    E N_j is the expected number of inactive-state visits between successive
    entrances to j.  Requires the positivity condition mu * sum_k k m_k/eta_k^2 > 0.
    """
    law = stationary_law(model)
    holds, product, mu, s = theorem_condition_value(model, law)
    if not holds:
        raise ValueError(
            f"limit-theorem condition violated: mu * sum_k k m_k/eta_k^2 = {product!r} "
            "must be strictly positive (fails e.g. for centered models with mu = 0)")
    h = model.hurst()
    total = 0.0
    for jj, j in enumerate(law.states):
        if j == 0:
            continue
        visits = expected_visits_before_hit(model, j, j)
        total += j * (law.m[jj] / law.eta[jj] ** 2) * visits
    c2 = mu * total / (2.0 * h * (1.0 - h) * (2.0 * h - 1.0))
    if not c2 > 0.0:
        raise ValueError(f"degenerate limit constant c^2 = {c2!r}")
    return c2


# -- samplers ---------------------------------------------------------------

def _draw_next_state(row_cum, u):
    return int(np.searchsorted(row_cum, u, side="right"))


def sample_path(model: SemiMarkovModel, initial_state, horizon, rng) -> Trajectory:
    """Simulate from a fixed initial state at time 0 until the horizon is covered."""
    if not horizon > 0.0:
        raise ValueError("horizon must be positive")
    states = model.space.states
    cum = np.cumsum(model.chain.p, axis=1)
    jump_times = [0.0]
    visited = [initial_state]
    t = 0.0
    cur = initial_state
    while t < horizon:
        nxt = states[_draw_next_state(cum[model.space.index(cur)], rng.random())]
        t += float(model.law(cur, nxt).sample(rng))
        if t >= horizon:
            break
        jump_times.append(t)
        visited.append(nxt)
        cur = nxt
    return Trajectory(np.asarray(jump_times), np.asarray(visited), horizon)


def _draw_stationary_start(model, law, rng):
    """Draw (xi_0, xi_1, T_1) from the equilibrium initial law.

    xi_0 ~ nu; given xi_0 = k, the next state has weight p_kj m_kj / m_k and the
    residual first sojourn follows the integrated-tail law of G(k, j, .).
    This reproduces the joint equilibrium density prop. to pi_k p_kj (1 - G(k,j,t)).
    """
    states = law.states
    k_idx = _draw_next_state(np.cumsum(law.nu), rng.random())
    k = states[k_idx]
    weights = model.chain.p[k_idx] * law.m_cond[k_idx]
    weights = weights / weights.sum()
    j_idx = _draw_next_state(np.cumsum(weights), rng.random())
    j = states[j_idx]
    t1 = float(model.law(k, j).equilibrium_sample(rng))
    return k, j, t1


def sample_stationary_path(model: SemiMarkovModel, horizon, rng,
                           law: StationaryLaw | None = None) -> Trajectory:
    """Simulate under the stationary law: equilibrium initial triple, then the kernel."""
    if not horizon > 0.0:
        raise ValueError("horizon must be positive")
    law = law or stationary_law(model)
    k, j, t1 = _draw_stationary_start(model, law, rng)
    if t1 >= horizon:
        return Trajectory(np.asarray([0.0]), np.asarray([k]), horizon)
    states = model.space.states
    cum = np.cumsum(model.chain.p, axis=1)
    jump_times = [0.0, t1]
    visited = [k, j]
    t = t1
    cur = j
    while t < horizon:
        nxt = states[_draw_next_state(cum[model.space.index(cur)], rng.random())]
        t += float(model.law(cur, nxt).sample(rng))
        if t >= horizon:
            break
        jump_times.append(t)
        visited.append(nxt)
        cur = nxt
    return Trajectory(np.asarray(jump_times), np.asarray(visited), horizon)


def states_at_times(model: SemiMarkovModel, times, n_replicates, rng,
                    initial_state=None, law: StationaryLaw | None = None):
    """Vectorized marginal sampler: state of independent replicates at fixed times.

    Stationary initialisation throughout; `initial_state` conditions xi_0.
    Returns an (n_replicates, len(times)) integer array of state labels.
    """
    times = np.asarray(times, dtype=float)
    horizon = float(times.max())
    law = law or stationary_law(model)
    states = np.array(model.space.states)
    n_states = states.size
    p = model.chain.p
    cum_rows = np.cumsum(p, axis=1)

    cur = np.empty(n_replicates, dtype=np.int64)     # state indices
    if initial_state is None:
        cur_labels = np.searchsorted(np.cumsum(law.nu), rng.random(n_replicates), side="right")
        cur[:] = cur_labels
    else:
        cur[:] = model.space.index(initial_state)

    # first transition from the equilibrium joint law
    nxt = np.empty_like(cur)
    t_next = np.empty(n_replicates)
    for k_idx in range(n_states):
        mask = cur == k_idx
        if not mask.any():
            continue
        w = p[k_idx] * law.m_cond[k_idx]
        w = w / w.sum()
        nxt[mask] = np.searchsorted(np.cumsum(w), rng.random(mask.sum()), side="right")
        for j_idx in range(n_states):
            sub = mask & (nxt == j_idx)
            if sub.any():
                lab_i, lab_j = states[k_idx], states[j_idx]
                t_next[sub] = model.law(lab_i, lab_j).equilibrium_sample(rng, int(sub.sum()))

    out = np.empty((n_replicates, times.size), dtype=np.int64)
    recorded = np.zeros(n_replicates, dtype=np.int64)  # how many times already recorded
    order = np.argsort(times)
    sorted_times = times[order]

    # event loop: advance all replicates jump by jump, recording marginals in between
    t_now = np.zeros(n_replicates)
    active = np.ones(n_replicates, dtype=bool)
    while active.any():
        # record all sampling times passed before the next jump
        for ti, t_q in enumerate(sorted_times):
            need = active & (recorded <= ti) & (t_next > t_q) & (t_now <= t_q)
            out[need, order[ti]] = states[cur[need]]
            recorded[need] = np.maximum(recorded[need], ti + 1)
        done = active & (t_next > horizon)
        active &= ~done
        if not active.any():
            break
        # jump
        t_now[active] = t_next[active]
        cur[active] = nxt[active]
        u = rng.random(int(active.sum()))
        new_next = np.empty(int(active.sum()), dtype=np.int64)
        idx_active = np.flatnonzero(active)
        for k_idx in range(n_states):
            mask = cur[idx_active] == k_idx
            if not mask.any():
                continue
            new_next[mask] = np.searchsorted(cum_rows[k_idx], u[mask], side="right")
        nxt[idx_active] = new_next
        dt_draw = np.empty(idx_active.size)
        for k_idx in range(n_states):
            for j_idx in range(n_states):
                sub = (cur[idx_active] == k_idx) & (nxt[idx_active] == j_idx)
                if sub.any():
                    lab_i, lab_j = states[k_idx], states[j_idx]
                    dt_draw[sub] = model.law(lab_i, lab_j).sample(rng, int(sub.sum()))
        t_next[idx_active] = t_now[idx_active] + dt_draw
    return out


def integrate_trajectory(traj: Trajectory, grid_times=None, weight: SamplePath | None = None):
    """Integrated path t -> ∫_0^t w_s x_s ds on a uniform grid.

    Without a weight the integral is exact (closed form over segments).  With a
    weight the trajectory is integrated exactly inside each grid cell and the
    weight enters by trapezoid quadrature on its own grid.
    """
    if weight is not None:
        if weight.horizon + 1e-12 < traj.horizon:
            raise ValueError("weight grid does not cover the trajectory horizon")
        times = weight.times
    else:
        if grid_times is None:
            raise ValueError("provide grid_times when no weight path is given")
        times = np.asarray(grid_times, dtype=float)
        if times.max() > traj.horizon + 1e-12:
            raise ValueError("grid extends beyond the trajectory horizon")
    base = traj.integral_at(np.clip(times, 0.0, traj.horizon))
    if weight is None:
        return SamplePath(dt=float(times[1] - times[0]), values=base)
    cell = np.diff(base)
    w_mid = 0.5 * (weight.values[:-1] + weight.values[1:])
    out = np.concatenate([[0.0], np.cumsum(w_mid * cell)])
    return SamplePath(dt=weight.dt, values=out)
