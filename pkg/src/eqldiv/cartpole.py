"""Cart-pole swing-up: native environment physics, random-rollout data
collection, forward-model glue, and random-shooting MPC.

The state is (x, x_dot, theta, theta_dot) with theta = 0 upright and
theta = pi hanging down; theta stays unwrapped for dynamics and is only
passed through cos() for costs and rewards. Actions are dimensionless in
[-1, 1] and scale to a force of up to 10 N on the cart.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import datasets
from .kernels import EVAL_THRESHOLD
from .network import forward as net_forward


@dataclass(frozen=True)
class CartPoleParams:
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    pole_half_length: float = 0.5
    gravity: float = 9.81
    force_scale: float = 10.0  # Newtons per unit of action
    action_bound: float = 1.0
    dt: float = 0.02

    @property
    def total_mass(self) -> float:
        return self.cart_mass + self.pole_mass


DEFAULT_PARAMS = CartPoleParams()


def dynamics(state, action, p: CartPoleParams = DEFAULT_PARAMS):
    """State derivative (x_dot, x_ddot, theta_dot, theta_ddot); vectorized
    over leading axes of state (..., 4) and action (...,)."""
    state = np.asarray(state, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    x_dot = state[..., 1]
    theta = state[..., 2]
    theta_dot = state[..., 3]
    force = p.force_scale * np.clip(action, -p.action_bound, p.action_bound)
    sin_t = np.sin(theta)
    cos_t = np.cos(theta)
    pml = p.pole_mass * p.pole_half_length
    temp = (force + pml * theta_dot ** 2 * sin_t) / p.total_mass
    theta_acc = (p.gravity * sin_t - cos_t * temp) / (
        p.pole_half_length * (4.0 / 3.0 - p.pole_mass * cos_t ** 2 / p.total_mass))
    x_acc = temp - pml * theta_acc * cos_t / p.total_mass
    return np.stack([x_dot, x_acc, theta_dot, theta_acc], axis=-1)


def env_step(state, action, p: CartPoleParams = DEFAULT_PARAMS, dt=None):
    """One Euler step of the swing-up environment."""
    if dt is None:
        dt = p.dt
    state = np.asarray(state, dtype=np.float64)
    return state + dt * dynamics(state, action, p)


def initial_state(rng, p: CartPoleParams = DEFAULT_PARAMS):
    """Episodes start hanging down: theta = pi plus a small perturbation."""
    s = np.zeros(4)
    s[2] = math.pi + rng.normal(0.0, 0.01)
    return s


def energy(state, p: CartPoleParams = DEFAULT_PARAMS) -> float:
    """Mechanical energy of the unforced system (uniform-rod pole)."""
    x_dot, theta, theta_dot = state[1], state[2], state[3]
    l = p.pole_half_length
    vcx = x_dot + l * theta_dot * math.cos(theta)
    vcy = -l * theta_dot * math.sin(theta)
    inertia = p.pole_mass * l * l / 3.0
    kinetic = (0.5 * p.cart_mass * x_dot ** 2
               + 0.5 * p.pole_mass * (vcx ** 2 + vcy ** 2)
               + 0.5 * inertia * theta_dot ** 2)
    potential = p.pole_mass * p.gravity * l * math.cos(theta)
    return kinetic + potential


def rollout(steps, action_sigma, rng, p: CartPoleParams = DEFAULT_PARAMS):
    """One random-action rollout; returns (states, actions, derivs) where
    derivs[t] = (states[t+1] - states[t]) / dt."""
    s = initial_state(rng, p)
    states = np.empty((steps, 4))
    actions = np.empty(steps)
    derivs = np.empty((steps, 4))
    for t in range(steps):
        a = float(np.clip(rng.normal(0.0, action_sigma), -p.action_bound,
                          p.action_bound))
        s_next = env_step(s, a, p)
        states[t] = s
        actions[t] = a
        derivs[t] = (s_next - s) / p.dt
        s = s_next
    return states, actions, derivs


def collect_rollouts(K, steps=1000, sigma_train=0.15, sigma_val=0.25, seed=0,
                     p: CartPoleParams = DEFAULT_PARAMS):
    """K-1 training rollouts plus one wider-noise validation rollout.

    Each transition is ((state, action), state-derivative); returns
    (train_inputs, train_outputs, val_inputs, val_outputs) with inputs of
    width 5.
    """
    if K < 2:
        raise ValueError("need K >= 2 (at least one training and one "
                         "validation rollout)")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xCA57]))
    xs, ys = [], []
    for _ in range(K - 1):
        states, actions, derivs = rollout(steps, sigma_train, rng, p)
        xs.append(np.column_stack([states, actions]))
        ys.append(derivs)
    states, actions, derivs = rollout(steps, sigma_val, rng, p)
    return (np.concatenate(xs), np.concatenate(ys),
            np.column_stack([states, actions]), derivs)


def rollouts_to_dataset(train_x, train_y, val_x, val_y, seed=0):
    """Package rollout transitions as a Dataset for the trainer.

    The wide-noise rollout doubles as extrapolation-validation data, so the
    forward model is selected on interpolation + extrapolation error.
    Penalty-epoch inputs are drawn from the observed state range expanded
    by a factor 2 about its center.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD474]))
    n = train_x.shape[0]
    perm = rng.permutation(n)
    n_val = n // 10
    lo = train_x.min(axis=0)
    hi = train_x.max(axis=0)
    center = (lo + hi) / 2.0
    half = np.maximum((hi - lo) / 2.0, 1e-3)
    train_bounds = np.column_stack([lo, hi])
    extra_bounds = np.column_stack([center - 2.0 * half, center + 2.0 * half])
    return datasets.Dataset(
        name="cartpole-forward", exprs=[], train_bounds=train_bounds,
        extra_bounds=extra_bounds, sigma=0.0, seed=seed,
        x_train=train_x[perm[n_val:]], y_train=train_y[perm[n_val:]],
        x_val=train_x[perm[:n_val]], y_val=train_y[perm[:n_val]],
        x_test=val_x, y_test=val_y, x_extra=val_x, y_extra=val_y,
        x_extra_val=val_x, y_extra_val=val_y,
    )


@dataclass(frozen=True)
class MpcConfig:
    n_rollouts: int = 1000
    horizon: int = 60
    action_sigma: float = 1.0
    cost_weights: tuple = (0.1, 0.1, 1.0, 0.02)
    dt: float = 0.02
    action_bound: float = 1.0

    def __post_init__(self):
        if self.n_rollouts < 1 or self.horizon < 1:
            raise ValueError("n_rollouts and horizon must be at least 1")


def stage_cost(states, weights=(0.1, 0.1, 1.0, 0.02)):
    """Distance from upright rest at the center: wx*x^2 + wv*xdot^2
    - wt*cos(theta) + ww*thetadot^2."""
    states = np.asarray(states, dtype=np.float64)
    wx, wv, wt, ww = weights
    return (wx * states[..., 0] ** 2 + wv * states[..., 1] ** 2
            - wt * np.cos(states[..., 2]) + ww * states[..., 3] ** 2)


def ground_truth_model(p: CartPoleParams = DEFAULT_PARAMS):
    """The environment's own derivative function as a forward model."""

    def model(SA):
        SA = np.asarray(SA, dtype=np.float64)
        return dynamics(SA[:, :4], SA[:, 4], p)

    return model


def network_model(net, theta=EVAL_THRESHOLD, wrap_angle=True):
    """Wrap a trained network as f(state+action) -> state derivative.

    The true dynamics are 2*pi-periodic in the pole angle but a model
    trained on one or two rollouts only ever saw angles near the hanging
    position, so with wrap_angle the angle column of every query is reduced
    modulo 2*pi into the band the training data covered. Without it, a
    controlled episode whose pole completes a few rotations asks the model
    about angles dozens of radians outside the training range, where its
    spurious non-periodic terms dominate.

    Non-finite rows pass through as-is; the MPC scores them +inf.
    """

    def model(SA):
        if wrap_angle:
            SA = np.array(SA, dtype=np.float64, copy=True)
            SA[:, 2] = np.mod(SA[:, 2], 2.0 * np.pi)
        with np.errstate(all="ignore"):
            out, _ = net_forward(net, SA, theta, check=False)
        return out

    return model


def mpc_action(model, state, cfg: MpcConfig, rng, return_info=False):
    """Random-shooting MPC: sample action sequences, simulate them with the
    model via Euler integration, accumulate the stage cost over the horizon
    and return the first action of the cheapest sequence."""
    state = np.asarray(state, dtype=np.float64)
    acts = rng.normal(0.0, cfg.action_sigma, size=(cfg.n_rollouts, cfg.horizon))
    np.clip(acts, -cfg.action_bound, cfg.action_bound, out=acts)
    states = np.broadcast_to(state, (cfg.n_rollouts, 4)).copy()
    costs = np.zeros(cfg.n_rollouts)
    dead = np.zeros(cfg.n_rollouts, dtype=bool)
    with np.errstate(all="ignore"):
        for h in range(cfg.horizon):
            SA = np.column_stack([states, acts[:, h]])
            d = model(SA)
            bad = ~np.isfinite(d).all(axis=1)
            if bad.any():
                dead |= bad
                d = np.where(np.isfinite(d), d, 0.0)
            states = states + cfg.dt * d
            step = stage_cost(states, cfg.cost_weights)
            bad_state = ~np.isfinite(step)
            if bad_state.any():
                dead |= bad_state
                step = np.where(np.isfinite(step), step, 0.0)
            costs += step
    costs[dead] = np.inf
    best = int(np.argmin(costs))
    action = float(acts[best, 0])
    if return_info:
        return action, costs, acts
    return action


def run_episode(model, steps=1000, cfg: MpcConfig = MpcConfig(), seed=0,
                p: CartPoleParams = DEFAULT_PARAMS, state_noise=0.0,
                action_noise=0.0, log=None):
    """Closed-loop control from the hanging start; returns the accumulated
    reward sum(cos(theta_t)).

    state_noise/action_noise add Gaussian disturbances to the observed
    state and the executed action (the robustness experiment). `log`, if
    given, receives one (t, state, action, cost, reward_so_far) tuple per
    step.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x3715]))
    state = initial_state(rng, p)
    reward = 0.0
    for t in range(steps):
        obs = state + rng.normal(0.0, state_noise, size=4) if state_noise else state
        a = mpc_action(model, obs, cfg, rng)
        executed = a + (rng.normal(0.0, action_noise) if action_noise else 0.0)
        executed = float(np.clip(executed, -p.action_bound, p.action_bound))
        state = env_step(state, executed, p)
        reward += math.cos(state[2])
        if log is not None:
            log(t, state.copy(), executed,
                float(stage_cost(state, cfg.cost_weights)), reward)
    return reward
