"""Latent linear dynamics with bilinear rewards.

The plant is

    r_t     = u_t' C x_t + z_t
    x_{t+1} = A x_t + B u_t + w_t,      x_0 = 0,

with Schur-stable A, Gaussian process noise of covariance sigma_w and
scalar reward noise of standard deviation sigma_z.
"""

import math
from dataclasses import dataclass, field

import numpy as np


class ConvergenceError(RuntimeError):
    """A diagnostic iteration failed to settle within its budget."""


def _as_matrix(x):
    a = np.array(x, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a 2-d array, got shape %s" % (a.shape,))
    a.setflags(write=False)
    return a


def spectral_radius(a):
    return float(np.max(np.abs(np.linalg.eigvals(a)))) if a.size else 0.0


def psd_sqrt(m, tol=1e-12):
    """Symmetric square root of a PSD matrix (eigenvalue clipping at -tol)."""
    w, q = np.linalg.eigh(np.asarray(m, dtype=float))
    if np.min(w) < -tol * max(1.0, np.max(np.abs(w))):
        raise ValueError("matrix is not positive semidefinite")
    return (q * np.sqrt(np.clip(w, 0.0, None))) @ q.T


@dataclass(frozen=True)
class SystemParams:
    """True plant matrices plus noise levels.

    a : (n, n) state transition, spectral radius < 1
    b : (n, p) action-to-state map
    c : (p, n) reward bilinear form
    sigma_w : (n, n) PSD process-noise covariance
    sigma_z : reward-noise standard deviation
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    sigma_w: np.ndarray
    sigma_z: float

    def __post_init__(self):
        object.__setattr__(self, "a", _as_matrix(self.a))
        object.__setattr__(self, "b", _as_matrix(self.b))
        object.__setattr__(self, "c", _as_matrix(self.c))
        object.__setattr__(self, "sigma_w", _as_matrix(self.sigma_w))
        object.__setattr__(self, "sigma_z", float(self.sigma_z))
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise ValueError("state transition must be square")
        if self.b.shape[0] != n:
            raise ValueError("action map must have %d rows" % n)
        p = self.b.shape[1]
        if self.c.shape != (p, n):
            raise ValueError("reward form must have shape (%d, %d)" % (p, n))
        if self.sigma_w.shape != (n, n):
            raise ValueError("process covariance must have shape (%d, %d)" % (n, n))
        if not np.allclose(self.sigma_w, self.sigma_w.T, atol=1e-10):
            raise ValueError("process covariance must be symmetric")
        if self.sigma_z < 0:
            raise ValueError("reward noise level must be nonnegative")
        rho = spectral_radius(self.a)
        if rho >= 1.0:
            raise ValueError("state transition is not Schur stable (radius %.4f)" % rho)
        # validates PSD as a side effect
        object.__setattr__(self, "_sqrt_w", psd_sqrt(self.sigma_w))

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def p(self):
        return self.b.shape[1]

    @property
    def rho(self):
        return spectral_radius(self.a)

    def noise_sqrt(self):
        """Symmetric square root of the process covariance."""
        return self._sqrt_w


@dataclass(frozen=True)
class Trajectory:
    """One simulated run over rounds t = 0..T (arrays have T+1 entries;
    process noise has T entries since x_{T+1} is never formed)."""

    actions: np.ndarray       # (T+1, p)
    states: np.ndarray        # (T+1, n)
    rewards: np.ndarray       # (T+1,)
    process_noise: np.ndarray  # (T, n)
    reward_noise: np.ndarray   # (T+1,)
    noise_seed: tuple = field(default=(0, 0))

    @property
    def horizon(self):
        return len(self.rewards) - 1


def sample_rademacher_actions(p, count, rng):
    """Draw `count` i.i.d. uniform sign vectors of dimension p."""
    if p < 1:
        raise ValueError("action dimension must be positive")
    if count < 0:
        raise ValueError("count must be nonnegative")
    return (2.0 * rng.integers(0, 2, size=(count, p)) - 1.0).astype(float)


def simulate_trajectory(params, actions, streams):
    """Run the plant under a fixed action sequence.

    `streams` supplies the process and reward noise generators; replaying
    with the same (params, actions, streams) is bit-identical.
    """
    actions = np.atleast_2d(np.asarray(actions, dtype=float))
    if actions.shape[1] != params.p:
        raise ValueError(
            "actions have dimension %d, system expects %d" % (actions.shape[1], params.p)
        )
    steps = actions.shape[0]
    n = params.n
    sqw = params.noise_sqrt()
    if np.any(sqw):
        w = streams.process().standard_normal((max(steps - 1, 0), n)) @ sqw.T
    else:
        w = np.zeros((max(steps - 1, 0), n))
    if params.sigma_z > 0:
        z = params.sigma_z * streams.reward().standard_normal(steps)
    else:
        z = np.zeros(steps)

    states = np.zeros((steps, n))
    rewards = np.empty(steps)
    x = np.zeros(n)
    for t in range(steps):
        states[t] = x
        rewards[t] = actions[t] @ (params.c @ x) + z[t]
        if t + 1 < steps:
            x = params.a @ x + params.b @ actions[t] + w[t]
    return Trajectory(
        actions=actions,
        states=states,
        rewards=rewards,
        process_noise=w,
        reward_noise=z,
        noise_seed=getattr(streams, "key", (0, 0)),
    )


@dataclass(frozen=True)
class StabilityProfile:
    """Geometric-decay certificate for the state transition: the smallest
    constant phi with ||A^k|| <= phi * rho^k over the checked range."""

    rho_a: float
    rho: float
    phi: float
    kappa: float
    k_checked: int = 0


def stability_profile(params, rho, k_max=1000):
    """Measure the power-decay envelope of the state transition matrix.

    Walks the ratio ||A^k|| / rho^k and reports the running maximum
    (k = 0 included, so phi >= 1). Submultiplicativity makes the maximum
    final as soon as one ratio drops to 1 or below: any later power
    factors through that one, so no later ratio can exceed the maximum
    seen so far.
    """
    a = params.a if isinstance(params, SystemParams) else _as_matrix(params)
    rho_a = spectral_radius(a)
    if not rho_a < rho < 1.0:
        raise ValueError("decay rate must lie in (%.6f, 1)" % rho_a)
    scaled = a / rho            # norm of scaled^k equals the ratio at k
    power = np.eye(a.shape[0])
    phi = 1.0
    for k in range(1, k_max + 1):
        power = power @ scaled
        ratio = np.linalg.norm(power, 2)
        phi = max(phi, ratio)
        if ratio <= 1.0:
            return StabilityProfile(rho_a, float(rho), float(phi), _kappa(params), k)
    raise ConvergenceError("power ratios did not settle within %d steps" % k_max)


def _kappa(params):
    if isinstance(params, SystemParams):
        return float(max(np.linalg.norm(params.b, 2), np.linalg.norm(params.c, 2)))
    return float("nan")


# ---------------------------------------------------------------------------
# Plain-text system config (key = value; matrix rows separated by ';').

def _format_matrix(m):
    return " ; ".join(" ".join(repr(float(v)) for v in row) for row in np.atleast_2d(m))


def _parse_matrix(text):
    rows = [r.strip() for r in text.split(";") if r.strip()]
    return np.array([[float(v) for v in r.split()] for r in rows])


def save_system(params, path):
    """Write a system to the plain-text config format (see load_system)."""
    lines = [
        "# etcbandit system config v1",
        "n = %d" % params.n,
        "p = %d" % params.p,
        "a = %s" % _format_matrix(params.a),
        "b = %s" % _format_matrix(params.b),
        "c = %s" % _format_matrix(params.c),
    ]
    diag = np.diag(np.diag(params.sigma_w))
    if np.allclose(params.sigma_w, diag):
        lines.append("sigma_w = diag %s" % " ".join(repr(float(v)) for v in np.diag(params.sigma_w)))
    else:
        lines.append("sigma_w = %s" % _format_matrix(params.sigma_w))
    lines.append("sigma_z = %s" % repr(float(params.sigma_z)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_system(path):
    """Read a system config.

    Schema (one `key = value` per line, '#' comments ignored):
        n, p      dimensions (optional, checked when present)
        a         n*n matrix, row-major, rows separated by ';'
        b         n*p matrix
        c         p*n matrix
        sigma_w   either 'diag v1 ... vn' or a full n*n matrix
        sigma_z   scalar
    """
    fields = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError("malformed config line: %r" % raw.strip())
            key, value = line.split("=", 1)
            fields[key.strip().lower()] = value.strip()
    for key in ("a", "b", "c", "sigma_z"):
        if key not in fields:
            raise ValueError("system config is missing %r" % key)
    a = _parse_matrix(fields["a"])
    b = _parse_matrix(fields["b"])
    c = _parse_matrix(fields["c"])
    sw = fields.get("sigma_w", "diag " + " ".join(["0"] * a.shape[0]))
    if sw.startswith("diag"):
        sigma_w = np.diag([float(v) for v in sw[4:].split()])
    else:
        sigma_w = _parse_matrix(sw)
    params = SystemParams(a, b, c, sigma_w, float(fields["sigma_z"]))
    for key, expect in (("n", params.n), ("p", params.p)):
        if key in fields and int(fields[key]) != expect:
            raise ValueError("config declares %s=%s but matrices imply %d" % (key, fields[key], expect))
    return params
