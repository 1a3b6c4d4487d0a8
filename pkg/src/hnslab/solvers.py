"""Time integration of the three torus models and their exact linear theory.

Models:

* NS            du/dt - Lap u + P (u.grad)u = 0,  div u = 0
* HNS_EPS       eps u_tt + u_t - Lap u + P (u.grad)u = 0,  div u = 0
* HNS_EPS_ALPHA eps u_tt + u_t - Lap u = -(u.grad)u + (1/alpha) grad(div u)

The Helmholtz parts of the penalized model decouple linearly: the
divergence-free part sees a damped wave with speed c2 = 1/sqrt(eps), the
irrotational part one with speed c1 = sqrt((alpha+1)/(alpha eps)).  The
production stepper solves each per-mode 2x2 linear block exactly by its
characteristic roots and couples the nonlinearity with a second-order
exponential (ETD2) rule, so there is no stability restriction from c1 and
alpha sweeps down to 1e-4 stay cheap.  RK4 on the full right-hand side is kept
as a cross-check scheme with the usual CFL limits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import (
    GridSpec,
    InvalidFieldError,
    SpectralField,
    dealias,
    divergence,
    gradient,
    helmholtz_project,
    k_squared,
    laplacian,
    partial_derivative,
    sobolev_norm,
    spectral_product,
)

__all__ = [
    "Model",
    "Scheme",
    "ModelParams",
    "SolverState",
    "StepperConfig",
    "BlowUpError",
    "StabilityError",
    "ContractionFailureError",
    "NoConvergenceError",
    "nonlinear_term",
    "linear_propagator",
    "evolve_linear",
    "step",
    "run_simulation",
    "SimulationResult",
    "recover_pressure",
    "picard_local_solve",
    "picard_time_bound",
    "PicardResult",
]

BLOWUP_FACTOR = 1e12


class Model(str, enum.Enum):
    NS = "ns"
    HNS_EPS = "hns_eps"
    HNS_EPS_ALPHA = "hns_eps_alpha"


class Scheme(str, enum.Enum):
    EXP_LINEAR_RK2 = "exp_linear_rk2"
    RK4_FULL = "rk4_full"


class BlowUpError(RuntimeError):
    def __init__(self, time: float, message: str = "", partial=None):
        super().__init__(message or f"solution blew up at t = {time:.6g}")
        self.time = time
        self.partial = partial


class StabilityError(ValueError):
    """dt violates the scheme's stability bound."""


class ContractionFailureError(RuntimeError):
    def __init__(self, trace):
        super().__init__("Picard iteration distance increased for 3 consecutive iterations")
        self.trace = trace


class NoConvergenceError(RuntimeError):
    def __init__(self, trace):
        super().__init__("Picard iteration hit max_iter without converging")
        self.trace = trace


@dataclass(frozen=True)
class ModelParams:
    """Model selection with relaxation eps, penalty alpha, regularity indices."""

    model: Model
    epsilon: float | None = None
    alpha: float | None = None
    viscosity: float = 1.0
    s: float = 0.5
    delta: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        if self.viscosity != 1.0:
            raise ValueError("viscosity is fixed at 1")
        if not (0 < self.s < 1 and 0 < self.delta < 1):
            raise ValueError("regularity indices s, delta must lie in (0, 1)")
        if self.model is Model.NS:
            if self.epsilon is not None or self.alpha is not None:
                raise ValueError("NS takes neither epsilon nor alpha")
        elif self.model is Model.HNS_EPS:
            if self.epsilon is None or self.epsilon <= 0:
                raise ValueError("HNS_EPS requires epsilon > 0")
            if self.alpha is not None:
                raise ValueError("HNS_EPS takes no alpha")
        else:
            if self.epsilon is None or self.epsilon <= 0:
                raise ValueError("HNS_EPS_ALPHA requires epsilon > 0")
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("HNS_EPS_ALPHA requires alpha > 0")

    @property
    def is_hyperbolic(self) -> bool:
        return self.model is not Model.NS

    @property
    def c1(self) -> float:
        """Fast (irrotational-branch) wave speed sqrt((alpha+1)/(alpha eps))."""
        if self.model is not Model.HNS_EPS_ALPHA:
            raise ValueError("c1 is defined only for the penalized model")
        return math.sqrt((self.alpha + 1.0) / (self.alpha * self.epsilon))

    @property
    def c2(self) -> float:
        """Divergence-free-branch wave speed 1/sqrt(eps)."""
        if not self.is_hyperbolic:
            raise ValueError("c2 is defined only for hyperbolic models")
        return 1.0 / math.sqrt(self.epsilon)


@dataclass
class SolverState:
    """Velocity, its time derivative (absent for NS), and the current time."""

    u: SpectralField
    u_t: SpectralField | None
    time: float = 0.0

    def copy(self) -> "SolverState":
        return SolverState(self.u.copy(), None if self.u_t is None else self.u_t.copy(), self.time)


@dataclass
class StepperConfig:
    dt: float
    t_end: float
    scheme: Scheme = Scheme.EXP_LINEAR_RK2
    snapshot_every: int = 1

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")

    def check_stability(self, params: ModelParams, grid: GridSpec):
        """Scheme-specific stability precondition.

        The exponential scheme treats the linear operator exactly and has no
        linear restriction.  RK4 on the full system must keep every linear
        eigenvalue inside its stability region (|z| <~ 2.78 on the axes).
        """
        if self.scheme is Scheme.EXP_LINEAR_RK2:
            return
        kmax = grid.k_max_dealiased
        if params.model is Model.NS:
            rate = kmax**2
        else:
            speed = params.c1 if params.model is Model.HNS_EPS_ALPHA else params.c2
            rate = max(speed * kmax, 1.0 / params.epsilon, kmax**2 * params.epsilon)
        if self.dt * rate > 2.78:
            raise StabilityError(
                f"RK4_FULL unstable: dt*rate = {self.dt * rate:.3g} > 2.78 "
                f"(dt = {self.dt:.3g}, rate = {rate:.3g})"
            )


# ---------------------------------------------------------------------------
# nonlinearity
# ---------------------------------------------------------------------------


def nonlinear_term(u: SpectralField, form: str = "identity") -> SpectralField:
    """Forcing f(u) = -(u.grad)u, pseudo-spectral and dealiased.

    The default conservative identity sum_i d_i(u_i u) - (div u) u is valid for
    fields with nonzero divergence; the direct convective form is kept for the
    dual-formulation cross-check (they agree when div u = 0).
    """
    grid = u.grid
    if u.ncomp != grid.dim:
        raise InvalidFieldError("nonlinear term expects a full velocity field")
    if form == "identity":
        out = SpectralField.zeros(grid, grid.dim)
        for i in range(grid.dim):
            out = out + partial_derivative(spectral_product(u.component(i), u), i)
        out = out - spectral_product(divergence(u), u)
        return -1.0 * out
    if form == "convective":
        out = SpectralField.zeros(grid, grid.dim)
        for i in range(grid.dim):
            out = out + spectral_product(u.component(i), partial_derivative(u, i))
        return -1.0 * out
    raise ValueError(f"unknown form {form!r}")


# ---------------------------------------------------------------------------
# exact per-mode linear theory
# ---------------------------------------------------------------------------


def _mode_functions(t: float, eps: float, gamma: float, c2k2: np.ndarray):
    """Initial-value propagators of  l'' + (gamma/eps) l' + c2k2 l = 0.

    Returns (A, B, A', B') evaluated at t as arrays over modes, where the
    solution with data (a, b) is a A + b B.  Stable for overdamped, critically
    damped, and oscillatory modes alike: everything is expressed through
    exp((mu - b) t) and exp(-(mu + b) t) with Re mu <= b, so no overflow.
    """
    b = gamma / (2.0 * eps) if gamma else 0.0
    disc = np.asarray(b * b - c2k2, dtype=float)
    A = np.empty_like(disc)
    B = np.empty_like(disc)
    Ec = np.empty_like(disc)

    osc = disc < 0
    if np.any(osc):
        om = np.sqrt(-disc[osc])
        damp = math.exp(-b * t)
        Ec[osc] = damp * np.cos(om * t)
        with np.errstate(invalid="ignore"):
            B[osc] = damp * np.where(om * t > 1e-12, np.sin(om * t) / np.where(om > 0, om, 1.0), t)
    mono = ~osc
    if np.any(mono):
        mu = np.sqrt(disc[mono])
        ep = np.exp((mu - b) * t)
        em = np.exp(-(mu + b) * t)
        Ec[mono] = 0.5 * (ep + em)
        small = mu * t < 1e-6
        Bm = np.empty_like(mu)
        Bm[small] = t * np.exp(-b * t) * (1.0 + (mu[small] * t) ** 2 / 6.0)
        big = ~small
        Bm[big] = (ep[big] - em[big]) / (2.0 * mu[big])
        B[mono] = Bm
    A = Ec + b * B
    Ap = -c2k2 * B
    Bp = Ec - b * B
    return A, B, Ap, Bp


def _branch_speeds(params: ModelParams) -> tuple[float, float]:
    """(P-branch speed, Q-branch speed); Q equals P unless penalized."""
    cp = params.c2
    cq = params.c1 if params.model is Model.HNS_EPS_ALPHA else cp
    return cp, cq


class LinearPropagator:
    """Undamped wave propagators A(t), B(t) of the Duhamel formula.

    A(t) = cos(c t Lambda) and B(t) = sin(c t Lambda)/(c Lambda) per Helmholtz
    branch, with the branch speeds of the model; at k = 0, A = 1 and B = t.
    `apply` maps (u0, u1) to A(t) u0 + B(t) u1; `apply_dt` gives its time
    derivative A'(t) u0 + B'(t) u1.
    """

    def __init__(self, params: ModelParams, t: float, grid: GridSpec):
        if not params.is_hyperbolic:
            raise ValueError("linear propagators are defined for the hyperbolic models")
        self.params = params
        self.grid = grid
        self.t = t
        cp, cq = _branch_speeds(params)
        k2 = k_squared(grid)
        self.P = _mode_functions(t, params.epsilon, 0.0, cp * cp * k2)
        self.Q = _mode_functions(t, params.epsilon, 0.0, cq * cq * k2)
        zero = (0,) * grid.dim
        for fam in (self.P, self.Q):
            fam[0][zero] = 1.0  # A -> 1
            fam[1][zero] = t  # B -> t, the Lambda -> 0 limit of sin(c t L)/(c L)
            fam[2][zero] = 0.0
            fam[3][zero] = 1.0

    def _split(self, F: SpectralField):
        q = helmholtz_project(F, "Q")
        return F - q, q

    def _combine(self, F: SpectralField, idx: int) -> SpectralField:
        p, q = self._split(F)
        return p.multiplied(self.P[idx]) + q.multiplied(self.Q[idx])

    def apply_A(self, F: SpectralField) -> SpectralField:
        return self._combine(F, 0)

    def apply_B(self, F: SpectralField) -> SpectralField:
        return self._combine(F, 1)

    def apply_A_dt(self, F: SpectralField) -> SpectralField:
        return self._combine(F, 2)

    def apply_B_dt(self, F: SpectralField) -> SpectralField:
        return self._combine(F, 3)


def linear_propagator(params: ModelParams, t: float, grid: GridSpec) -> LinearPropagator:
    return LinearPropagator(params, t, grid)


def evolve_linear(
    u0: SpectralField,
    u1: SpectralField,
    params: ModelParams,
    t: float,
    damping: bool = True,
) -> SolverState:
    """Exact solution of the linear (f = 0) model at time t.

    With damping the per-mode characteristic roots of
    eps l'' + l' + eps c^2 k^2 l = 0 are used; without damping this reduces to
    the pure wave propagators (used by the front-speed experiments).
    """
    grid = u0.grid
    gamma = 1.0 if damping else 0.0
    cp, cq = _branch_speeds(params)
    k2 = k_squared(grid)
    out_u = np.zeros_like(u0.coeffs)
    out_v = np.zeros_like(u0.coeffs)
    for which, c in (("P", cp), ("Q", cq)):
        pu = helmholtz_project(u0, which)
        pv = helmholtz_project(u1, which)
        A, B, Ap, Bp = _mode_functions(t, params.epsilon, gamma, c * c * k2)
        out_u += A * pu.coeffs + B * pv.coeffs
        out_v += Ap * pu.coeffs + Bp * pv.coeffs
    return SolverState(
        SpectralField(grid, out_u, is_mean_zero=True),
        SpectralField(grid, out_v, is_mean_zero=True),
        t,
    )


# ---------------------------------------------------------------------------
# exact-linear exponential stepper (ETD2)
# ---------------------------------------------------------------------------


class _Etd2Hyperbolic:
    """Per-branch exact 2x2 propagator plus ETD2 source integrals.

    For y' = L y + (0, g)^T with L = [[0, 1], [-c^2 k^2, -1/eps]] the update is

        a      = E y_n + J0 g_n
        y_next = a + K (g(a) - g_n)

    where E = exp(L dt), J0 = Int_0^dt exp(L tau) dtau (second column) and
    K = J0 - J1/dt with J1 = Int_0^dt tau exp(L tau) dtau.  The integrals come
    from L^-1 algebra on the propagator entries, so the kernel integration is
    exact and the oscillatory branch costs nothing in stability.
    """

    def __init__(self, params: ModelParams, grid: GridSpec, dt: float):
        self.grid = grid
        self.eps = params.epsilon
        cp, cq = _branch_speeds(params)
        k2 = k_squared(grid)
        self.branches = {
            "P": self._build(dt, params.epsilon, cp * cp * k2),
            "Q": self._build(dt, params.epsilon, cq * cq * k2),
        }
        self.two_branch = params.model is Model.HNS_EPS_ALPHA

    def _build(self, dt, eps, c2k2):
        A, B, Ap, Bp = _mode_functions(dt, eps, 1.0, c2k2)
        ge = 1.0 / eps
        safe = np.where(c2k2 > 0, c2k2, 1.0)
        j0u = np.where(c2k2 > 0, (1.0 - Bp - ge * B) / safe, 0.0)
        j0v = np.where(c2k2 > 0, B, 0.0)
        l1u = (-ge * B - Bp) / safe
        l2u = (-ge * j0u - j0v) / safe
        j1u = np.where(c2k2 > 0, dt * l1u - l2u, 0.0)
        j1v = np.where(c2k2 > 0, dt * B - j0u, 0.0)
        ku = j0u - j1u / dt
        kv = j0v - j1v / dt
        zero = (0,) * (A.ndim)
        A = A.copy()
        B = B.copy()
        Ap = Ap.copy()
        Bp = Bp.copy()
        A[zero], B[zero], Ap[zero], Bp[zero] = 1.0, 0.0, 0.0, 1.0
        return (A, B, Ap, Bp, j0u, j0v, ku, kv)

    def _per_branch(self, u, v, g, mats):
        A, B, Ap, Bp, j0u, j0v, ku, kv = mats
        au = A * u + B * v + j0u * g
        av = Ap * u + Bp * v + j0v * g
        return au, av

    def predict(self, u: SpectralField, v: SpectralField, g: SpectralField):
        if self.two_branch:
            uq = helmholtz_project(u, "Q")
            vq = helmholtz_project(v, "Q")
            gq = helmholtz_project(g, "Q")
            up, vp, gp = u - uq, v - vq, g - gq
            au_p, av_p = self._per_branch(up.coeffs, vp.coeffs, gp.coeffs, self.branches["P"])
            au_q, av_q = self._per_branch(uq.coeffs, vq.coeffs, gq.coeffs, self.branches["Q"])
            au, av = au_p + au_q, av_p + av_q
        else:
            au, av = self._per_branch(u.coeffs, v.coeffs, g.coeffs, self.branches["P"])
        grid = self.grid
        return (
            SpectralField(grid, au, is_mean_zero=True),
            SpectralField(grid, av, is_mean_zero=True),
        )

    def correct(self, au, av, dg: SpectralField):
        if self.two_branch:
            dgq = helmholtz_project(dg, "Q")
            dgp = dg - dgq
            ku_p, kv_p = self.branches["P"][6], self.branches["P"][7]
            ku_q, kv_q = self.branches["Q"][6], self.branches["Q"][7]
            du = ku_p * dgp.coeffs + ku_q * dgq.coeffs
            dv = kv_p * dgp.coeffs + kv_q * dgq.coeffs
        else:
            ku, kv = self.branches["P"][6], self.branches["P"][7]
            du, dv = ku * dg.coeffs, kv * dg.coeffs
        grid = self.grid
        return (
            SpectralField(grid, au.coeffs + du, is_mean_zero=True),
            SpectralField(grid, av.coeffs + dv, is_mean_zero=True),
        )


_STEPPER_CACHE: dict[tuple, object] = {}


def _hyperbolic_stepper(params: ModelParams, grid: GridSpec, dt: float) -> _Etd2Hyperbolic:
    key = (params.model, params.epsilon, params.alpha, grid, dt)
    if key not in _STEPPER_CACHE:
        if len(_STEPPER_CACHE) > 16:
            _STEPPER_CACHE.clear()
        _STEPPER_CACHE[key] = _Etd2Hyperbolic(params, grid, dt)
    return _STEPPER_CACHE[key]


def _phi2(z: np.ndarray) -> np.ndarray:
    """(e^z - 1 - z)/z^2, series-switched for small |z|."""
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    zs = z[small]
    out[small] = 0.5 + zs / 6 + zs**2 / 24 + zs**3 / 120 + zs**4 / 720 + zs**5 / 5040
    zb = z[~small]
    out[~small] = (np.expm1(zb) - zb) / (zb * zb)
    return out


@dataclass
class _Etd2Heat:
    """Scalar ETD2 tables for the NS mode ODE u' = -k^2 u + g."""

    E: np.ndarray
    J0: np.ndarray
    K: np.ndarray

    @classmethod
    def build(cls, grid: GridSpec, dt: float) -> "_Etd2Heat":
        k2 = k_squared(grid)
        z = -k2 * dt
        E = np.exp(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            J0 = np.where(k2 > 0, -np.expm1(z) / np.where(k2 > 0, k2, 1.0), dt)
        K = dt * _phi2(z)
        return cls(E, J0, K)


def _heat_stepper(grid: GridSpec, dt: float) -> _Etd2Heat:
    key = ("heat", grid, dt)
    if key not in _STEPPER_CACHE:
        if len(_STEPPER_CACHE) > 16:
            _STEPPER_CACHE.clear()
        _STEPPER_CACHE[key] = _Etd2Heat.build(grid, dt)
    return _STEPPER_CACHE[key]


def _forcing(u: SpectralField, params: ModelParams, nonlinearity: bool) -> SpectralField:
    """Model forcing: f(u), Leray-projected for the constrained models.

    The mean of f is discarded: evolved fields are kept mean-zero, so the
    small net force the compressible nonlinearity would exert on the torus
    (absent on the whole space) is not allowed to drive a mean flow.
    """
    if not nonlinearity:
        return SpectralField.zeros(u.grid, u.grid.dim)
    f = nonlinear_term(u)
    if params.model in (Model.NS, Model.HNS_EPS):
        f = helmholtz_project(f, "P")
    return f.remove_mean()


def _penalty_gradient(u: SpectralField, alpha: float) -> SpectralField:
    return (1.0 / alpha) * gradient(divergence(u))


def _rhs_full(state: SolverState, params: ModelParams, nonlinearity: bool):
    """Right-hand side for RK4_FULL as a first-order system."""
    u = state.u
    if params.model is Model.NS:
        du = laplacian(u) + _forcing(u, params, nonlinearity)
        return du, None
    v = state.u_t
    acc = laplacian(u) - v + _forcing(u, params, nonlinearity)
    if params.model is Model.HNS_EPS_ALPHA:
        acc = acc + _penalty_gradient(u, params.alpha)
    return v, (1.0 / params.epsilon) * acc


def _check_blowup(u: SpectralField, initial_max: float, time: float, partial=None):
    m = float(np.max(np.abs(u.coeffs)))
    if not np.isfinite(m) or m > BLOWUP_FACTOR * max(initial_max, 1e-30):
        raise BlowUpError(time, partial=partial)


def step(
    state: SolverState,
    params: ModelParams,
    cfg: StepperConfig,
    nonlinearity: bool = True,
) -> SolverState:
    """Advance one dt with the configured scheme."""
    grid = state.u.grid
    dt = cfg.dt
    if cfg.scheme is Scheme.RK4_FULL:
        return _step_rk4(state, params, cfg, nonlinearity)
    if params.model is Model.NS:
        tab = _heat_stepper(grid, dt)
        g0 = _forcing(state.u, params, nonlinearity)
        a = SpectralField(grid, tab.E * state.u.coeffs + tab.J0 * g0.coeffs, is_mean_zero=True)
        g1 = _forcing(a, params, nonlinearity)
        unew = SpectralField(grid, a.coeffs + tab.K * (g1.coeffs - g0.coeffs), is_mean_zero=True)
        return SolverState(unew, None, state.time + dt)
    eng = _hyperbolic_stepper(params, grid, dt)
    scale = 1.0 / params.epsilon
    g0 = scale * _forcing(state.u, params, nonlinearity)
    au, av = eng.predict(state.u, state.u_t, g0)
    g1 = scale * _forcing(au, params, nonlinearity)
    unew, vnew = eng.correct(au, av, g1 - g0)
    return SolverState(unew, vnew, state.time + dt)


def _step_rk4(state, params, cfg, nonlinearity):
    dt = cfg.dt

    def rhs(st):
        return _rhs_full(st, params, nonlinearity)

    def advance(st, k, factor):
        du, dv = k
        u = st.u + factor * du
        v = None if dv is None else st.u_t + factor * dv
        return SolverState(u, v, st.time)

    k1 = rhs(state)
    k2 = rhs(advance(state, k1, dt / 2))
    k3 = rhs(advance(state, k2, dt / 2))
    k4 = rhs(advance(state, k3, dt))
    u = state.u + (dt / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    if k1[1] is None:
        v = None
    else:
        v = state.u_t + (dt / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    return SolverState(u, v, state.time + dt)


@dataclass
class SimulationResult:
    times: list[float]
    probes: dict[str, list[float]]
    final: SolverState
    states: list[SolverState] = field(default_factory=list)


def run_simulation(
    u0: SpectralField,
    u1: SpectralField | None,
    params: ModelParams,
    cfg: StepperConfig,
    probes: dict | None = None,
    nonlinearity: bool = True,
    keep_states: bool = False,
) -> SimulationResult:
    """Step to t_end, evaluating probes every snapshot_every steps.

    Probes are pure functions state -> float.  Deterministic given inputs.
    A blow-up raises BlowUpError with the partial series attached.
    """
    grid = u0.grid
    cfg.check_stability(params, grid)
    probes = probes or {}
    if params.is_hyperbolic and u1 is None:
        u1 = SpectralField.zeros(grid, grid.dim)
    u0 = dealias(u0)
    u1 = None if params.model is Model.NS else dealias(u1)
    if params.model in (Model.NS, Model.HNS_EPS):
        # the constrained models live on divergence-free fields
        u0 = helmholtz_project(u0, "P")
        if u1 is not None:
            u1 = helmholtz_project(u1, "P")
    state = SolverState(u0, u1, 0.0)
    initial_max = float(np.max(np.abs(state.u.coeffs)))
    n_steps = int(round(cfg.t_end / cfg.dt))
    if abs(n_steps * cfg.dt - cfg.t_end) > 1e-9 * max(cfg.t_end, cfg.dt):
        raise ValueError("t_end must be an integer multiple of dt")

    result = SimulationResult(times=[], probes={k: [] for k in probes}, final=state)

    def record(st):
        result.times.append(st.time)
        for name, fn in probes.items():
            result.probes[name].append(float(fn(st)))
        if keep_states:
            result.states.append(st.copy())

    record(state)
    for i in range(n_steps):
        state = step(state, params, cfg, nonlinearity=nonlinearity)
        try:
            _check_blowup(state.u, initial_max, state.time, partial=result)
        except BlowUpError:
            result.final = state
            raise
        if (i + 1) % cfg.snapshot_every == 0 or i + 1 == n_steps:
            record(state)
    result.final = state
    return result


def recover_pressure(u: SpectralField) -> SpectralField:
    """p = -Lap^{-1} div((u.grad)u), zero-mean; grad p = Q f(u) for div-free u."""
    if not u.is_mean_zero:
        raise InvalidFieldError("pressure recovery expects a mean-zero field")
    conv = -1.0 * nonlinear_term(u)  # (u.grad)u
    rhs = divergence(conv)
    k2 = k_squared(u.grid)
    inv = np.zeros_like(k2)
    nz = k2 > 0
    inv[nz] = 1.0 / k2[nz]
    return SpectralField(u.grid, rhs.coeffs * inv, is_mean_zero=True)


# ---------------------------------------------------------------------------
# Picard local solver
# ---------------------------------------------------------------------------


def xt_norm(us: list[SpectralField], vs: list[SpectralField], n_over_2_delta: float) -> float:
    """sup-in-time H^(n/2+d) + H^(n/2+d-1) of u plus H^(n/2+d-1) of du/dt."""
    hi = max(sobolev_norm(u, n_over_2_delta) for u in us)
    lo = max(sobolev_norm(u, n_over_2_delta - 1.0) for u in us)
    vt = max(sobolev_norm(v, n_over_2_delta - 1.0) for v in vs)
    return hi + lo + vt


@dataclass
class PicardResult:
    state: SolverState
    xt_norms: list[float]
    distances: list[float]
    iterations: int


def picard_time_bound(
    u0: SpectralField, u1: SpectralField, params: ModelParams, safety: float = 0.5
) -> float:
    """Largest horizon on which the Duhamel map is expected to contract.

    The damping source enters the fixed-point map through kernels carrying a
    1/eps factor, so the contraction window scales like eps divided by the
    data bracket of the local-existence estimate (all four A/B data terms).
    """
    eps = params.epsilon
    alpha = params.alpha if params.model is Model.HNS_EPS_ALPHA else math.inf
    sig = u0.grid.dim / 2.0 + params.delta
    root_ratio = math.sqrt((alpha + 1.0) / alpha) if math.isfinite(alpha) else 1.0
    bracket = (
        (2.0 + (1.0 + root_ratio) / math.sqrt(eps)) * sobolev_norm(u0, sig)
        + 2.0 * sobolev_norm(u0, sig - 1.0)
        + (2.0 + math.sqrt(eps)) * sobolev_norm(u1, sig - 1.0)
    )
    return safety * eps / (1.0 + bracket)


def picard_local_solve(
    u0: SpectralField,
    u1: SpectralField,
    params: ModelParams,
    T: float,
    max_iter: int = 40,
    tol: float = 1e-10,
    n_mesh: int = 64,
    nonlinearity: bool = True,
    enforce_time_bound: bool = True,
) -> PicardResult:
    """Fixed-point iteration of the Duhamel map on a uniform time mesh.

    phi(u)(t) = A(t) u0 + B(t) u1 + (1/eps) Int_0^t B(t-s) (f(u) - du/dt)(s) ds

    with the undamped branch propagators A, B and composite-trapezoid
    quadrature for the integral.  Iteration stops when successive iterates are
    closer than tol in the X_T norm; three consecutive distance increases
    raise ContractionFailureError, exhaustion raises NoConvergenceError.
    """
    if not params.is_hyperbolic:
        raise ValueError("the Picard solver addresses the hyperbolic models")
    if not (u0.is_mean_zero and u1.is_mean_zero):
        raise InvalidFieldError("Picard data must be mean-zero")
    if enforce_time_bound:
        bound = picard_time_bound(u0, u1, params)
        if T > bound:
            raise ValueError(f"T = {T:.4g} exceeds the contraction bound {bound:.4g}")
    grid = u0.grid
    eps = params.epsilon
    sig = grid.dim / 2.0 + params.delta
    times = np.linspace(0.0, T, n_mesh + 1)
    props = [linear_propagator(params, float(t), grid) for t in times]

    base_u = [props[m].apply_A(u0) + props[m].apply_B(u1) for m in range(n_mesh + 1)]
    base_v = [props[m].apply_A_dt(u0) + props[m].apply_B_dt(u1) for m in range(n_mesh + 1)]

    us = [SpectralField.zeros(grid, grid.dim) for _ in range(n_mesh + 1)]
    vs = [SpectralField.zeros(grid, grid.dim) for _ in range(n_mesh + 1)]

    dt = T / n_mesh
    xt_norms: list[float] = []
    distances: list[float] = []
    increases = 0
    for it in range(max_iter):
        sources = []
        for m in range(n_mesh + 1):
            g = -1.0 * vs[m]
            if nonlinearity:
                g = g + nonlinear_term(us[m])
            sources.append(g)
        new_u = []
        new_v = []
        for m in range(n_mesh + 1):
            acc_u = base_u[m].copy()
            acc_v = base_v[m].copy()
            if m > 0:
                # trapezoid over s_0..s_m of B(t_m - s) g(s) / eps
                for j in range(m + 1):
                    w = dt * (0.5 if j in (0, m) else 1.0) / eps
                    pr = props[m - j]
                    acc_u = acc_u + w * pr.apply_B(sources[j])
                    acc_v = acc_v + w * pr.apply_B_dt(sources[j])
            new_u.append(acc_u)
            new_v.append(acc_v)
        dist = xt_norm(
            [a - b for a, b in zip(new_u, us)], [a - b for a, b in zip(new_v, vs)], sig
        )
        us, vs = new_u, new_v
        xt_norms.append(xt_norm(us, vs, sig))
        distances.append(dist)
        if len(distances) >= 2 and dist > distances[-2]:
            increases += 1
            if increases >= 3:
                raise ContractionFailureError((xt_norms, distances))
        else:
            increases = 0
        if dist <= tol:
            state = SolverState(us[-1], vs[-1], T)
            return PicardResult(state, xt_norms, distances, it + 1)
    raise NoConvergenceError((xt_norms, distances))
