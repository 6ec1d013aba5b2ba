"""Built-in example systems: the Roller Racer, the rolling ball and a toy.

Each model is packaged as a :class:`ModelBundle`: the
:class:`~nonholo.core_geometry.SystemSpec` callbacks (metric, constraint
forms, analytic inverse metric where available), a smooth adapted frame field,
sampling boxes that stay clear of chart singularities, and any closed-form
reference dynamics the model admits.

Roller Racer
    A planar two-platform vehicle: a main body with a knife-edge axle and a
    trailing steered platform, coupled through the steering angle ``u`` (the
    control).  Coordinates ``(q1, q2, q3, u)`` with ``q2`` the heading,
    ``(q1, q3)`` the contact position and ``u`` the relative steering angle.
    The kinetic metric is constant but the two knife-edge constraint forms
    rotate with heading and steering.  The free block is one-dimensional and
    the reduced dynamics collapse to a scalar momentum-like coordinate ``xi``
    with a closed-form right-hand side (transcribed below with coefficients
    cross-checked against a direct multiplier-based integration of the
    constrained system).

Rolling ball
    A ball of radius ``r`` and gyration radius ``kappa`` rolling without
    slipping on a turntable whose angular position ``u`` is the control.
    Coordinates: Z-X-Z Euler angles ``(q1, q2, q3)`` for the attitude, the
    contact point ``(x, y)``, and ``u``.  This system is "fit for jumps": its
    quadratic control-rate term vanishes identically, so fast control slews
    produce no net momentum transfer.

Euclidean toy
    Flat metric, optional single constant constraint form; handy for exact
    hand-checked values and degenerate-dimension edge cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core_geometry import Array, Frame, SystemSpec
from .errors import ChartDomain, ModelError, SingularDenominator


@dataclass(frozen=True)
class RollerRacerParams:
    """Roller Racer physical constants.

    ``rho`` is the axle offset of the steered platform, ``inertia`` the main
    body's moment of inertia about the contact, ``tail_inertia`` the steered
    platform's own moment.
    """

    rho: float = 1.0
    inertia: float = 2.0
    tail_inertia: float = 1.0


@dataclass(frozen=True)
class RollingBallParams:
    """Ball radius and squared gyration radius (0.4 = homogeneous ball of radius 1)."""

    radius: float = 1.0
    gyration2: float = 0.4


@dataclass(frozen=True)
class EuclideanToyParams:
    """Flat-metric toy dimensions; one constant constraint form when ``constrained``."""

    n_passive: int = 3
    n_controls: int = 1
    constrained: bool = False


@dataclass(frozen=True)
class ModelBundle:
    """Everything the rest of the package needs to know about one model.

    ``frame_field`` returns a smooth splitting-adapted frame (blocks span the
    free/reaction/drive subspaces); ``constancy_basis`` is the basis in which
    the structural fitness test checks constancy of the free coprojection;
    ``declared_flat`` records the model-level flatness declaration that the
    structural test cannot decide numerically.  ``closed_field`` /
    ``averaged_field`` build right-hand sides of the model's closed-form and
    averaged reduced systems when it has them (state ``(q1, q2, q3, xi)`` for
    the Roller Racer).  ``embed_closed`` / ``extract_closed`` convert between
    that closed state and ambient ``(q, p_I)`` pairs.
    """

    name: str
    params: object
    spec: SystemSpec
    sample_box: Array
    default_q0: Array
    frame_field: Optional[Callable[[Array], Frame]] = None
    constancy_basis: Optional[Callable[[Array], Array]] = None
    declared_flat: bool = False
    closed_field: Optional[Callable[[object], Callable[[float, Array], Array]]] = None
    averaged_field: Optional[Callable[[float, float], Callable[[float, Array], Array]]] = None
    closed_dim: int = 0
    embed_closed: Optional[Callable[[Array, float], tuple[Array, Array]]] = None
    extract_closed: Optional[Callable[[Array, Array], Array]] = None


# ---------------------------------------------------------------------------
# Roller Racer
# ---------------------------------------------------------------------------


def _racer_metric_matrices(p: RollerRacerParams) -> tuple[Array, Array]:
    I, J = p.inertia, p.tail_inertia
    g = np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, I + J, 0.0, J],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, J, 0.0, J],
        ]
    )
    ginv = np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0 / I, 0.0, -1.0 / I],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, -1.0 / I, 0.0, (I + J) / (I * J)],
        ]
    )
    return g, ginv


def roller_racer_spec(params: Optional[RollerRacerParams] = None) -> SystemSpec:
    """System description of the Roller Racer: N=3 passive coordinates, one control.

    Constraint forms (knife edges under both platforms)::

        omega^1 = cos(q2) dq1 - sin(q2) dq3
        omega^2 = cos(q2+u) dq1 + rho cos(u) dq2 - sin(q2+u) dq3
    """
    p = params or RollerRacerParams()
    g, ginv = _racer_metric_matrices(p)

    def metric(q: Array) -> Array:
        return g.copy()

    def metric_inverse(q: Array) -> Array:
        return ginv.copy()

    def omega(q: Array) -> Array:
        q2, u = q[1], q[3]
        return np.array(
            [
                [math.cos(q2), 0.0, -math.sin(q2), 0.0],
                [math.cos(q2 + u), p.rho * math.cos(u), -math.sin(q2 + u), 0.0],
            ]
        )

    return SystemSpec(N=3, M=1, nu=2, metric=metric, omega=omega, metric_inverse=metric_inverse)


def racer_frame_vectors(params: RollerRacerParams, q: Array) -> dict[str, Array]:
    """The published adapted basis ``{w1, v2, v3, v4}`` at ``q``.

    ``w1`` spans the free block, ``v2``/``v3`` the reaction block, ``v4`` the
    drive block (its controlled component is 1, so it is also the lift of the
    unit control rate).  ``v2`` and ``v3`` blow up on ``sin(q2) = 0`` or
    ``cos(u) = 0``; that locus raises :class:`ChartDomain`.
    """
    rho, I, J = params.rho, params.inertia, params.tail_inertia
    q2, u = float(q[1]), float(q[3])
    s2, c2 = math.sin(q2), math.cos(q2)
    su, cu = math.sin(u), math.cos(u)
    if abs(s2) < 1e-8 or abs(cu) < 1e-8:
        raise ChartDomain(f"published Roller Racer frame undefined at sin(q2)={s2:.1e}, cos(u)={cu:.1e}")
    d0 = rho**2 * cu**2 + (I + J) * su**2
    s2u = math.sin(2.0 * u)
    w1 = np.array([2.0 * rho * cu * s2, 2.0 * su, 2.0 * rho * cu * c2, 0.0])
    v2 = np.array([I / (rho * s2) * math.tan(u), -1.0, 0.0, 1.0])
    v3 = np.array([-c2 / s2, 0.0, 1.0, 0.0])
    v4 = np.array(
        [
            -J * rho * s2 * s2u / (2.0 * d0),
            -J * su**2 / d0,
            -J * rho * c2 * s2u / (2.0 * d0),
            1.0,
        ]
    )
    return {"w1": w1, "v2": v2, "v3": v3, "v4": v4}


def _racer_frame_field(params: RollerRacerParams, g: Array) -> Callable[[Array], Frame]:
    def frame(q: Array) -> Frame:
        vecs = racer_frame_vectors(params, q)
        V = np.column_stack([vecs["w1"], vecs["v2"], vecs["v3"], vecs["v4"]])
        norms2 = np.einsum("ij,jk,ki->i", V.T, g, V)
        Omega_frame = (g @ V).T / norms2[:, None]
        return Frame(V=V, Omega_frame=Omega_frame, block_ranges=((0, 1), (1, 3), (3, 4)))

    return frame


def racer_denominators(params: RollerRacerParams, u: float) -> tuple[float, float]:
    """``(Delta_0, Delta_1)`` with ``Delta_1 = 2 Delta_0`` (an exact identity)."""
    rho, I, J = params.rho, params.inertia, params.tail_inertia
    d0 = rho**2 * math.cos(u) ** 2 + (I + J) * math.sin(u) ** 2
    d1 = I + J + rho**2 - (I + J - rho**2) * math.cos(2.0 * u)
    return d0, d1


def roller_racer_closed_rhs(params: RollerRacerParams, y: Array, u: float, udot: float) -> Array:
    """Closed-form reduced dynamics; state ``y = (q1, q2, q3, xi)``.

    ``xi`` is the velocity coordinate along the free-block frame vector
    ``w1``; the configuration additionally drifts along the lift of the
    control rate.  The ``xi`` coefficients are the ones validated against a
    direct multiplier-based integration of the full constrained system::

        q1' = 2 rho cos(u) sin(q2) xi - J rho sin(q2) sin(2u)/(2 Delta_0) u'
        q2' = 2 sin(u) xi             - J sin(u)^2/Delta_0 u'
        q3' = 2 rho cos(u) cos(q2) xi - J rho cos(q2) sin(2u)/(2 Delta_0) u'
        xi' = -(I+J-rho^2) sin(2u)/Delta_1 * xi u'
              + 2 J rho^2 cos(u)/Delta_1^2 * u'^2
    """
    rho, I, J = params.rho, params.inertia, params.tail_inertia
    d0, d1 = racer_denominators(params, u)
    if abs(d1) < 1e-12 * (1.0 + I + J + rho**2):
        raise SingularDenominator(f"Delta_1 = {d1:.3e} at u = {u}")
    q2, xi = float(y[1]), float(y[3])
    cu, su = math.cos(u), math.sin(u)
    s2u = math.sin(2.0 * u)
    return np.array(
        [
            2.0 * rho * cu * math.sin(q2) * xi - J * rho * math.sin(q2) * s2u / (2.0 * d0) * udot,
            2.0 * su * xi - J * su**2 / d0 * udot,
            2.0 * rho * cu * math.cos(q2) * xi - J * rho * math.cos(q2) * s2u / (2.0 * d0) * udot,
            -(I + J - rho**2) * s2u / d1 * xi * udot + 2.0 * J * rho**2 * cu / d1**2 * udot**2,
        ]
    )


def roller_racer_averaged_rhs(params: RollerRacerParams, y: Array, u_bar: float, K: float) -> Array:
    """Averaged reduced dynamics for dithering ``u = u_bar + eps K sin(t/eps)``.

    Averaging the closed-form system over the fast phase leaves the ``q`` lines
    evaluated at ``u_bar`` and gives ``xi`` the secular pump
    ``J rho^2 cos(u_bar) K^2 / Delta_1(u_bar)^2`` (the quadratic term's average
    ``<u'^2> = K^2/2`` times its coefficient).
    """
    rho, J = params.rho, params.tail_inertia
    _, d1 = racer_denominators(params, u_bar)
    if abs(d1) < 1e-12:
        raise SingularDenominator(f"Delta_1 = {d1:.3e} at u_bar = {u_bar}")
    q2, xi = float(y[1]), float(y[3])
    cu, su = math.cos(u_bar), math.sin(u_bar)
    return np.array(
        [
            2.0 * rho * cu * math.sin(q2) * xi,
            2.0 * su * xi,
            2.0 * rho * cu * math.cos(q2) * xi,
            J * rho**2 * cu * K**2 / d1**2,
        ]
    )


def _racer_closed_field(params: RollerRacerParams) -> Callable[[object], Callable[[float, Array], Array]]:
    def make(control: object) -> Callable[[float, Array], Array]:
        def f(t: float, y: Array) -> Array:
            u = float(np.asarray(control.value(t)).reshape(-1)[0])
            udot = float(np.asarray(control.rate(t)).reshape(-1)[0])
            return roller_racer_closed_rhs(params, y, u, udot)

        return f

    return make


def _racer_averaged_field(params: RollerRacerParams) -> Callable[[float, float], Callable[[float, Array], Array]]:
    def make(u_bar: float, K: float) -> Callable[[float, Array], Array]:
        def f(t: float, y: Array) -> Array:
            return roller_racer_averaged_rhs(params, y, u_bar, K)

        return f

    return make


def _racer_embed(params: RollerRacerParams, g: Array):
    def embed(y: Array, u: float) -> tuple[Array, Array]:
        q = np.array([y[0], y[1], y[2], u])
        w1 = racer_frame_vectors(params, q)["w1"]
        return q, float(y[3]) * (g @ w1)

    return embed


def _racer_extract(params: RollerRacerParams, g: Array):
    def extract(q: Array, p_I: Array) -> Array:
        w1 = racer_frame_vectors(params, q)["w1"]
        xi = float(p_I @ w1) / float(w1 @ g @ w1)
        return np.array([q[0], q[1], q[2], xi])

    return extract


def _build_roller_racer(
    rho: float = 1.0,
    inertia: float = 2.0,
    tail_inertia: float = 1.0,
    metric_perturb: float = 0.0,
) -> ModelBundle:
    params = RollerRacerParams(rho=rho, inertia=inertia, tail_inertia=tail_inertia)
    spec = roller_racer_spec(params)
    if metric_perturb:
        spec = _perturbed(spec, metric_perturb)
    g, _ = _racer_metric_matrices(params)
    box = np.array([[-1.0, 1.0], [0.3, 2.8], [-1.0, 1.0], [-1.2, 1.2]])
    return ModelBundle(
        name="roller-racer",
        params=params,
        spec=spec,
        sample_box=box,
        default_q0=np.array([0.0, math.pi / 2.0, 0.0, 0.0]),
        frame_field=_racer_frame_field(params, g),
        constancy_basis=lambda q: np.eye(4),
        declared_flat=False,
        closed_field=_racer_closed_field(params),
        averaged_field=_racer_averaged_field(params),
        closed_dim=4,
        embed_closed=_racer_embed(params, g),
        extract_closed=_racer_extract(params, g),
    )


# ---------------------------------------------------------------------------
# Rolling ball on a turntable
# ---------------------------------------------------------------------------


def _euler_rate_matrix(q: Array) -> Array:
    """Map Z-X-Z Euler-angle rates to the spatial angular velocity."""
    sphi, cphi = math.sin(q[0]), math.cos(q[0])
    sth, cth = math.sin(q[1]), math.cos(q[1])
    return np.array(
        [
            [0.0, cphi, sth * sphi],
            [0.0, sphi, -sth * cphi],
            [1.0, 0.0, cth],
        ]
    )


def _euler_rate_matrix_inv(q: Array) -> Array:
    sphi, cphi = math.sin(q[0]), math.cos(q[0])
    sth, cth = math.sin(q[1]), math.cos(q[1])
    if abs(sth) < 1e-8:
        raise ChartDomain(f"Euler chart degenerate: sin(q2) = {sth:.1e}")
    return np.array(
        [
            [-sphi * cth / sth, cphi * cth / sth, 1.0],
            [cphi, sphi, 0.0],
            [sphi / sth, -cphi / sth, 0.0],
        ]
    )


def rolling_ball_spec(params: Optional[RollingBallParams] = None) -> SystemSpec:
    """Ball on a turntable: N=5 (three Euler angles, contact point), one control.

    Rolling without slipping against the turntable at angle ``u`` gives

        x' + r w2 + u' y = 0,       y' - r w1 - u' x = 0,

    with ``w`` the spatial angular velocity.  Kinetic energy is
    ``(|xdot|^2 + kappa^2 |w|^2 + u'^2) / 2`` per unit mass, so the metric is
    block diagonal: ``kappa^2 E^T E`` on the angles (``E`` the rate-to-spin
    matrix) and the identity on ``(x, y, u)``.
    """
    p = params or RollingBallParams()
    k2, r = p.gyration2, p.radius

    def metric(q: Array) -> Array:
        E = _euler_rate_matrix(q)
        if abs(math.sin(q[1])) < 1e-8:
            raise ChartDomain(f"Euler chart degenerate: sin(q2) = {math.sin(q[1]):.1e}")
        g = np.zeros((6, 6))
        g[:3, :3] = k2 * E.T @ E
        g[3, 3] = g[4, 4] = g[5, 5] = 1.0
        return g

    def metric_inverse(q: Array) -> Array:
        Einv = _euler_rate_matrix_inv(q)
        ginv = np.zeros((6, 6))
        ginv[:3, :3] = (Einv @ Einv.T) / k2
        ginv[3, 3] = ginv[4, 4] = ginv[5, 5] = 1.0
        return ginv

    def omega(q: Array) -> Array:
        E = _euler_rate_matrix(q)
        x, y = q[3], q[4]
        row1 = np.concatenate([r * E[1, :], [1.0, 0.0, y]])
        row2 = np.concatenate([-r * E[0, :], [0.0, 1.0, -x]])
        return np.vstack([row1, row2])

    return SystemSpec(N=5, M=1, nu=2, metric=metric, omega=omega, metric_inverse=metric_inverse)


def ball_orthonormal_basis(params: RollingBallParams, q: Array) -> Array:
    """The metric-orthonormal kinematic basis ``{V_1..V_6}`` as columns.

    ``V_1..V_3`` are the unit-spin attitude directions (columns of
    ``E^{-1}/kappa``); ``V_4, V_5, V_6`` are the coordinate directions of
    ``x, y, u``.  This is the basis in which the free coprojection has a
    constant matrix, which is what the structural fitness test checks.
    """
    kappa = math.sqrt(params.gyration2)
    A = _euler_rate_matrix_inv(q) / kappa
    V = np.zeros((6, 6))
    V[:3, :3] = A
    V[3, 3] = V[4, 4] = V[5, 5] = 1.0
    return V


def _ball_frame_field(params: RollingBallParams) -> Callable[[Array], Frame]:
    spec = rolling_ball_spec(params)
    kappa = math.sqrt(params.gyration2)
    r = params.radius

    def frame(q: Array) -> Frame:
        A = _euler_rate_matrix_inv(q) / kappa  # raises ChartDomain on the gimbal locus
        g = spec.metric(q)
        ginv = spec.metric_inverse(q)
        Om = spec.omega(q)
        x, y = float(q[3]), float(q[4])
        # free block: rolling-compatible spin/translation combinations
        W = np.zeros((6, 3))
        W[:3, 0] = A[:, 0]
        W[4, 0] = r / kappa
        W[:3, 1] = A[:, 1]
        W[3, 1] = -r / kappa
        W[:3, 2] = A[:, 2]
        # reaction block: metric duals of the constraint forms
        U = ginv @ Om.T
        # drive block: admissible turntable response, orthogonal to the free block
        a = -x * kappa * r / (kappa**2 + r**2)
        b = -y * kappa * r / (kappa**2 + r**2)
        Z = np.zeros(6)
        Z[:3] = a * A[:, 0] + b * A[:, 1]
        Z[3] = b * kappa / r
        Z[4] = -a * kappa / r
        Z[5] = 1.0
        V = np.column_stack([W, U, Z])
        norms2 = np.einsum("ij,jk,ki->i", V.T, g, V)
        Omega_frame = (g @ V).T / norms2[:, None]
        return Frame(V=V, Omega_frame=Omega_frame, block_ranges=((0, 3), (3, 5), (5, 6)))

    return frame


def _build_rolling_ball(
    radius: float = 1.0,
    gyration2: float = 0.4,
    metric_perturb: float = 0.0,
) -> ModelBundle:
    params = RollingBallParams(radius=radius, gyration2=gyration2)
    spec = rolling_ball_spec(params)
    if metric_perturb:
        spec = _perturbed(spec, metric_perturb)
    box = np.array(
        [
            [-2.5, 2.5],
            [0.4, math.pi - 0.4],
            [-2.5, 2.5],
            [-1.5, 1.5],
            [-1.5, 1.5],
            [-3.0, 3.0],
        ]
    )
    return ModelBundle(
        name="rolling-ball",
        params=params,
        spec=spec,
        sample_box=box,
        default_q0=np.array([0.3, 1.1, -0.2, 0.1, -0.15, 0.0]),
        frame_field=_ball_frame_field(params),
        constancy_basis=lambda q: ball_orthonormal_basis(params, q),
        declared_flat=True,
    )


# ---------------------------------------------------------------------------
# Euclidean toy
# ---------------------------------------------------------------------------


def euclidean_toy_spec(params: Optional[EuclideanToyParams] = None) -> SystemSpec:
    """Identity metric on ``R^(N+M)``; optionally the single form ``dq1``."""
    p = params or EuclideanToyParams()
    n = p.n_passive + p.n_controls
    nu = 1 if p.constrained else 0
    eye = np.eye(n)

    def metric(q: Array) -> Array:
        return eye.copy()

    def omega(q: Array) -> Array:
        if not nu:
            return np.zeros((0, n))
        row = np.zeros((1, n))
        row[0, 0] = 1.0
        return row

    return SystemSpec(N=p.n_passive, M=p.n_controls, nu=nu, metric=metric, omega=omega, metric_inverse=metric)


def _build_euclidean_toy(
    n_passive: int = 3,
    n_controls: int = 1,
    constrained: bool = False,
    metric_perturb: float = 0.0,
) -> ModelBundle:
    params = EuclideanToyParams(n_passive=int(n_passive), n_controls=int(n_controls), constrained=bool(constrained))
    spec = euclidean_toy_spec(params)
    if metric_perturb:
        spec = _perturbed(spec, metric_perturb)
    n = spec.dim
    box = np.tile([-1.0, 1.0], (n, 1))
    return ModelBundle(
        name="euclidean-toy",
        params=params,
        spec=spec,
        sample_box=box,
        default_q0=np.zeros(n),
        declared_flat=True,
        constancy_basis=lambda q: np.eye(n),
    )


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


def _perturbed(spec: SystemSpec, eps: float) -> SystemSpec:
    """Deliberately corrupt the metric with a smooth rank-one bump.

    Used as a negative control: downstream consistency checks must detect the
    corruption.  The analytic inverse callbacks are dropped because they no
    longer match.
    """
    n = spec.dim
    ray = np.linspace(1.0, 2.0, n)
    bump = np.outer(ray, ray) / n
    base = spec.metric

    def metric(q: Array) -> Array:
        return base(q) + eps * math.sin(float(q[0]) + 0.3) * bump

    return replace(spec, metric=metric, metric_inverse=None, metric_inverse_jacobian=None)


_BUILDERS: dict[str, Callable[..., ModelBundle]] = {
    "roller-racer": _build_roller_racer,
    "rolling-ball": _build_rolling_ball,
    "euclidean-toy": _build_euclidean_toy,
}


def model_names() -> tuple[str, ...]:
    return tuple(sorted(_BUILDERS))


def build_model(name: str, **options: float) -> ModelBundle:
    """Instantiate a registered model by name with keyword parameter overrides."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ModelError(f"unknown model {name!r}; available: {', '.join(model_names())}") from None
    try:
        return builder(**options)
    except TypeError as exc:
        raise ModelError(f"bad options for model {name!r}: {exc}") from None
