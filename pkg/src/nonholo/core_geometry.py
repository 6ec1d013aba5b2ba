"""Pointwise linear algebra for mechanical systems with controlled constraints.

A system moves on a configuration space of dimension ``N + M`` whose last ``M``
coordinates are driven directly as controls (shape or actuation variables); the
first ``N`` respond dynamically.  Admissible velocities are cut out by ``nu``
Pfaffian constraint one-forms.  Write ``Delta`` for the distribution
annihilated by the controlled-coordinate differentials ``du^1..du^M`` and
``Gamma`` for the one annihilated by the constraint forms.  Whenever the two
are transversal, every tangent space splits, orthogonally with respect to the
kinetic-energy metric ``g``, into three blocks:

* block I   -- ``Delta ∩ Gamma``: free directions, dimension ``N - nu``;
* block II  -- the ``g``-orthogonal complement of ``Gamma``: reaction
  directions, dimension ``nu``;
* block III -- ``Gamma ∩ (Delta ∩ Gamma)^perp``: the directions along which
  control-rate changes push the system, dimension ``M``.

This module computes the splitting (projections on vectors, coprojections on
covectors), the lift maps ``h``/``k`` taking a control velocity to its block
III representative, adapted frames, and small finite-difference helpers that
the dynamics layer differentiates through.

Conventions: configurations, vectors and covectors are 1-D ``numpy`` arrays of
length ``N + M``; matrices act on the left.  Coprojections satisfy
``Pstar = g @ P @ g^-1`` and, because the splitting is ``g``-orthogonal, equal
the plain transposes of the projections.  All rank decisions use a relative
singular-value cutoff of ``1e-9``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import RankDeficiency, SingularMetric

Array = np.ndarray
MetricFn = Callable[[Array], Array]
OmegaFn = Callable[[Array], Array]
ForceFn = Callable[[float, Array, Array], Array]

#: Relative singular-value cutoff shared by every rank decision in the package.
RANK_RTOL = 1e-9


@dataclass(frozen=True)
class SystemSpec:
    """Immutable description of one mechanical system.

    :param N: number of passive (dynamic) coordinates.
    :param M: number of directly controlled coordinates; these are stored as
        the last ``M`` entries of every configuration vector.
    :param nu: number of constraint one-forms.
    :param metric: callback ``q -> (N+M, N+M)`` kinetic-energy matrix; must be
        symmetric positive definite wherever it is evaluated.
    :param omega: callback ``q -> (nu, N+M)`` whose rows are the constraint
        one-forms in coordinate components.
    :param metric_inverse: optional analytic inverse of ``metric``; when
        absent the inverse is obtained by factorization.
    :param force: optional applied covector ``(t, q, p) -> (N+M,)``.
    :param fd_step: relative step for the central differences used on
        ``metric``/projection data; the absolute step along coordinate ``i``
        is ``fd_step * max(1, |q_i|)``.
    :param metric_inverse_jacobian: optional callback ``q -> (N+M, N+M, N+M)``
        with ``J[i]`` the derivative of the inverse metric along coordinate
        ``i``; when supplied, the dynamics layer uses it instead of finite
        differences.
    """

    N: int
    M: int
    nu: int
    metric: MetricFn
    omega: OmegaFn
    metric_inverse: Optional[MetricFn] = None
    force: Optional[ForceFn] = None
    fd_step: float = 5e-6
    metric_inverse_jacobian: Optional[Callable[[Array], Array]] = None

    def __post_init__(self) -> None:
        if min(self.N, self.M, self.nu) < 0:
            raise ValueError("N, M and nu must be nonnegative")
        if self.nu > self.N:
            raise ValueError("transversality needs nu <= N")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")

    @property
    def dim(self) -> int:
        """Total configuration dimension ``N + M``."""
        return self.N + self.M


@dataclass(frozen=True)
class ProjectionSet:
    """The three-way orthogonal splitting at a single configuration.

    ``P_I``, ``P_II``, ``P_III`` act on tangent vectors; ``Pstar_I``,
    ``Pstar_II``, ``Pstar_III`` act on covectors (as matrices applied on the
    left to the 1-D component array).  ``h`` maps a control velocity
    ``v in R^M`` to the unique admissible full velocity in block III whose
    controlled components equal ``v``; ``k = g @ h`` is its covector version.
    ``I_basis`` spans block I (columns), and ``g``/``ginv`` are the metric and
    its inverse at the evaluation point.
    """

    P_I: Array
    P_II: Array
    P_III: Array
    Pstar_I: Array
    Pstar_II: Array
    Pstar_III: Array
    h: Array
    k: Array
    I_basis: Array
    g: Array
    ginv: Array


@dataclass(frozen=True)
class Frame:
    """A basis adapted to the three-way splitting at one configuration.

    ``V`` holds basis vectors as columns, ordered block I, block II, block
    III; every column has unit ``g``-norm and the blocks are mutually
    ``g``-orthogonal.  ``Omega_frame`` holds the dual rows
    ``g(V_i) / g[V_i, V_i]``, so ``Omega_frame @ V`` is the identity.
    ``block_ranges`` are the ``(start, stop)`` column ranges of the blocks.

    Frames returned by :func:`build_frame` are constructed pointwise from a
    singular-value decomposition and carry no smoothness guarantee between
    neighbouring configurations; models provide smooth frame fields where one
    is needed.
    """

    V: Array
    Omega_frame: Array
    block_ranges: tuple[tuple[int, int], tuple[int, int], tuple[int, int]]

    def block(self, name: str) -> Array:
        """Columns of ``V`` spanning block ``name`` (``"I"``, ``"II"`` or ``"III"``)."""
        start, stop = self.block_ranges[("I", "II", "III").index(name)]
        return self.V[:, start:stop]


def _cholesky_spd(g: Array, label: str = "metric") -> Array:
    """Cholesky factor of ``g``, raising ``SingularMetric`` when not SPD."""
    scale = float(np.abs(g).max()) if g.size else 0.0
    if g.size and float(np.abs(g - g.T).max()) > 1e-9 * (1.0 + scale):
        raise SingularMetric(f"{label} is not symmetric")
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise SingularMetric(f"{label} is not positive definite") from exc
    d = np.diag(L)
    # pivot ratio ~ sqrt(condition number); reject past ~1e12 conditioning
    if d.size and (d.min() / d.max()) ** 2 < 1e-12:
        raise SingularMetric(f"{label} is numerically singular (pivot ratio {d.min() / d.max():.2e})")
    return L


def metric_at(spec: SystemSpec, q: Array) -> Array:
    """Evaluate and validate the kinetic-energy matrix at ``q``."""
    g = np.asarray(spec.metric(np.asarray(q, dtype=float)), dtype=float)
    n = spec.dim
    if g.shape != (n, n):
        raise ValueError(f"metric returned shape {g.shape}, expected {(n, n)}")
    _cholesky_spd(g)
    return g


def metric_inverse_at(spec: SystemSpec, q: Array, metric: Optional[Array] = None) -> Array:
    """Inverse metric at ``q``, from the analytic callback when available."""
    g = metric if metric is not None else metric_at(spec, q)
    n = spec.dim
    if spec.metric_inverse is not None:
        ginv = np.asarray(spec.metric_inverse(np.asarray(q, dtype=float)), dtype=float)
        if ginv.shape != (n, n):
            raise ValueError(f"metric_inverse returned shape {ginv.shape}, expected {(n, n)}")
        resid = np.abs(g @ ginv - np.eye(n)).max()
        if resid > 1e-6 * n:
            raise SingularMetric(f"supplied metric_inverse disagrees with metric (residual {resid:.2e})")
        return ginv
    return np.linalg.inv(g)


def omega_at(spec: SystemSpec, q: Array) -> Array:
    """Constraint one-form rows at ``q`` (shape ``(nu, N+M)``)."""
    Om = np.asarray(spec.omega(np.asarray(q, dtype=float)), dtype=float)
    if Om.shape != (spec.nu, spec.dim):
        raise ValueError(f"omega returned shape {Om.shape}, expected {(spec.nu, spec.dim)}")
    return Om


def check_transversality(spec: SystemSpec, q: Array) -> tuple[bool, float]:
    """Decide whether the constraints are transversal to the control foliation.

    Transversality holds exactly when the first ``N`` columns of the
    constraint matrix have full row rank ``nu``, i.e. no nonzero combination
    of the constraint forms lies in the span of the controlled-coordinate
    differentials.  Returns ``(ok, cond)`` where ``cond`` is the ratio of the
    largest to the ``nu``-th singular value of that block (``inf`` when rank
    is lost, ``1.0`` for an unconstrained system).
    """
    if spec.nu == 0:
        return True, 1.0
    Om = omega_at(spec, q)
    s = np.linalg.svd(Om[:, : spec.N], compute_uv=False)
    smax = float(s[0])
    snu = float(s[spec.nu - 1])
    if snu <= RANK_RTOL * smax or smax == 0.0:
        return False, float("inf")
    return True, smax / snu


def _canonical_sign(cols: Array) -> Array:
    """Flip column signs so the largest-magnitude entry of each is positive."""
    out = np.array(cols, dtype=float)
    if out.size:
        lead = np.abs(out).argmax(axis=0)
        flip = out[lead, np.arange(out.shape[1])] < 0.0
        out[:, flip] = -out[:, flip]
    return out


def delta_cap_gamma_basis(spec: SystemSpec, q: Array, omega_matrix: Optional[Array] = None) -> Array:
    """Basis (columns) of block I, the admissible directions with frozen controls.

    Block I consists of vectors annihilated by every constraint form whose
    controlled components vanish, so it is the null space of the first-``N``
    column block of the constraint matrix, padded with ``M`` zero rows.
    Raises ``RankDeficiency`` when that block loses rank (transversality
    failure).
    """
    n = spec.dim
    Om = omega_matrix if omega_matrix is not None else omega_at(spec, q)
    if spec.nu == 0:
        null = np.eye(spec.N)
    else:
        _, s, Vh = np.linalg.svd(Om[:, : spec.N])
        rank = int(np.sum(s > RANK_RTOL * (s[0] if s.size else 0.0)))
        if rank != spec.nu:
            raise RankDeficiency(
                f"constraint block rank {rank} != nu = {spec.nu}: transversality fails at q={np.asarray(q)}"
            )
        null = Vh[spec.nu :].T
    B = np.zeros((n, spec.N - spec.nu))
    B[: spec.N, :] = null
    return _canonical_sign(B)


def _lift_maps(g: Array, Om: Array, N: int, M: int) -> Array:
    """Solve for the block III lift ``h``: columns minimize kinetic energy.

    For each control direction ``e_alpha``, ``h[:, alpha]`` is the admissible
    vector with controlled components ``e_alpha`` of least ``g``-norm; the
    stationarity system below encodes exactly that constrained minimization,
    and its solution automatically lands in block III.
    """
    n = N + M
    nu = Om.shape[0]
    E = np.zeros((M, n))
    E[:, N:] = np.eye(M)
    S = np.zeros((n + nu + M, n + nu + M))
    S[:n, :n] = g
    S[:n, n : n + nu] = Om.T
    S[:n, n + nu :] = E.T
    S[n : n + nu, :n] = Om
    S[n + nu :, :n] = E
    rhs = np.zeros((n + nu + M, M))
    rhs[n + nu :, :] = np.eye(M)
    try:
        sol = np.linalg.solve(S, rhs)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiency("lift system singular: constraints not transversal to controls") from exc
    return sol[:n, :]


def projection_set(spec: SystemSpec, q: Array, check: bool = True) -> ProjectionSet:
    """Projections, coprojections and lift maps of the splitting at ``q``.

    With ``check=True`` (the default) the block ranks are verified against
    ``(N - nu, nu, M)``; passing ``check=False`` skips those singular-value
    sweeps, which matters inside finite-difference loops where the same point
    is revisited under tiny perturbations.
    """
    q = np.asarray(q, dtype=float)
    n = spec.dim
    g = metric_at(spec, q)
    ginv = metric_inverse_at(spec, q, metric=g)
    Om = omega_at(spec, q)

    B = delta_cap_gamma_basis(spec, q, omega_matrix=Om)
    if B.shape[1]:
        gram = B.T @ g @ B
        P_I = B @ np.linalg.solve(gram, B.T @ g)
    else:
        P_I = np.zeros((n, n))

    if spec.nu:
        W = ginv @ Om.T
        P_II = W @ np.linalg.solve(Om @ W, Om)
    else:
        P_II = np.zeros((n, n))

    P_III = np.eye(n) - P_I - P_II

    h = _lift_maps(g, Om, spec.N, spec.M)
    k = g @ h

    if check:
        ranks = tuple(np.linalg.matrix_rank(P, tol=1e-8) for P in (P_I, P_II, P_III))
        expected = (spec.N - spec.nu, spec.nu, spec.M)
        if ranks != expected:
            raise RankDeficiency(f"projection ranks {ranks} != {expected} at q={q}")

    return ProjectionSet(
        P_I=P_I,
        P_II=P_II,
        P_III=P_III,
        Pstar_I=g @ P_I @ ginv,
        Pstar_II=g @ P_II @ ginv,
        Pstar_III=g @ P_III @ ginv,
        h=h,
        k=k,
        I_basis=B,
        g=g,
        ginv=ginv,
    )


def _metric_gram_schmidt(cols: Array, g: Array, label: str) -> Array:
    """Orthonormalize ``cols`` in the ``g`` inner product (modified GS, two passes)."""
    out = np.array(cols, dtype=float)
    scale = max(float(np.abs(out).max()), 1.0)
    for j in range(out.shape[1]):
        v = out[:, j]
        for _ in range(2):  # re-orthogonalize once for numerical hygiene
            for i in range(j):
                v = v - (out[:, i] @ g @ v) * out[:, i]
        norm = float(np.sqrt(v @ g @ v))
        if norm < 1e-10 * scale:
            raise RankDeficiency(f"{label} columns are dependent (norm {norm:.2e})")
        out[:, j] = v / norm
    return out


def build_frame(spec: SystemSpec, q: Array) -> Frame:
    """Assemble a ``g``-orthonormal frame adapted to the splitting at ``q``.

    Block I comes from the null-space basis of the constraint block, block II
    from the metric duals of the constraint forms, block III from the lift
    columns; each block is orthonormalized in the metric.  Cross-block
    orthogonality holds by construction.  The result is deterministic at a
    given point but only pointwise: see :class:`Frame`.
    """
    q = np.asarray(q, dtype=float)
    P = projection_set(spec, q)
    g = P.g
    parts = []
    if P.I_basis.shape[1]:
        parts.append(_metric_gram_schmidt(P.I_basis, g, "block I"))
    if spec.nu:
        Om = omega_at(spec, q)
        parts.append(_metric_gram_schmidt(P.ginv @ Om.T, g, "block II"))
    if spec.M:
        parts.append(_metric_gram_schmidt(P.h, g, "block III"))
    V = np.hstack(parts) if parts else np.zeros((spec.dim, 0))
    norms2 = np.einsum("ij,jk,ki->i", V.T, g, V)
    Omega_frame = (g @ V).T / norms2[:, None]
    k1 = spec.N - spec.nu
    ranges = ((0, k1), (k1, spec.N), (spec.N, spec.dim))
    return Frame(V=V, Omega_frame=Omega_frame, block_ranges=ranges)


def argmin_certificate(
    spec: SystemSpec,
    q: Array,
    v: Array,
    trials: int = 32,
    rng: Optional[np.random.Generator] = None,
    scale: float = 1.0,
) -> tuple[bool, float]:
    """Spot-check that the lift of ``v`` minimizes kinetic energy.

    Among admissible vectors whose controlled components equal ``v``, the lift
    ``h @ v`` should have the least ``g``-norm; every competitor differs from
    it by a block I vector.  Draws ``trials`` random competitors at
    ``g``-distance ``scale`` and returns ``(ok, margin)`` with ``margin`` the
    worst observed excess energy (nonnegative when the certificate holds).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    P = projection_set(spec, q, check=False)
    z0 = P.h @ v
    base = float(z0 @ P.g @ z0)
    B = P.I_basis
    if B.shape[1] == 0:
        return True, float("inf")
    margin = float("inf")
    for _ in range(trials):
        c = rng.standard_normal(B.shape[1])
        norm = np.linalg.norm(c)
        if norm == 0.0:
            continue
        w = B @ (scale * c / norm)
        z = z0 + w
        margin = min(margin, float(z @ P.g @ z) - base)
    ok = margin >= -1e-10 * (1.0 + abs(base))
    return ok, margin


def coordinate_derivative(func: Callable[[Array], Array], q: Array, i: int, step: float) -> Array:
    """Central difference of array-valued ``func`` along coordinate ``i``.

    The absolute step is ``step * max(1, |q_i|)`` so the stencil stays
    well-scaled for both small and large coordinate values.
    """
    h = step * max(1.0, abs(float(q[i])))
    qp = np.array(q, dtype=float)
    qm = np.array(q, dtype=float)
    qp[i] += h
    qm[i] -= h
    return (np.asarray(func(qp), dtype=float) - np.asarray(func(qm), dtype=float)) / (2.0 * h)
