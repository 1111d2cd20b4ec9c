"""Backend for the convex subproblems: small Hermitian SDPs, convex-quadratic
feasibility systems, and randomized rank-one recovery.

The SDP path wraps cvxpy/SCS behind a fixed contract: every returned matrix
is verified independently of the solver's own residuals (PSD to
lambda_min >= -1e-7 * lambda_max, unit diagonal to 1e-8, each linear
constraint to 1e-7 in the per-constraint normalized scale).  Problem
structures are compiled once per shape and cached thread-locally, so
repeated solves inside bisection/SCA loops only pay for the solve itself.

Quadratic feasibility systems of the form  a.x >= sum_j c_j x_j^2 + d
(c >= 0) with box bounds and nonnegative budget rows are decided exactly by
a monotone least-element iteration whenever each inequality supports a
single variable with positive linear coefficient; the returned point is
that least element (tight quadratic constraints, minimal resource use).
General instances fall back to a sequential-quadratic phase-I search.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConeProgram",
    "TraceConstraint",
    "SdpResult",
    "QuadConstraint",
    "QuadFeasibility",
    "solve_sdp",
    "solve_quad_feasibility",
    "gaussian_randomization",
    "ExtractionError",
    "dump_cone_program",
    "load_cone_program",
]

MAX_BLOCK_DIM = 128  # documented cap on any single PSD block
PSD_TOL = 1e-7  # lambda_min >= -PSD_TOL * lambda_max
DIAG_TOL = 1e-8
CONSTRAINT_TOL = 1e-7  # on the normalized constraint scale
RANK_ONE_RATIO = 1e-9  # lambda_2 / lambda_1 below which a matrix is rank-one


class ExtractionError(RuntimeError):
    """No randomization sample satisfied the feasibility scorer."""


def _hermitize(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    return 0.5 * (A + A.conj().T)


@dataclass(frozen=True)
class TraceConstraint:
    """sum_b Re tr(mats[b] @ X_b)  (sense)  rhs, with Hermitian mats."""

    mats: dict[int, np.ndarray]
    sense: str  # "<=" or "=="
    rhs: float


@dataclass(frozen=True)
class ConeProgram:
    """A block-diagonal Hermitian SDP with trace-linear data.

    ``objective`` maps block index -> Hermitian C_b to maximize
    sum_b Re tr(C_b X_b); None means a pure feasibility problem (value 0).
    ``diag_one`` pins every diagonal entry of every block to 1.
    """

    blocks: tuple[int, ...]
    objective: dict[int, np.ndarray] | None
    constraints: tuple[TraceConstraint, ...] = ()
    diag_one: bool = False

    def __post_init__(self):
        for n in self.blocks:
            if not (1 <= n <= MAX_BLOCK_DIM):
                raise ValueError(f"block dimension {n} outside [1, {MAX_BLOCK_DIM}]")
        for cons in self.constraints:
            if cons.sense not in ("<=", "=="):
                raise ValueError(f"unknown sense {cons.sense!r}")
            if not np.isfinite(cons.rhs):
                raise ValueError("constraint rhs must be finite")
            for b, A in cons.mats.items():
                n = self.blocks[b]
                if np.asarray(A).shape != (n, n):
                    raise ValueError(f"constraint matrix for block {b} has wrong shape")


@dataclass(frozen=True, eq=False)
class SdpResult:
    """On 'optimal' the matrices are verified against the contract
    tolerances.  On 'numerical_failure' X may still carry the solver's
    unverified candidate (callers that re-validate against their own true
    constraints can use it; verdict-style callers must not)."""

    X: tuple[np.ndarray, ...] | None
    status: str  # optimal | infeasible | numerical_failure
    value: float | None
    detail: str = ""


_tls = threading.local()


def _structure_key(prog: ConeProgram) -> tuple:
    obj_key = None if prog.objective is None else frozenset(prog.objective)
    cons_key = tuple((c.sense, frozenset(c.mats)) for c in prog.constraints)
    return (prog.blocks, prog.diag_one, obj_key, cons_key)


def _compiled(prog: ConeProgram):
    """Build (or fetch) the parametrized cvxpy problem for this structure."""
    import cvxpy as cp

    cache = getattr(_tls, "sdp_cache", None)
    if cache is None:
        cache = _tls.sdp_cache = {}
    key = _structure_key(prog)
    if key in cache:
        return cache[key]

    Xs = [
        cp.Variable((n, n), hermitian=True) if n > 1 else cp.Variable((1, 1), symmetric=True)
        for n in prog.blocks
    ]
    constraints = [X >> 0 for X in Xs]
    if prog.diag_one:
        for X, n in zip(Xs, prog.blocks):
            constraints.append(cp.diag(X) == np.ones(n))

    def make_param(n):
        if n == 1:
            return cp.Parameter((1, 1), symmetric=True)
        return cp.Parameter((n, n), hermitian=True)

    def real_trace(P, b):
        # cp.real on an already-real expression breaks canonicalization
        expr = cp.trace(P @ Xs[b])
        return cp.real(expr) if prog.blocks[b] > 1 else expr

    cons_params = []
    for cons in prog.constraints:
        mats = {b: make_param(prog.blocks[b]) for b in sorted(cons.mats)}
        rhs = cp.Parameter()
        expr = cp.sum([real_trace(P, b) for b, P in mats.items()])
        if cons.sense == "<=":
            constraints.append(expr <= rhs)
        else:
            constraints.append(expr == rhs)
        cons_params.append((mats, rhs))

    if prog.objective is None:
        objective = cp.Maximize(0)
        obj_params = None
    else:
        obj_params = {b: make_param(prog.blocks[b]) for b in sorted(prog.objective)}
        objective = cp.Maximize(
            cp.sum([real_trace(P, b) for b, P in obj_params.items()])
        )
    problem = cp.Problem(objective, constraints)
    cache[key] = (problem, Xs, obj_params, cons_params)
    return cache[key]


def _load_values(prog: ConeProgram, obj_params, cons_params) -> float:
    """Normalize data into the compiled parameters; return objective scale."""

    def as_param_value(A, n):
        A = _hermitize(A)
        return A.real if n == 1 else A

    obj_scale = 1.0
    if prog.objective is not None:
        obj_scale = max(
            (np.abs(np.asarray(C)).max() for C in prog.objective.values()), default=1.0
        )
        obj_scale = obj_scale if obj_scale > 0 else 1.0
        for b, P in obj_params.items():
            P.value = as_param_value(np.asarray(prog.objective[b]) / obj_scale, prog.blocks[b])
    scales = []
    for cons, (mats, rhs) in zip(prog.constraints, cons_params):
        s = max(max(np.abs(np.asarray(A)).max() for A in cons.mats.values()), abs(cons.rhs))
        s = s if s > 0 else 1.0
        scales.append(s)
        for b, P in mats.items():
            P.value = as_param_value(np.asarray(cons.mats[b]) / s, prog.blocks[b])
        rhs.value = cons.rhs / s
    return obj_scale


def _verify(prog: ConeProgram, X: tuple[np.ndarray, ...]) -> str | None:
    """Independent residual check; returns a message on violation."""
    for b, (Xb, n) in enumerate(zip(X, prog.blocks)):
        w = np.linalg.eigvalsh(Xb)
        lam_max = max(w[-1], 0.0)
        if w[0] < -PSD_TOL * max(lam_max, 1.0):
            return f"block {b} not PSD: lambda_min={w[0]:.3e}"
        if prog.diag_one and np.abs(np.real(np.diag(Xb)) - 1.0).max() > DIAG_TOL:
            return f"block {b} diagonal off unit"
    for i, cons in enumerate(prog.constraints):
        s = max(max(np.abs(np.asarray(A)).max() for A in cons.mats.values()), abs(cons.rhs))
        s = s if s > 0 else 1.0
        val = sum(float(np.real(np.trace(np.asarray(cons.mats[b]) @ X[b]))) for b in cons.mats)
        resid = (val - cons.rhs) / s
        if cons.sense == "<=" and resid > CONSTRAINT_TOL:
            return f"constraint {i} violated by {resid:.3e}"
        if cons.sense == "==" and abs(resid) > CONSTRAINT_TOL:
            return f"constraint {i} off by {resid:.3e}"
    return None


def solve_sdp(prog: ConeProgram, eps: float = 1e-8, max_iters: int = 200_000) -> SdpResult:
    """Solve the block SDP; statuses are 'optimal', 'infeasible', or
    'numerical_failure'.  Feasibility problems report value 0.0.

    Data is normalized per constraint before the solve, and the result is
    re-verified against the contract tolerances; a verification failure
    triggers one tighter re-solve before giving up.
    """
    import cvxpy as cp

    problem, Xs, obj_params, cons_params = _compiled(prog)
    obj_scale = _load_values(prog, obj_params, cons_params)

    detail = ""
    candidate = None
    cand_value = None
    for attempt, (cur_eps, iters) in enumerate(((eps, max_iters), (eps * 1e-2, max_iters * 2))):
        try:
            # warm starts would couple a solve to its predecessors and break
            # run-to-run determinism
            problem.solve(solver="SCS", eps=cur_eps, max_iters=iters, warm_start=False)
        except (cp.SolverError, Exception) as exc:  # solver blowups -> failure status
            if isinstance(exc, KeyboardInterrupt):
                raise
            return SdpResult(candidate, "numerical_failure", cand_value, detail=str(exc))
        if problem.status in ("infeasible", "infeasible_inaccurate"):
            return SdpResult(None, "infeasible", None)
        if problem.status in ("unbounded", "unbounded_inaccurate"):
            return SdpResult(None, "numerical_failure", None, detail="unbounded objective")
        if problem.status not in ("optimal", "optimal_inaccurate"):
            return SdpResult(candidate, "numerical_failure", cand_value, detail=str(problem.status))
        X = tuple(_hermitize(Xv.value) for Xv in Xs)
        value = 0.0 if prog.objective is None else float(problem.value) * obj_scale
        bad = _verify(prog, X)
        if bad is None:
            return SdpResult(X, "optimal", value)
        candidate, cand_value, detail = X, value, bad
    return SdpResult(candidate, "numerical_failure", cand_value, detail=detail)


# ---------------------------------------------------------------------------
# convex-quadratic feasibility


@dataclass(frozen=True)
class QuadConstraint:
    """a . x >= sum_j c_j x_j^2 + d  with c >= 0 (convex)."""

    a: np.ndarray
    c: np.ndarray
    d: float


@dataclass(frozen=True)
class QuadFeasibility:
    """Nonnegative variables in [lb, ub] under quadratic rows and
    nonnegative linear budget rows g . x <= h."""

    lb: np.ndarray
    ub: np.ndarray
    quads: tuple[QuadConstraint, ...] = ()
    linear_leq: tuple[tuple[np.ndarray, float], ...] = ()

    def __post_init__(self):
        lb = np.asarray(self.lb, dtype=float)
        ub = np.asarray(self.ub, dtype=float)
        if lb.shape != ub.shape:
            raise ValueError("lb/ub shape mismatch")
        if np.any(lb < 0):
            raise ValueError("variables are nonnegative; lb must be >= 0")
        for q in self.quads:
            if np.any(np.asarray(q.c) < -0.0):
                raise ValueError("quadratic coefficients must be nonnegative")


def _monotone_structure(prob: QuadFeasibility) -> list[int] | None:
    """Return per-quad supported variable indices if the least-element
    iteration applies: exactly one positive linear coefficient per row,
    no curvature on its own support, nonnegative budget rows."""
    supports = []
    for q in prob.quads:
        pos = np.flatnonzero(np.asarray(q.a) > 0)
        if len(pos) != 1:
            return None
        s = int(pos[0])
        if np.asarray(q.c)[s] != 0:
            return None
        supports.append(s)
    for g, _ in prob.linear_leq:
        if np.any(np.asarray(g) < 0):
            return None
    return supports


def _least_element(prob: QuadFeasibility, supports: list[int]):
    lb = np.asarray(prob.lb, dtype=float)
    ub = np.asarray(prob.ub, dtype=float)
    x = lb.copy()
    n = len(x)
    for _ in range(50 * max(n, len(prob.quads), 1)):
        changed = False
        for q, s in zip(prob.quads, supports):
            a = np.asarray(q.a, dtype=float)
            c = np.asarray(q.c, dtype=float)
            rhs = q.d + float(c @ (x * x))
            others = float(a @ x) - a[s] * x[s]
            need = (rhs - others) / a[s]
            if need > ub[s] + 1e-9 * max(1.0, abs(ub[s])):
                return None, "infeasible"
            if need > x[s] + 1e-15 * max(1.0, abs(x[s])):
                x[s] = need
                changed = True
        if not changed:
            break
    return x, "feasible"


def _phase_one(prob: QuadFeasibility):
    """Generic fallback: minimize the worst violation with SLSQP."""
    from scipy.optimize import minimize

    lb = np.asarray(prob.lb, dtype=float)
    ub = np.asarray(prob.ub, dtype=float)
    n = len(lb)

    def violations(x):
        vals = []
        for q in prob.quads:
            vals.append(float(np.asarray(q.c) @ (x * x)) + q.d - float(np.asarray(q.a) @ x))
        for g, h in prob.linear_leq:
            vals.append(float(np.asarray(g) @ x) - h)
        return np.array(vals) if vals else np.zeros(1)

    scale = np.array(
        [
            max(
                np.abs(q.a).max(initial=0.0),
                np.abs(q.c).max(initial=0.0),
                abs(q.d),
                1e-30,
            )
            for q in prob.quads
        ]
        + [max(np.abs(g).max(initial=0.0), abs(h), 1e-30) for g, h in prob.linear_leq]
        or [1.0]
    )

    x0 = np.clip((lb + np.minimum(ub, lb + 1.0)) / 2.0, lb, ub)
    z0 = np.concatenate([x0, [max((violations(x0) / scale).max(), 0.0) + 1.0]])
    bounds = [(float(l), float(u)) for l, u in zip(lb, ub)] + [(None, None)]
    cons = [
        {
            "type": "ineq",
            "fun": lambda z, i=i: z[-1] - violations(z[:n])[i] / scale[i],
        }
        for i in range(len(scale))
    ]
    res = minimize(
        lambda z: z[-1],
        z0,
        method="SLSQP",
        bounds=bounds,
        constraints=cons,
        options={"maxiter": 400, "ftol": 1e-12},
    )
    if not res.success:
        return None, "numerical_failure"
    if res.x[-1] <= 1e-9:
        return np.clip(res.x[:n], lb, ub), "feasible"
    return None, "infeasible"


def solve_quad_feasibility(prob: QuadFeasibility):
    """Decide feasibility; on success return the least-resource feasible
    point (quadratic rows tight, every other constraint holding within
    1e-8 absolute on its own scale)."""
    lb = np.asarray(prob.lb, dtype=float)
    ub = np.asarray(prob.ub, dtype=float)
    if np.any(lb > ub + 1e-15):
        return None, "infeasible"
    supports = _monotone_structure(prob)
    if supports is not None:
        x, status = _least_element(prob, supports)
        if status != "feasible":
            return None, status
        x = np.minimum(x, ub)
        for g, h in prob.linear_leq:
            s = max(np.abs(g).max(initial=0.0), abs(h), 1e-30)
            if (float(np.asarray(g) @ x) - h) / s > 1e-12:
                return None, "infeasible"
        return x, "feasible"
    return _phase_one(prob)


# ---------------------------------------------------------------------------
# rank-one recovery


def gaussian_randomization(X: np.ndarray, C: int, projector, scorer, rng) -> np.ndarray:
    """Recover a vector from a PSD matrix by scored Gaussian sampling.

    Draws C samples v ~ CN(0, X), maps each through ``projector`` onto the
    feasible manifold, and keeps the best under ``scorer`` (larger is
    better; -inf marks infeasible).  The projected principal eigenvector
    is always scored as a baseline candidate, and when X is numerically
    rank-one (lambda_2/lambda_1 < 1e-9) it is returned directly without
    sampling.  Deterministic for a given generator state.
    """
    X = _hermitize(X)
    n = X.shape[0]
    w, U = np.linalg.eigh(X)
    w = np.maximum(w, 0.0)
    principal = U[:, -1] if w[-1] > 0 else np.eye(n, dtype=complex)[:, 0]
    v0 = projector(principal)
    if n == 1 or w[-1] == 0 or (n > 1 and w[-2] / w[-1] < RANK_ONE_RATIO):
        if scorer(v0) == -np.inf:
            raise ExtractionError("principal direction of a rank-one matrix is infeasible")
        return v0

    best, best_score = None, -np.inf
    s0 = scorer(v0)
    if s0 > best_score:
        best, best_score = v0, s0
    factor = U * np.sqrt(w)[None, :]
    for _ in range(int(C)):
        z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
        cand = projector(factor @ z)
        s = scorer(cand)
        if s > best_score:
            best, best_score = cand, s
    if best is None or best_score == -np.inf:
        raise ExtractionError(f"all {C} randomization samples were infeasible")
    return best


# ---------------------------------------------------------------------------
# problem dumps (debugging / cross-solver comparison)


def dump_cone_program(prog: ConeProgram, path) -> None:
    lines = [
        "cone-program v1",
        "blocks " + " ".join(str(n) for n in prog.blocks),
        f"diag_one {int(prog.diag_one)}",
    ]

    def emit(tag, mats):
        for b in sorted(mats):
            A = np.asarray(mats[b], dtype=complex)
            lines.append(f"{tag} block {b}")
            for v in A.ravel():
                lines.append(f"{float(v.real)!r} {float(v.imag)!r}")

    if prog.objective is not None:
        lines.append(f"objective {len(prog.objective)}")
        emit("obj", prog.objective)
    else:
        lines.append("objective none")
    lines.append(f"constraints {len(prog.constraints)}")
    for cons in prog.constraints:
        lines.append(f"constraint {cons.sense} {float(cons.rhs)!r} {len(cons.mats)}")
        emit("mat", cons.mats)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_cone_program(path) -> ConeProgram:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if lines[0] != "cone-program v1":
        raise ValueError("unrecognized dump header")
    blocks = tuple(int(v) for v in lines[1].split()[1:])
    diag_one = bool(int(lines[2].split()[1]))
    idx = 3

    def read_mat(b):
        nonlocal idx
        n = blocks[b]
        vals = []
        for _ in range(n * n):
            re, im = lines[idx].split()
            vals.append(complex(float(re), float(im)))
            idx += 1
        return np.array(vals, dtype=complex).reshape(n, n)

    objective = None
    head = lines[idx].split()
    idx += 1
    if head[1] != "none":
        objective = {}
        for _ in range(int(head[1])):
            _, _, b = lines[idx].split()
            idx += 1
            objective[int(b)] = read_mat(int(b))
    n_cons = int(lines[idx].split()[1])
    idx += 1
    constraints = []
    for _ in range(n_cons):
        _, sense, rhs, n_mats = lines[idx].split()
        idx += 1
        mats = {}
        for _ in range(int(n_mats)):
            _, _, b = lines[idx].split()
            idx += 1
            mats[int(b)] = read_mat(int(b))
        constraints.append(TraceConstraint(mats=mats, sense=sense, rhs=float(rhs)))
    return ConeProgram(
        blocks=blocks, objective=objective, constraints=tuple(constraints), diag_one=diag_one
    )
