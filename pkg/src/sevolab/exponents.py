"""Exponent calculus for the coupled damped sigma-evolution system.

Everything here is closed-form arithmetic on the chain of power
nonlinearities p = (p_1, ..., p_k): the cyclic coupling matrix, its
resolvent vector gamma, the classification of the system against the
threshold n/(2*sigma), the loss-of-decay sequence, the lifespan
bookkeeping sequences, and the Gagliardo-Nirenberg interpolation
exponent.  No grids and no transforms; this module is the ground truth
that every experiment in the harness is fitted against.

Component ell is forced by |u_{ell-1}|^{p_ell}, component 1 by
|u_k|^{p_1}, so the coupling matrix P has p_1 in the top-right corner
and p_ell on the subdiagonal.  gamma solves (P - I) gamma = (1, ..., 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConditionsUnmet, DomainError, NotSubcritical, SingularSystem

# |max gamma - n/(2 sigma)| below this is treated as critical (open regime).
CRITICAL_TOL = 1e-12

SUPERCRITICAL = "Supercritical"
CRITICAL = "Critical"
SUBCRITICAL = "Subcritical"


@dataclass(frozen=True)
class SystemParams:
    """Dimension, fractional order, component count and exponent chain."""

    n: int          # space dimension >= 1
    sigma: float    # fractional order of (-Laplace)^sigma, >= 1
    k: int          # number of components, >= 2
    p: tuple        # exponents (p_1, ..., p_k), each > 1

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(x) for x in self.p))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not self.sigma >= 1:
            raise ValueError(f"sigma must be >= 1, got {self.sigma}")
        if int(self.k) != self.k or self.k < 2:
            raise ValueError(f"k must be an integer >= 2, got {self.k}")
        if len(self.p) != self.k:
            raise ValueError(f"need {self.k} exponents, got {len(self.p)}")
        if any(x <= 1 for x in self.p):
            raise SingularSystem(
                f"every exponent must exceed 1, got p={self.p}"
            )

    @property
    def fujita_ratio(self) -> float:
        """The threshold n/(2*sigma) all exponent tests compare against."""
        return self.n / (2.0 * self.sigma)


@dataclass(frozen=True)
class GammaVector:
    """Solution of (P - I) gamma = 1 plus argmax bookkeeping.

    argmax_index is 1-based (component number).  When the maximal entry
    is not the last one, `rotation` gives the cyclic relabeling (new
    component ell = old component ell + rotation, indices mod k) that
    moves the argmax to position k, and relabeled_p is the exponent
    chain after that rotation.  rotation == 0 means no relabeling needed.
    """

    gamma: tuple
    argmax_index: int
    residual: float
    rotation: int
    relabeled_p: tuple

    @property
    def max(self) -> float:
        return self.gamma[self.argmax_index - 1]


def coupling_matrix(params: SystemParams) -> np.ndarray:
    """Cyclic coupling matrix P: row 1 holds p_1 in column k, row ell
    holds p_ell in column ell-1."""
    k = params.k
    P = np.zeros((k, k))
    P[0, k - 1] = params.p[0]
    for ell in range(1, k):
        P[ell, ell - 1] = params.p[ell]
    return P


def compute_gamma(params: SystemParams) -> GammaVector:
    """Solve (P - I) gamma = (1, ..., 1) by dense LU.

    k stays tiny (<= 64 supported), so a dense solve with partial
    pivoting is the whole story.  The residual of the solve is checked
    against 1e-12 and reported.
    """
    if params.k > 64:
        raise ValueError("component counts above 64 are not supported")
    A = coupling_matrix(params) - np.eye(params.k)
    rhs = np.ones(params.k)
    prod = float(np.prod(params.p))
    if abs(prod - 1.0) < 1e-14:
        raise SingularSystem("product of exponents equals 1; P - I singular")
    gamma = np.linalg.solve(A, rhs)
    residual = float(
        np.max(np.abs(A @ gamma - rhs)) / max(1.0, float(np.max(np.abs(gamma))))
    )
    if residual > 1e-12:
        raise SingularSystem(f"linear solve residual {residual:.3e} too large")
    # Ties broken by the smallest index; argmax reported 1-based.
    imax = int(np.argmax(gamma))
    rotation = (imax + 1) % params.k
    relabeled = tuple(
        params.p[(ell + rotation) % params.k] for ell in range(params.k)
    )
    return GammaVector(
        gamma=tuple(float(g) for g in gamma),
        argmax_index=imax + 1,
        residual=residual,
        rotation=rotation,
        relabeled_p=relabeled,
    )


def gamma_max_closed_form(params: SystemParams) -> float:
    """Closed form for the last gamma component:

        (1 + p_k + p_{k-1} p_k + ... + p_2 p_3 ... p_k) / (p_1 ... p_k - 1)

    Equals max(gamma) whenever component k attains the max.
    """
    p = params.p
    k = params.k
    num = 1.0
    tail = 1.0
    # tail accumulates p_k, p_{k-1} p_k, ..., p_2 ... p_k
    for j in range(k - 1, 0, -1):
        tail *= p[j]
        num += tail
    denom = float(np.prod(p)) - 1.0
    if abs(denom) < 1e-14:
        raise SingularSystem("product of exponents equals 1; gamma undefined")
    return num / denom


def classify(params: SystemParams, tol: float = CRITICAL_TOL) -> str:
    """Compare max(gamma) against n/(2*sigma).

    Below the threshold the system is supercritical (small data exist
    globally), above it subcritical (blow-up), equal is the critical
    borderline, which is open territory: the report carries a note and
    nothing downstream will claim a verdict there.
    """
    gap = compute_gamma(params).max - params.fujita_ratio
    if abs(gap) <= tol:
        return CRITICAL
    return SUBCRITICAL if gap > 0 else SUPERCRITICAL


def check_global_conditions(params: SystemParams) -> dict:
    """Independently report each hypothesis of the small-data global
    existence result, plus the blow-up threshold and the regime flag of
    the lifespan lower bound.

    Keys:
      fujita_p1          p_1 <= 1 + 2 sigma / n
      chain_products     (p_1...p_l - 1)/(1 + p_l + ... + p_2...p_l) <= 2 sigma / n
                         for l = 2..k-1 (vacuous for k = 2)
      low_dim            n <= 2 sigma
      p_min_two          every p_l >= 2
      gamma_supercritical  max gamma < n/(2 sigma), strict
      gamma_subcritical    max gamma > n/(2 sigma), strict (blow-up side)
      lifespan_lower_scope p_min_two and low_dim (regime of the lower
                           lifespan bound that the experiments cover)

    The chain bound is non-strict while the supercritical bound is
    strict; its boundary case is untested territory and is reported
    as-is.
    """
    p = params.p
    ratio = 2.0 * params.sigma / params.n  # = 1 / fujita_ratio
    flags = {}
    flags["fujita_p1"] = p[0] <= 1.0 + ratio
    chain_ok = True
    num = p[0]  # running product p_1 ... p_l
    den = 1.0   # running sum 1 + p_l + p_{l-1} p_l + ... + p_2...p_l
    for ell in range(1, params.k - 1):
        num *= p[ell]
        den = den * p[ell] + 1.0
        if (num - 1.0) / den > ratio:
            chain_ok = False
    flags["chain_products"] = chain_ok
    flags["low_dim"] = params.n <= 2.0 * params.sigma
    flags["p_min_two"] = min(p) >= 2.0
    gmax = compute_gamma(params).max
    flags["gamma_supercritical"] = gmax < params.fujita_ratio
    flags["gamma_subcritical"] = gmax > params.fujita_ratio
    flags["lifespan_lower_scope"] = flags["p_min_two"] and flags["low_dim"]
    return flags


def loss_of_decay_sequence(params: SystemParams, eps: float = 0.01) -> tuple:
    """Loss-of-decay sequence (eps_1, ..., eps_k), eps_k = 0.

    Recursion: eps_1 = 1 - (n/2sigma)(p_1 - 1) + eps and
    eps_l = 1 - (n/2sigma)(p_l - 1) + p_l eps_{l-1} for l = 2..k-1.
    The expanded closed form

        eps_l = (1 + p_l + ... + p_2...p_l)
                - (n/2sigma)(p_1...p_l - 1) + p_2...p_l * eps

    is evaluated independently and both are required to agree to 1e-12.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    p = params.p
    r = params.fujita_ratio
    k = params.k
    seq = [1.0 - r * (p[0] - 1.0) + eps]
    for ell in range(1, k - 1):
        seq.append(1.0 - r * (p[ell] - 1.0) + p[ell] * seq[-1])
    seq.append(0.0)

    # Independent expanded form, accumulated left to right.
    s = 1.0      # 1 + p_l + p_{l-1} p_l + ... + p_2...p_l
    q = p[0]     # p_1 p_2 ... p_l
    rtail = 1.0  # p_2 p_3 ... p_l
    expanded = [s - r * (q - 1.0) + rtail * eps]
    for ell in range(1, k - 1):
        s = 1.0 + p[ell] * s
        q *= p[ell]
        rtail *= p[ell]
        expanded.append(s - r * (q - 1.0) + rtail * eps)
    expanded.append(0.0)
    scale = max(1.0, max(abs(x) for x in seq))
    mismatch = max(abs(a - b) for a, b in zip(seq, expanded)) / scale
    if mismatch > 1e-12:
        raise AssertionError(
            f"loss-of-decay recursion and closed form disagree by {mismatch:.3e}"
        )
    return tuple(seq)


def alpha_beta_sequences(params: SystemParams) -> tuple:
    """Lifespan bookkeeping sequences (alpha_1..alpha_{k-1}, beta_1..beta_k).

    alpha_1 = 1 - (p_1 - 1) gamma_k,
    alpha_l = 1 - (p_l - 1) gamma_k + p_l alpha_{l-1} for l <= k-1,
    beta_1 = 1 - (n/2sigma)(p_1 - 1) - alpha_1,
    beta_l = -(n/2sigma)(p_l - 1) + (p_l - 1) gamma_k for l >= 2.

    All beta_l collapse to (p_l - 1)(gamma_k - n/2sigma); the identity is
    asserted here, and its sign is what makes every beta positive exactly
    on the subcritical side.  gamma_k means the maximal gamma component
    (relabeled when the argmax is not the last component).
    """
    p = params.p
    gk = compute_gamma(params).max
    r = params.fujita_ratio
    alpha = [1.0 - (p[0] - 1.0) * gk]
    for ell in range(1, params.k - 1):
        alpha.append(1.0 - (p[ell] - 1.0) * gk + p[ell] * alpha[-1])
    beta = [1.0 - r * (p[0] - 1.0) - alpha[0]]
    for ell in range(1, params.k):
        beta.append(-r * (p[ell] - 1.0) + (p[ell] - 1.0) * gk)
    for ell in range(params.k):
        ident = (p[ell] - 1.0) * (gk - r)
        if abs(beta[ell] - ident) > 1e-12 * max(1.0, abs(ident)):
            raise AssertionError(
                f"beta identity fails at component {ell + 1}: "
                f"{beta[ell]} vs {ident}"
            )
    return tuple(alpha), tuple(beta)


def predicted_decay(params: SystemParams, eps: float = 0.01) -> tuple:
    """Predicted decay exponents (L2 list, homogeneous-Sobolev list).

    Component ell of the L2 norm is predicted to decay like
    t^(-n/4sigma + eps_l) and the |D|^sigma norm like
    t^(-n/4sigma - 1/2 + eps_l), with eps_k = 0.  Only meaningful when
    the global existence hypotheses hold; otherwise ConditionsUnmet
    names the failing flags.
    """
    flags = check_global_conditions(params)
    needed = ("fujita_p1", "chain_products", "low_dim", "p_min_two",
              "gamma_supercritical")
    failed = [name for name in needed if not flags[name]]
    if failed:
        raise ConditionsUnmet(
            "global existence hypotheses fail: " + ", ".join(failed)
        )
    eps_seq = loss_of_decay_sequence(params, eps)
    base = -params.n / (4.0 * params.sigma)
    decay_l2 = tuple(base + e for e in eps_seq)
    decay_hs = tuple(base - 0.5 + e for e in eps_seq)
    return decay_l2, decay_hs


def lifespan_exponent(params: SystemParams) -> float:
    """Predicted exponent of the lifespan scaling T_eps ~ eps^exponent,

        exponent = -1 / (max gamma - n/(2 sigma)),

    defined only on the subcritical side."""
    if classify(params) != SUBCRITICAL:
        raise NotSubcritical(
            f"lifespan scaling needs a subcritical system, "
            f"got {classify(params)}"
        )
    return -1.0 / (compute_gamma(params).max - params.fujita_ratio)


def gn_theta(q: float, q1: float, q2: float, a: float, s: float,
             n: int) -> tuple:
    """Gagliardo-Nirenberg interpolation exponent and its validity flag.

        theta = (1/q1 - 1/q + a/n) / (1/q1 - 1/q2 + s/n)

    interpolates the |D|^a L^q norm between L^q1 and the |D|^s L^q2
    norm; the inequality is usable iff a/s <= theta <= 1.
    """
    for name, val in (("q", q), ("q1", q1), ("q2", q2)):
        if not (1.0 < val < math.inf):
            raise DomainError(f"{name} must lie in (1, inf), got {val}")
    if not s > 0:
        raise DomainError(f"s must be positive, got {s}")
    if not 0 <= a < s:
        raise DomainError(f"need 0 <= a < s, got a={a}, s={s}")
    if n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    denom = 1.0 / q1 - 1.0 / q2 + s / n
    if denom == 0:
        raise DomainError("degenerate interpolation: denominator vanishes")
    theta = (1.0 / q1 - 1.0 / q + a / n) / denom
    valid = (a / s) <= theta <= 1.0
    return theta, valid


@dataclass(frozen=True)
class ExponentReport:
    """Everything the experiments need to know about one parameter set."""

    params: SystemParams
    gamma: GammaVector
    classification: str
    epsilon_seq: tuple
    alpha_seq: tuple
    beta_seq: tuple
    decay_L2: tuple          # empty when hypotheses fail
    decay_Hsigma: tuple
    lifespan_exponent: float | None
    condition_flags: dict
    eps: float
    notes: tuple = field(default=())


def report(params: SystemParams, eps: float = 0.01) -> ExponentReport:
    """Assemble the full exponent report for one parameter set."""
    gamma = compute_gamma(params)
    cls = classify(params)
    eps_seq = loss_of_decay_sequence(params, eps)
    alpha, beta = alpha_beta_sequences(params)
    flags = check_global_conditions(params)
    notes = []
    if cls == CRITICAL:
        notes.append(
            "critical borderline max gamma = n/(2 sigma): behavior open, "
            "no verdict claimed"
        )
    if gamma.rotation != 0:
        notes.append(
            f"max gamma sits at component {gamma.argmax_index}; cyclic "
            f"relabeling by {gamma.rotation} puts it last (assumed harmless)"
        )
    try:
        decay_l2, decay_hs = predicted_decay(params, eps)
        if any(d >= 0 for d in decay_l2):
            notes.append(
                "eps so large a predicted L2 exponent is nonnegative; "
                "shrink eps"
            )
        if any(e <= 0 for e in eps_seq[: params.k - 1]):
            notes.append(
                "a loss-of-decay entry is nonpositive despite the "
                "hypotheses; shrink eps"
            )
    except ConditionsUnmet:
        decay_l2, decay_hs = (), ()
    try:
        life = lifespan_exponent(params)
    except NotSubcritical:
        life = None
    return ExponentReport(
        params=params,
        gamma=gamma,
        classification=cls,
        epsilon_seq=eps_seq,
        alpha_seq=alpha,
        beta_seq=beta,
        decay_L2=decay_l2,
        decay_Hsigma=decay_hs,
        lifespan_exponent=life,
        condition_flags=flags,
        eps=eps,
        notes=tuple(notes),
    )
