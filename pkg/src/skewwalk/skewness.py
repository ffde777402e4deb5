"""
Skewness of the scaling limit.

``gamma_exact`` and ``rho_limit`` turn the two centred exit laws of the
membrane into the skewness parameter and the excursion-sign probability
``p = (1 + gamma)/2``.  ``rho_closed_form`` and ``rho_direct_solve`` are two
independent routes to the finite-n probabilities ``rho_i`` of reaching
``+C_n`` before leaving ``[-C_n, C_n]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .membrane import JumpPmf, MembraneSpec, exit_law
from .skewbm import SkewBmParams, exit_probability_up


class DegenerateModelError(ValueError):
    """The walk never crosses the membrane; the limit is not skew BM."""


def _exactify(pmf: JumpPmf) -> JumpPmf:
    return JumpPmf(pmf.offsets, tuple(Fraction(w) for w in pmf.masses))


def _prepare(xi_plus, xi_minus, exact):
    if exact:
        return _exactify(xi_plus), _exactify(xi_minus)
    return xi_plus, xi_minus


def gamma_exact(xi_plus: JumpPmf, xi_minus: JumpPmf, exact=False):
    """Skewness of the limit from the exit laws at +m and -m.

    Rational masses (or ``exact=True``) give an exact ``Fraction``.

    Raises
    ------
    DegenerateModelError
        If ``E|xi+| P(xi- > 0) + E|xi-| P(xi+ < 0)`` vanishes.
    """
    xp, xm = _prepare(xi_plus, xi_minus, exact)
    up = xm.prob_pos()
    down = xp.prob_neg()
    den = xp.abs_mean() * up + xm.abs_mean() * down
    if den == 0:
        raise DegenerateModelError("walk never crosses the membrane (zero denominator)")
    return (xp.mean() * up + xm.mean() * down) / den


def rho_limit(xi_plus: JumpPmf, xi_minus: JumpPmf, exact=False):
    """Limit of rho_{+-m} as n grows: the probability p of a positive excursion."""
    xp, xm = _prepare(xi_plus, xi_minus, exact)
    down = xp.prob_neg()
    up = xm.prob_pos()
    den = down * xm.abs_mean() + up * xp.abs_mean()
    if den == 0:
        raise DegenerateModelError("walk never crosses the membrane (zero denominator)")
    return (down * xm.pos_part_mean() + up * xp.pos_part_mean()) / den


def boundary_level(n: int, alpha) -> int:
    """C_n = ceil(alpha * sqrt(n)), computed in exact arithmetic."""
    if n <= 0 or not alpha > 0:
        raise ValueError("need n > 0 and alpha > 0")
    target = Fraction(alpha) ** 2 * n
    c = math.isqrt(math.floor(target))
    while c * c < target:
        c += 1
    return c


@dataclass(frozen=True, eq=False)
class RhoSystem:
    """Probabilities ``rho_i`` for ``-C_n <= i <= C_n``.

    ``rho[i + c_n]`` is the value at state ``i``.  The closed form does not
    determine the states strictly inside the membrane; those are NaN there.
    """

    m: int
    c_n: int
    rho: np.ndarray
    method: str
    xi_plus_trunc: JumpPmf | None = None
    xi_minus_trunc: JumpPmf | None = None
    a_n: float | None = None
    n: int | None = None
    alpha: float | None = None

    @property
    def c_n_prime(self):
        return self.c_n - self.m

    @property
    def states(self):
        return np.arange(-self.c_n, self.c_n + 1)

    def rho_at(self, i):
        if abs(i) > self.c_n:
            return 0.0
        return float(self.rho[i + self.c_n])

    @property
    def rho_m(self):
        return self.rho_at(self.m)

    @property
    def rho_minus_m(self):
        return self.rho_at(-self.m)

    @property
    def truncation_deficit(self):
        """Mass of xi+ and xi- removed by truncation at C_n'."""
        if self.xi_plus_trunc is None:
            return None
        return float(self.xi_plus_trunc.deficit), float(self.xi_minus_trunc.deficit)

    def collinearity_deviation(self) -> float:
        """Largest distance of (i, rho_i) from the chord on each half-axis."""
        k = np.arange(self.c_n_prime + 1) / self.c_n_prime
        upper = self.rho[self.c_n + self.m:]
        lower = self.rho[: self.c_n - self.m + 1][::-1]
        line_up = self.rho_m * (1 - k) + k
        line_down = self.rho_minus_m * (1 - k)
        return float(max(np.max(np.abs(upper - line_up)), np.max(np.abs(lower - line_down))))

    def is_monotone(self, tol=1e-12) -> bool:
        """Nondecreasing on each outer half-axis.  Inside the membrane, and
        between -m and m, no order is implied."""
        upper = self.rho[self.c_n + self.m:]
        lower = self.rho[: self.c_n - self.m + 1]
        return bool(np.all(np.diff(upper) >= -tol) and np.all(np.diff(lower) >= -tol))

    def scale_function_error(self, gamma) -> float:
        """sup over m <= |i| <= C_n of |rho_i - P(W_gamma exits [-alpha, alpha] up | i/sqrt(n))|."""
        if self.n is None or self.alpha is None:
            raise ValueError("system carries no scaling (n, alpha)")
        params = SkewBmParams(float(gamma))
        i = self.states
        outer = np.abs(i) >= self.m
        x = np.clip(i[outer] / math.sqrt(self.n), -self.alpha, self.alpha)
        target = np.array([exit_probability_up(params, self.alpha, float(a1)) for a1 in x])
        return float(np.max(np.abs(self.rho[outer] - target)))


def _check_levels(m, n, alpha):
    c_n = boundary_level(n, alpha)
    if c_n <= m:
        raise ValueError(f"C_n = {c_n} must exceed the membrane half-width m = {m}")
    return c_n


def rho_closed_form(xi_plus: JumpPmf, xi_minus: JumpPmf, m: int, n: int, alpha, exact=False):
    """Closed-form rho_{+m}, rho_{-m} and the full line-filled system.

    Exit jumps are truncated at ``C_n' = C_n - m`` without renormalising;
    a jump beyond ``+-C_n`` contributes zero.  Writing ``C = C_n'``,
    ``b = P(xi+~ < 0)``, ``a' = P(xi-~ > 0)``, ``u, u'`` and ``v, v'`` the
    positive- and negative-part means, and ``l, l'`` the truncated masses::

        rho_m  = (C b u' + C a' u + A + C u l') / D
        rho_-m = (C b u' + C a' u     + C u' l) / D
        D = C b E|xi-~| + C a' E|xi+~| + A
            + C l (C a' - v') + C l' (C b + u) + C^2 l l'
        A = v u' - u v'

    With nothing truncated the loss terms vanish.

    Returns
    -------
    (rho_m, rho_minus_m, RhoSystem)
    """
    c_n = _check_levels(m, n, alpha)
    C = c_n - m
    xp, xm = _prepare(xi_plus, xi_minus, exact)
    tp, tm = xp.truncate(C), xm.truncate(C)
    if len(tp) == 0 or len(tm) == 0:
        raise DegenerateModelError("truncation removed all exit mass")
    lp, lm = tp.deficit, tm.deficit
    b, a2 = tp.prob_neg(), tm.prob_pos()
    u, v = tp.pos_part_mean(), tp.neg_part_mean()
    u2, v2 = tm.pos_part_mean(), tm.neg_part_mean()
    a_n = v * u2 - u * v2
    num_plus = C * b * u2 + C * a2 * u + a_n + C * u * lm
    num_minus = C * b * u2 + C * a2 * u + C * u2 * lp
    den = (C * b * tm.abs_mean() + C * a2 * tp.abs_mean() + a_n
           + C * lp * (C * a2 - v2) + C * lm * (C * b + u) + C * C * lp * lm)
    if den == 0:
        raise DegenerateModelError("walk never crosses the membrane (zero denominator)")
    rho_m = num_plus / den
    rho_minus_m = num_minus / den

    rho = np.full(2 * c_n + 1, np.nan)
    k = np.arange(C + 1)
    rho[c_n + m + k] = float(rho_m) * (1 - k / C) + k / C
    rho[c_n - m - k] = float(rho_minus_m) * (1 - k / C)
    system = RhoSystem(m, c_n, rho, "closed_form", tp, tm, a_n, n, float(alpha))
    return rho_m, rho_minus_m, system


def rho_direct_solve(spec: MembraneSpec, n: int, alpha) -> RhoSystem:
    """Assemble and solve the full (2 C_n + 1)-unknown system.

    Boundary rows fix rho_{C_n} = 1 and rho_{-C_n} = 0, fair-walk rows hold
    outside the membrane, and each membrane state uses its own exit law.
    """
    m = spec.m
    c_n = _check_levels(m, n, alpha)
    size = 2 * c_n + 1
    rows, cols, vals = [], [], []
    rhs = np.zeros(size)

    def put(r, c, w):
        rows.append(r)
        cols.append(c)
        vals.append(w)

    for i in range(-c_n, c_n + 1):
        r = i + c_n
        put(r, r, 1.0)
        if abs(i) == c_n:
            rhs[r] = 1.0 if i == c_n else 0.0
        elif abs(i) > m:
            put(r, r - 1, -0.5)
            put(r, r + 1, -0.5)
        else:
            law = exit_law(spec, start=i).law
            for d, w in zip(law.offsets, law.masses):
                j = d + m if d > 0 else d - m
                if abs(j) <= c_n:
                    put(r, j + c_n, -float(w))
    A = scipy.sparse.csc_matrix((vals, (rows, cols)), shape=(size, size))
    rho = scipy.sparse.linalg.spsolve(A, rhs)
    if not np.all(np.isfinite(rho)):
        raise DegenerateModelError("singular hitting-probability system")
    return RhoSystem(m, c_n, np.asarray(rho), "direct", n=n, alpha=float(alpha))
