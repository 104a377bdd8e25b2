"""Worst-case error envelopes from coefficient bounds alone.

Everything here is an explicit function of the coefficient sizes
(c_mu, c_psi), the horizon, and the quadrature order; no solve is
needed.  Three ingredients:

  * a chain-versus-diffusion envelope, order sqrt(h), from the Euler
    displacement (``em_bound``),
  * a Gaussian-replacement envelope, order h^((M-1)/2M), from the first
    quadrature moment the rule misses (``gh_bound``),
  * tail weights and a truncation allowance bounding what restricting
    the domain to [0, rho] can cost (``truncation_allowance``).

The constants are crude by design: they are fully explicit, monotone in
the inputs, and meant to dominate the observed errors, not to hug them.
"""

import math
from dataclasses import dataclass
from pathlib import Path

from .quadrature import double_factorial, moment_defect

#: summed tail terms below this are dropped
_TAIL_CUTOFF = 1.0e-16
_TAIL_MAX_TERMS = 10_000_000


@dataclass(frozen=True)
class ConstantSet:
    """Coefficient sizes plus the derived constants of the error analysis.

    ``drift_bound`` and ``vol_bound`` are the scanned sups of the drift
    and volatility coefficients (per unit state); the properties below
    are the explicit constants built from them.
    """

    drift_bound: float
    vol_bound: float
    horizon: float

    @property
    def growth_rate(self):
        """c_mu^2 T + c_psi^2, the exponential rate of second moments."""
        return self.drift_bound**2 * self.horizon + self.vol_bound**2

    def step_variance(self, dt):
        """c_mu^2 dt + 4 c_psi^2, scale of one conditional squared increment."""
        return self.drift_bound**2 * dt + 4.0 * self.vol_bound**2

    def running_square(self, x):
        """Bound on the running squared state from start x.

        3 (x^2 + 2 k2(T) T) e^{6 k2(T) T} with k2 the step variance scale.
        """
        k2 = self.step_variance(self.horizon)
        return 3.0 * (x * x + 2.0 * k2 * self.horizon) * math.exp(6.0 * k2 * self.horizon)

    def power_moment_rate(self, order):
        """Growth rate of the 2M-th state moment.

        2M c1 2^{2M} + (2M (2M - 1)/2) c1^2 2^{2M-2}, c1 the larger
        coefficient bound; used only by the full-growth envelope.
        """
        two_m = 2 * order
        c1 = max(self.drift_bound, self.vol_bound)
        return two_m * c1 * 2.0**two_m + 0.5 * two_m * (two_m - 1) * c1 * c1 * 2.0 ** (two_m - 2)

    @property
    def defect_envelope(self):
        """sqrt(3 + 9 k1 T e^{3 k1 T}), carrying one-step defects to the horizon."""
        k1 = self.growth_rate
        return math.sqrt(3.0 + 9.0 * k1 * self.horizon * math.exp(3.0 * k1 * self.horizon))


def constant_set(bounds, horizon):
    """ConstantSet from scanned CoefficientBounds."""
    if horizon <= 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    return ConstantSet(drift_bound=bounds.drift, vol_bound=bounds.vol, horizon=float(horizon))


def em_bound(step, x, lipschitz, constants, general=False):
    """Lipschitz-weighted distance between the chain and its diffusion.

    Order sqrt(step).  The default form keeps the quadratic dependence
    on the start state explicit; the general form trades it for blanket
    constants that also cover state-dependent coefficients, at the
    price of being much larger.
    """
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    k1 = constants.growth_rate
    t = constants.horizon
    if general:
        body = (
            8.0
            * k1
            * (1.0 + 2.0 * constants.step_variance(step))
            * (1.0 + constants.running_square(x))
            * (1.0 + 8.0 * k1 * t * math.exp(8.0 * k1 * t))
        )
    else:
        body = (
            24.0
            * k1
            * t
            * constants.vol_bound**2
            * x
            * x
            * (1.0 + 4.0 * k1 * t * math.exp(4.0 * k1 * t))
        )
    return lipschitz * math.sqrt(body) * math.sqrt(step)


def gh_bound(step, x, rule, lipschitz, constants, full_growth=False):
    """One-step Gaussian-replacement error accumulated over the horizon.

    The rule is exact through degree 2M - 1, so the defect starts at the
    2M-th moment of the branch factors; collecting powers of sqrt(step)
    leaves order step^((M-1)/2M) with the coefficient below.  The
    default polynomial growth 1 + x^{2M} matches the bounded-moment
    regime; ``full_growth`` switches to the variant that carries the
    2M-th moment growth rate explicitly.
    """
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    m = rule.order
    two_m = 2 * m
    moment = float(double_factorial(two_m - 1)) + moment_defect(rule)
    coeff = (2.0 ** (two_m - 1) / math.factorial(two_m)) * constants.vol_bound**two_m * moment
    if full_growth:
        k4 = constants.power_moment_rate(m)
        exponent = k4 * constants.horizon
        # the 2M-th moment rate clears the float exponent range from M = 4 on
        boost = math.inf if exponent > 709.0 else math.exp(exponent)
        growth = 1.0 + x**two_m * boost + exponent
    else:
        growth = 1.0 + x**two_m
    return (
        lipschitz
        * constants.defect_envelope
        * step ** ((m - 1.0) / (2.0 * m))
        * coeff
        * growth
    )


def _gaussian_tail_weight(log_ratio, drift_bound, vol_bound, horizon):
    # Large-deviation shape: the bound is informative only once the
    # barrier clears the drifted mean, below that it clamps to one.
    margin = max(0.0, log_ratio - drift_bound * horizon)
    exponent = -(3.0 / (8.0 * vol_bound**2 * horizon)) * margin * margin
    return min(1.0, 2.0 * math.exp(exponent))


def tail_weights(x, rho, c0, drift_bound, vol_bound, horizon):
    """Probability weights of leaving [c0/rho, rho] from start x.

    Returns (upper, lower): the weight of reaching level rho and the
    weight of falling under the scaled cutoff, each of the clamped form
    min(1, 2 exp(-(3 / (8 c_psi^2 T)) (log(level ratio) - c_mu T)^2)).
    """
    if x <= 0.0 or rho <= 0.0 or c0 <= 0.0:
        raise ValueError("tail weights need positive x, rho, c0")
    if vol_bound <= 0.0 or horizon <= 0.0:
        raise ValueError("tail weights need positive volatility bound and horizon")
    upper = _gaussian_tail_weight(math.log(rho / x), drift_bound, vol_bound, horizon)
    lower = _gaussian_tail_weight(math.log(rho / (c0 * x)), drift_bound, vol_bound, horizon)
    return upper, lower


def truncation_allowance(x, utility, rho, c0, constants):
    """What restricting the domain to [0, rho] can cost at state x.

    Small-wealth part: the utility at the scaled-down cutoff times the
    weight of falling under it.  Large-wealth part: the marginal
    utility at rho times the summed tail over integer barriers from
    floor(rho) up, truncated once terms drop below 1e-16.  A truncated
    utility has zero slope at rho, killing the second part.
    """
    if x <= 0.0:
        raise ValueError(f"state must be positive, got {x}")
    _, lower = tail_weights(x, rho, c0, constants.drift_bound, constants.vol_bound, constants.horizon)
    total = float(utility.evaluate(c0 / rho)) * lower
    slope = float(utility.derivative(rho))
    if slope > 0.0:
        tail_sum = 0.0
        level = max(int(math.floor(rho)), 1)
        for _ in range(_TAIL_MAX_TERMS):
            term = _gaussian_tail_weight(
                math.log(level / x), constants.drift_bound, constants.vol_bound, constants.horizon
            )
            if term < _TAIL_CUTOFF:
                break
            tail_sum += term
            level += 1
        total += slope * tail_sum
    return total


def envelope_constants(primal_constants, dual_constants, rule):
    """Per-unit-growth coefficients for the two-sided gap bounds.

    For each side: the chain envelope coefficient at unit state, plus
    the quadrature replacement coefficient, plus one unit covering
    space interpolation.  The caller applies the growth factor
    1 + s^{2M} and the rate step^((M-1)/2M) + spacing/step, which both
    dominate the per-state forms of ``em_bound`` and ``gh_bound`` for
    steps below one.
    """

    def per_side(c):
        k1 = c.growth_rate
        t = c.horizon
        em_unit = math.sqrt(
            24.0 * k1 * t * c.vol_bound**2 * (1.0 + 4.0 * k1 * t * math.exp(4.0 * k1 * t))
        )
        two_m = 2 * rule.order
        moment = float(double_factorial(two_m - 1)) + moment_defect(rule)
        gh_unit = (
            c.defect_envelope
            * (2.0 ** (two_m - 1) / math.factorial(two_m))
            * c.vol_bound**two_m
            * moment
        )
        return em_unit + gh_unit + 1.0

    return per_side(primal_constants), per_side(dual_constants)


def write_bound_table_csv(path, rows, header=None):
    """Dump ``h,em_bound,gh_bound,empirical_error,duality_gap`` rows."""
    lines = []
    if header:
        lines.append(f"# {header}")
    lines.append("h,em_bound,gh_bound,empirical_error,duality_gap")
    for row in rows:
        h, em, gh, err, gap = row
        lines.append(f"{h:.15e},{em:.15e},{gh:.15e},{err:.15e},{gap:.15e}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
