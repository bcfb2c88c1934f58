"""
Prospect Drive - Cumulative prospect theory
Value and probability-weighting functions, rank-dependent decision weights, the
expected-utility special case, and the two-action pass/yield specialization.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from .exceptions import NegativeUtilityError, UnsortedProspectError, ValidationError
from .models import CptParams, Decision, ValuationMode, WeightingMode

ArrayLike = Union[float, Sequence[float], np.ndarray]

PROBABILITY_TOLERANCE = 1e-9
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True, init=False)
class Prospect:
    """Discrete outcomes of one action as (utility, probability) pairs"""
    outcomes: Tuple[Tuple[float, float], ...]

    def __init__(self, outcomes: Sequence[Tuple[float, float]]):
        pairs = tuple((float(u), float(p)) for u, p in outcomes)
        if not pairs:
            raise ValidationError("a prospect needs at least one outcome", field="outcomes")
        probabilities = np.array([p for _, p in pairs])
        if not np.all(np.isfinite([u for u, _ in pairs])):
            raise ValidationError("prospect utilities must be finite", field="outcomes")
        if np.any(probabilities < 0) or np.any(probabilities > 1):
            raise ValidationError("prospect probabilities must lie in [0, 1]", field="outcomes")
        if abs(probabilities.sum() - 1.0) > PROBABILITY_TOLERANCE:
            raise ValidationError(
                f"prospect probabilities sum to {probabilities.sum()!r}, not 1", field="outcomes"
            )
        object.__setattr__(self, "outcomes", pairs)

    @property
    def utilities(self) -> np.ndarray:
        return np.array([u for u, _ in self.outcomes])

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.outcomes])

    def sorted(self) -> "Prospect":
        """Outcomes in ascending utility order (stable)"""
        return Prospect(sorted(self.outcomes, key=lambda outcome: outcome[0]))


@dataclass(frozen=True)
class DrivingUtilities:
    """Utilities of the three counterfactual outcomes of one frame"""
    u_pass_yield: float
    u_pass_nonyield: float
    u_yield: float

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.u_pass_yield, self.u_pass_nonyield, self.u_yield)

    def shifted(self, offset: float) -> "DrivingUtilities":
        return DrivingUtilities(
            self.u_pass_yield + offset, self.u_pass_nonyield + offset, self.u_yield + offset
        )


def _scalar_or_array(value: np.ndarray):
    return float(value) if value.ndim == 0 else value


def value_fn(u: ArrayLike, params: CptParams):
    """Concave over gains, convex and lambda-steeper over losses, relative to u0"""
    x = np.asarray(u, dtype=float) - params.u0
    gains = np.maximum(x, 0.0) ** params.alpha
    losses = np.maximum(-x, 0.0) ** params.beta
    return _scalar_or_array(np.where(x >= 0, gains, -params.lam * losses))


def weighting_fn(p: ArrayLike, exponent: float):
    """
    Inverse-S probability weighting p^g / (p^g + (1-p)^g)^(1/g).

    Exact at both endpoints and the identity for exponent 1.
    """
    prob = np.asarray(p, dtype=float)
    if np.any((prob < 0) | (prob > 1)) or np.any(np.isnan(prob)):
        raise ValidationError("probabilities must lie in [0, 1]", field="p")
    if not 0 < exponent <= 1:
        raise ValidationError(f"weighting exponent must lie in (0, 1], got {exponent}", field="exponent")
    if exponent == 1.0:
        return _scalar_or_array(prob.copy())
    num = prob ** exponent
    weighted = num / (num + (1.0 - prob) ** exponent) ** (1.0 / exponent)
    weighted = np.where(prob == 0.0, 0.0, np.where(prob == 1.0, 1.0, weighted))
    return _scalar_or_array(weighted)


def decision_weights(prospect: Prospect, params: CptParams) -> Tuple[List[float], List[float]]:
    """
    Rank-dependent weights of an ascending prospect.

    Gains are cumulated from the best outcome downwards with w+ (exponent gamma); losses from
    the worst outcome upwards with w- (exponent delta). Each outcome receives weight on one
    side only.
    """
    utilities = prospect.utilities
    descents = np.flatnonzero(np.diff(utilities) < 0)
    if descents.size:
        raise UnsortedProspectError(int(descents[0]) + 1)
    probabilities = prospect.probabilities
    n = len(utilities)
    is_gain = utilities >= params.u0
    pi_plus = [0.0] * n
    pi_minus = [0.0] * n

    gain_idx = np.flatnonzero(is_gain)
    if gain_idx.size:
        # tail mass from each gain to the best one
        tails = np.cumsum(probabilities[gain_idx][::-1])[::-1]
        tails = np.minimum(tails, 1.0)
        weighted = np.asarray(weighting_fn(tails, params.gamma), dtype=float)
        shifted = np.append(weighted[1:], 0.0)
        for i, w in zip(gain_idx, weighted - shifted):
            pi_plus[i] = float(w)

    loss_idx = np.flatnonzero(~is_gain)
    if loss_idx.size:
        heads = np.minimum(np.cumsum(probabilities[loss_idx]), 1.0)
        weighted = np.asarray(weighting_fn(heads, params.delta), dtype=float)
        shifted = np.insert(weighted[:-1], 0, 0.0)
        for i, w in zip(loss_idx, weighted - shifted):
            pi_minus[i] = float(w)

    return pi_plus, pi_minus


def prospect_value(
    prospect: Prospect, params: CptParams, mode: ValuationMode = ValuationMode.CPT
) -> float:
    """CPT value, or expected utility in ``eut`` mode"""
    if ValuationMode(mode) is ValuationMode.EUT:
        return float(np.dot(prospect.utilities, prospect.probabilities))
    ordered = prospect.sorted()
    pi_plus, pi_minus = decision_weights(ordered, params)
    values = np.asarray(value_fn(ordered.utilities, params), dtype=float)
    return float(np.dot(values, np.asarray(pi_plus) + np.asarray(pi_minus)))


def pass_prospect(u: DrivingUtilities, p_yield: float, mode: WeightingMode) -> Prospect:
    """
    Outcome probabilities attached to passing.

    ``paper_exact`` attaches the weight of ``p_yield`` to the non-yield outcome; ``rank_ordered``
    attaches each outcome's own probability.
    """
    if WeightingMode(mode) is WeightingMode.PAPER_EXACT:
        return Prospect([(u.u_pass_yield, 1.0 - p_yield), (u.u_pass_nonyield, p_yield)])
    return Prospect([(u.u_pass_yield, p_yield), (u.u_pass_nonyield, 1.0 - p_yield)])


def _check_gains(u: DrivingUtilities) -> None:
    for name, value in zip(("u_pass_yield", "u_pass_nonyield", "u_yield"), u.as_tuple()):
        if not np.isfinite(value):
            raise ValidationError(f"utility '{name}' is not finite", field=name)
        if value < 0:
            raise NegativeUtilityError(name, value)


def driving_value_arrays(
    u_pass_yield: np.ndarray,
    u_pass_nonyield: np.ndarray,
    u_yield: np.ndarray,
    p_yield: np.ndarray,
    alpha: float,
    gamma: float,
    mode: WeightingMode,
) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized pass/yield values for gains-only utilities (u0 = 0, lambda = 1)"""
    upy = np.asarray(u_pass_yield, dtype=float)
    upny = np.asarray(u_pass_nonyield, dtype=float)
    uy = np.asarray(u_yield, dtype=float)
    p = np.asarray(p_yield, dtype=float)
    v_py, v_pny, v_y = upy ** alpha, upny ** alpha, uy ** alpha

    if WeightingMode(mode) is WeightingMode.PAPER_EXACT:
        w = np.asarray(weighting_fn(p, gamma), dtype=float)
        v_pass = v_py * (1.0 - w) + v_pny * w
    else:
        # the better outcome takes the weight of its own probability
        top_is_py = upy >= upny
        p_top = np.where(top_is_py, p, 1.0 - p)
        w_top = np.asarray(weighting_fn(np.clip(p_top, 0.0, 1.0), gamma), dtype=float)
        v_top = np.where(top_is_py, v_py, v_pny)
        v_low = np.where(top_is_py, v_pny, v_py)
        v_pass = v_top * w_top + v_low * (1.0 - w_top)
    return v_pass, v_y


def driving_values(
    u: DrivingUtilities,
    p_yield: float,
    params: CptParams,
    mode: WeightingMode = WeightingMode.PAPER_EXACT,
) -> Tuple[float, float]:
    """CPT values (V_pass, V_yield) of the target vehicle"""
    if params.u0 != 0.0:
        raise ValidationError("driving values assume a zero reference utility", field="u0")
    if not 0.0 <= p_yield <= 1.0:
        raise ValidationError(f"p_yield must lie in [0, 1], got {p_yield}", field="p_yield")
    _check_gains(u)
    v_pass, v_yield = driving_value_arrays(
        u.u_pass_yield, u.u_pass_nonyield, u.u_yield, p_yield, params.alpha, params.gamma, mode
    )
    return float(v_pass), float(v_yield)


def expected_driving_values(
    u: DrivingUtilities, p_yield: float, mode: WeightingMode = WeightingMode.PAPER_EXACT
) -> Tuple[float, float]:
    """Expected-utility values under the same outcome-probability assignment as ``mode``"""
    prospect = pass_prospect(u, p_yield, mode)
    v_pass = prospect_value(prospect, CptParams(), ValuationMode.EUT)
    v_yield = prospect_value(Prospect([(u.u_yield, 1.0)]), CptParams(), ValuationMode.EUT)
    return v_pass, v_yield


def yield_probability(ttc_target: float, ttc_interacting: float) -> float:
    """Probability that the interacting vehicle yields; high when the target arrives first"""
    return float(expit(ttc_interacting - ttc_target))


def _value_gap(v_pass: float, v_yield: float) -> float:
    gap = v_pass - v_yield
    return 0.0 if abs(gap) < TIE_TOLERANCE else gap


def decision_probabilities(v_pass: float, v_yield: float) -> Tuple[float, float]:
    """Softmax over the two values; a tie gives exactly one half"""
    pr_pass = float(expit(_value_gap(v_pass, v_yield)))
    return pr_pass, 1.0 - pr_pass


def decide(v_pass: float, v_yield: float) -> Decision:
    """Argmax decision; ties go to yield, so PASS exactly when pr_pass exceeds one half"""
    return Decision.PASS if _value_gap(v_pass, v_yield) > 0.0 else Decision.YIELD
