"""Shared fixtures for the prospect_drive test suite."""

from typing import List

import numpy as np
import pytest
import structlog

from prospect_drive.cpt import DrivingUtilities, decision_probabilities, driving_values
from prospect_drive.estimation import CptObservation
from prospect_drive.geometry import ReferencePath
from prospect_drive.kinematics import InteractionPair, Trajectory
from prospect_drive.models import CptParams, Decision, MotionLimits, UtilityConfig, WeightingMode
from prospect_drive.observability import reset_metrics

TRUE_ALPHA = 0.9827
TRUE_GAMMA = 0.6742


@pytest.fixture(autouse=True)
def fresh_metrics():
    reset_metrics()
    yield
    reset_metrics()


@pytest.fixture(autouse=True)
def default_logging():
    yield
    structlog.reset_defaults()


@pytest.fixture
def cfg_u() -> UtilityConfig:
    return UtilityConfig()


@pytest.fixture
def limits() -> MotionLimits:
    return MotionLimits()


@pytest.fixture
def east_path() -> ReferencePath:
    return ReferencePath.from_points([(-50.0, 0.0), (0.0, 0.0), (50.0, 0.0)], path_id="east")


@pytest.fixture
def north_path() -> ReferencePath:
    return ReferencePath.from_points([(0.0, -40.0), (0.0, 60.0)], path_id="north")


def constant_speed_pair(
    pair_id: str,
    target_start: float,
    target_speed: float,
    other_start: float,
    other_speed: float,
    samples: int = 10,
    dt: float = 0.1,
    label: Decision = None,
) -> InteractionPair:
    t = np.arange(samples) * dt
    return InteractionPair(
        pair_id,
        Trajectory(target_start + target_speed * t, dt),
        Trajectory(other_start + other_speed * t, dt),
        label,
    )


@pytest.fixture
def make_pair():
    return constant_speed_pair


def synthetic_observations(
    count: int,
    alpha: float = TRUE_ALPHA,
    gamma: float = TRUE_GAMMA,
    mode: WeightingMode = WeightingMode.PAPER_EXACT,
    seed: int = 7,
    argmax: bool = False,
) -> List[CptObservation]:
    """Gains-only frame observations labeled by a CPT agent with known parameters"""
    rng = np.random.default_rng(seed)
    params = CptParams.driving(alpha, gamma)
    observations = []
    for _ in range(count):
        u_pass_yield = rng.uniform(5.0, 15.0)
        u_pass_nonyield = rng.uniform(0.0, 5.0)
        u_yield = rng.uniform(u_pass_nonyield, u_pass_yield)
        p_yield = rng.uniform(0.02, 0.98)
        utilities = DrivingUtilities(u_pass_yield, u_pass_nonyield, u_yield)
        v_pass, v_yield = driving_values(utilities, p_yield, params, mode)
        pr_pass, _ = decision_probabilities(v_pass, v_yield)
        draw = rng.random()
        if argmax:
            label = Decision.PASS if pr_pass > 0.5 else Decision.YIELD
        else:
            label = Decision.PASS if draw < pr_pass else Decision.YIELD
        observations.append(CptObservation(utilities, p_yield, label))
    return observations


@pytest.fixture
def make_observations():
    return synthetic_observations
