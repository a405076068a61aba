"""Burmester-Desmedt group key exchange and an active single-link attack on it."""

from .attack import Attacker, AttackerState, attack_driver, choose_a, forge_x_list, run_attack
from .group import (
    GroupElement,
    GroupParams,
    Scalar,
    random_scalar,
    scalar_inverse,
    schnorr_group,
    toy_group,
)
from .protocol import (
    Message,
    PartyState,
    Phase,
    Round,
    closed_form_key,
    compute_key,
    product_check,
    round1,
    round2,
)
from .scenario import RunReport, ScenarioConfig, run_honest

__all__ = [
    "Attacker", "AttackerState", "attack_driver", "choose_a", "forge_x_list", "run_attack",
    "GroupElement", "GroupParams", "Scalar", "random_scalar", "scalar_inverse",
    "schnorr_group", "toy_group",
    "Message", "PartyState", "Phase", "Round", "closed_form_key", "compute_key",
    "product_check", "round1", "round2",
    "RunReport", "ScenarioConfig", "run_honest",
]
