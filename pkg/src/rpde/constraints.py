"""Initial/boundary condition enforcement.

Hard assignment composes the raw network with closed-form factors so the
wrapped output satisfies the conditions identically for any parameters:

    u = C(coords) + g(coords) * net(coords, p)

where C carries the prescribed values and g vanishes on the constraint
manifold. Soft assignment instead adds weighted squared condition
residuals to the loss.

Both paths work on ``Jet2`` operands, so every wrapped quantity carries
exact directional derivatives through the product and chain rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

from .autodiff import Jet2
from .errors import UsageError

# A coordinate bundle maps coordinate names ("t", "x", "y") to jets seeded
# along whichever direction is being differentiated.
CoordJets = Mapping[str, Jet2]


@dataclass(frozen=True)
class TrialForm:
    """Closed-form (C, g) pair defining the hard-constrained trial function."""

    offset: Callable[[CoordJets], Jet2]  # C: satisfies all IC/BC, no parameters
    multiplier: Callable[[CoordJets], Jet2]  # g: zero on the IC/BC manifold


def hard_wrap(trial: TrialForm, net_out: Jet2, coords: CoordJets) -> Jet2:
    """Trial-function value C + g*net with exact jets.

    On the constraint manifold g vanishes, so the value is independent of
    the network output there.
    """
    return trial.offset(coords) + trial.multiplier(coords) * net_out


@dataclass(frozen=True)
class PenaltyWeights:
    """Weights of the squared initial/boundary residual penalties."""

    lam_ic: float = 1.0
    lam_bc: float = 1.0

    def __post_init__(self):
        if self.lam_ic < 0.0 or self.lam_bc < 0.0:
            raise UsageError("penalty weights must be nonnegative")


def soft_penalty(residual_ic, residual_bc, weights: PenaltyWeights):
    """lam_ic * residual_ic**2 + lam_bc * residual_bc**2 (elementwise)."""
    return weights.lam_ic * residual_ic**2 + weights.lam_bc * residual_bc**2
