"""Ready-made arm sets used by the bundled experiment configs."""
from __future__ import annotations

from .model import ArmParams, Kind

FIVE_ARM_MU0 = (0.1, 0.9, 0.3, 0.9, 0.3)
FIVE_ARM_MU1 = (0.9, 0.1, 0.9, 0.3, 0.9)
FIVE_ARM_R0 = (0.2, 0.3, 0.25, 0.4, 0.35)
FIVE_ARM_R1 = (0.9, 0.95, 0.8, 0.9, 0.6)
FIVE_ARM_ETA0 = (0.1, 0.2, 0.15, 0.3, 0.25)
FIVE_ARM_ETA1 = (0.6, 0.65, 0.5, 0.6, 0.3)
FIVE_ARM_PI = (0.2, 0.4, 0.3, 0.7, 0.5)
FIVE_ARM_Y = (1, 1, 1, 1, 1)

# (play while available, play while unavailable, rest while available)
AVAILABILITY_SETS = {
    "always": (1.0, 0.0, 1.0),
    "sticky": (0.8, 0.0, 0.7),
    "mixed": (0.8, 0.4, 0.7),
    "fragile": (0.35, 0.75, 0.9),
}


def five_arms(play_avail: float, play_unavail: float, rest_avail: float,
              rest_unavail: float = 0.0, kind: Kind = Kind.RESTED) -> list[ArmParams]:
    """Five heterogeneous arms sharing one set of availability probabilities."""
    return [
        ArmParams.with_availability(play_avail=play_avail, play_unavail=play_unavail,
                                    rest_avail=rest_avail, rest_unavail=rest_unavail,
                                    mu0=m0, mu1=m1, r0=r0, r1=r1, eta0=e0, eta1=e1, kind=kind)
        for m0, m1, r0, r1, e0, e1 in zip(FIVE_ARM_MU0, FIVE_ARM_MU1, FIVE_ARM_R0,
                                          FIVE_ARM_R1, FIVE_ARM_ETA0, FIVE_ARM_ETA1)
    ]


SHARED_ARM = dict(mu0=0.9, mu1=0.3, r0=0.2, r1=0.9, eta0=0.1, eta1=0.6)
SHARED_Y = (1, 0, 1, 0, 1)
SHARED_PI = FIVE_ARM_PI

# per-arm (play while available, play while unavailable, rest while available)
PER_ARM_AVAILABILITY = {
    "first": ((0.5, 0.7, 0.9), (0.5, 0.5, 0.5), (0.8, 0.9, 0.7), (0.5, 0.5, 0.5), (1.0, 0.0, 1.0)),
    "second": ((0.5, 0.7, 0.9), (0.3, 0.5, 0.6), (0.8, 0.9, 0.7), (0.5, 0.5, 0.5), (1.0, 0.2, 1.0)),
}


def shared_arms(which: str, kind: Kind = Kind.RESTED) -> list[ArmParams]:
    """Five copies of one arm that differ only in availability."""
    return [ArmParams.with_availability(play_avail=pa, play_unavail=pu, rest_avail=ra,
                                        rest_unavail=0.0, kind=kind, **SHARED_ARM)
            for pa, pu, ra in PER_ARM_AVAILABILITY[which]]


def threshold_demo_arm() -> ArmParams:
    """Single restless arm with availability 1/2 everywhere."""
    return ArmParams(mu0=0.1, mu1=0.9, r0=0.4, r1=0.95, eta0=0.1, eta1=0.65,
                     theta=((0.5, 0.5), (0.5, 0.5)), kind=Kind.RESTLESS)
