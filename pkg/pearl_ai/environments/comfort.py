"""
Predicted Mean Vote (PMV) thermal comfort model, ASHRAE 55 / ISO 7730 method.
"""

import math
from typing import Tuple

from pydantic import BaseModel, Field

from ..utils.validators import ComfortModelError

COMFORT_BAND = 0.5
MAX_ITERATIONS = 150


class ComfortModel(BaseModel):
    """Fixed comfort inputs for one activity."""

    met: float = Field(..., gt=0, description="Metabolic rate (met)")
    clo: float = Field(..., ge=0, description="Clothing insulation (clo)")
    air_speed: float = Field(default=0.1, ge=0, description="Relative air velocity (m/s)")
    rh: float = Field(default=50.0, ge=0, le=100, description="Relative humidity (%)")

    def pmv(self, temp_c: float) -> float:
        """PMV at an air temperature, radiant temperature equal to air temperature, clipped to [-3, 3]."""
        value, _ = pmv_ppd(temp_c, temp_c, self.met, self.clo, self.rh, self.air_speed)
        return max(-3.0, min(3.0, value))


def pmv_ppd(
    temp_air: float,
    temp_radiant: float,
    met: float,
    clo: float,
    rh: float,
    air_speed: float,
    wme: float = 0.0,
) -> Tuple[float, float]:
    """
    Predicted mean vote and predicted percentage dissatisfied.

    Args:
        temp_air: Air temperature (C)
        temp_radiant: Mean radiant temperature (C)
        met: Metabolic rate (met)
        clo: Clothing insulation (clo)
        rh: Relative humidity (%)
        air_speed: Relative air velocity (m/s)
        wme: External work (met)

    Returns:
        (PMV, PPD in %)
    """
    pa = rh * 10 * math.exp(16.6536 - 4030.183 / (temp_air + 235))
    icl = 0.155 * clo
    m = met * 58.15
    w = wme * 58.15
    mw = m - w
    fcl = 1 + 1.29 * icl if icl <= 0.078 else 1.05 + 0.645 * icl
    hcf = 12.1 * math.sqrt(air_speed)
    taa = temp_air + 273
    tra = temp_radiant + 273

    # clothing surface temperature by fixed-point iteration
    tcla = taa + (35.5 - temp_air) / (3.5 * icl + 0.1)
    p1 = icl * fcl
    p2 = p1 * 3.96
    p3 = p1 * 100
    p4 = p1 * taa
    p5 = 308.7 - 0.028 * mw + p2 * (tra / 100) ** 4
    xn = tcla / 100
    xf = tcla / 50
    hc = hcf
    n = 0
    while abs(xn - xf) > 0.00015:
        xf = (xf + xn) / 2
        hcn = 2.38 * abs(100.0 * xf - taa) ** 0.25
        hc = max(hcf, hcn)
        xn = (p5 + p4 * hc - p2 * xf**4) / (100 + p3 * hc)
        n += 1
        if n > MAX_ITERATIONS:
            raise ComfortModelError(
                f"clothing surface temperature did not converge (ta={temp_air}, met={met}, clo={clo})"
            )
    tcl = 100 * xn - 273

    hl1 = 3.05 * 0.001 * (5733 - 6.99 * mw - pa)
    hl2 = 0.42 * (mw - 58.15) if mw > 58.15 else 0.0
    hl3 = 1.7 * 0.00001 * m * (5867 - pa)
    hl4 = 0.0014 * m * (34 - temp_air)
    hl5 = 3.96 * fcl * (xn**4 - (tra / 100) ** 4)
    hl6 = fcl * hc * (tcl - temp_air)

    ts = 0.303 * math.exp(-0.036 * m) + 0.028
    pmv = ts * (mw - hl1 - hl2 - hl3 - hl4 - hl5 - hl6)
    ppd = 100.0 - 95.0 * math.exp(-0.03353 * pmv**4 - 0.2179 * pmv**2)
    return pmv, ppd


def pmv(temp_air: float, temp_radiant: float, met: float, clo: float, rh: float, air_speed: float) -> float:
    """PMV only."""
    return pmv_ppd(temp_air, temp_radiant, met, clo, rh, air_speed)[0]


def in_comfort_band(value: float) -> bool:
    return abs(value) <= COMFORT_BAND


def reward_from_pmv(value: float) -> float:
    """+1 inside the comfort band, otherwise -|PMV|."""
    return 1.0 if in_comfort_band(value) else -abs(value)
