"""
Thermal house with heater/cooler, thermostat hysteresis, activity-driven
occupant heat and weekly activity profiles. Rewards follow PMV comfort.
"""

import math
from enum import Enum, IntEnum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from ..utils.helpers import temp_c_to_f, temp_f_to_c
from .base import Environment, StepResult
from .comfort import ComfortModel, in_comfort_band, reward_from_pmv

SETPOINT_MIN_F = 60
SETPOINT_MAX_F = 80
HOURS_PER_WEEK = 168
RHO_CP_AIR = 1.2 * 1005.0  # J/(m3 K)
BODY_AREA_M2 = 1.8
EXHALED_BREATH_C = 34.0


class Activity(IntEnum):
    """Occupant activities (state component ``act`` in 1..6)."""
    SLEEPING = 1
    RELAXING = 2
    WATCHING_TV = 3
    COOKING = 4
    EXERCISING = 5
    NOT_AT_HOME = 6


class HvacMode(str, Enum):
    """Thermostat relay state."""
    IDLE = "idle"
    HEATING = "heating"
    COOLING = "cooling"


ACTIVITY_COMFORT: Dict[Activity, ComfortModel] = {
    Activity.SLEEPING: ComfortModel(met=0.8, clo=2.0, air_speed=0.1),
    Activity.RELAXING: ComfortModel(met=1.0, clo=1.0, air_speed=0.1),
    Activity.WATCHING_TV: ComfortModel(met=1.0, clo=0.5, air_speed=0.1),
    Activity.COOKING: ComfortModel(met=1.8, clo=0.7, air_speed=0.15),
    Activity.EXERCISING: ComfortModel(met=4.0, clo=0.3, air_speed=0.5),
    # comfort on return; the empty house itself carries no occupant load
    Activity.NOT_AT_HOME: ComfortModel(met=1.2, clo=0.8, air_speed=0.1),
}

# metabolic rate (met) and respiratory minute volume (L/min) driving occupant heat
OCCUPANT_MET: Dict[Activity, float] = {
    Activity.SLEEPING: 0.8,
    Activity.RELAXING: 1.0,
    Activity.WATCHING_TV: 1.0,
    Activity.COOKING: 1.8,
    Activity.EXERCISING: 4.0,
    Activity.NOT_AT_HOME: 0.0,
}
OCCUPANT_RMV: Dict[Activity, float] = {
    Activity.SLEEPING: 6.0,
    Activity.RELAXING: 8.0,
    Activity.WATCHING_TV: 8.0,
    Activity.COOKING: 15.0,
    Activity.EXERCISING: 40.0,
    Activity.NOT_AT_HOME: 0.0,
}


class HouseParams(BaseModel):
    """First-order thermal house; R*C gives the free-running time constant."""

    thermal_resistance: float = Field(default=0.004, gt=0, description="Envelope resistance R (K/W)")
    thermal_mass: float = Field(default=3.6e6, gt=0, description="Thermal capacity C (J/K)")
    heater_supply_c: float = Field(default=50.0, description="Heater air temperature (C)")
    cooler_supply_c: float = Field(default=10.0, description="Cooler air temperature (C)")
    airflow_w_per_k: float = Field(default=500.0, gt=0, description="Supply air mass flow times cp (W/K)")
    deadband_c: float = Field(default=2.0, gt=0, description="Thermostat band; relay engages at setpoint -/+ half")
    outdoor_mean_f: float = Field(default=50.0)
    outdoor_amplitude_f: float = Field(default=10.0, ge=0)
    outdoor_min_hour: float = Field(default=5.0, ge=0, lt=24)
    substep_s: float = Field(default=60.0, gt=0, le=3600)
    initial_temp_f: float = Field(default=68.0)
    relative_humidity: float = Field(default=50.0, ge=0, le=100)

    @property
    def time_constant_h(self) -> float:
        return self.thermal_resistance * self.thermal_mass / 3600.0

    def outdoor_c(self, hour_of_day: float) -> float:
        """Daily sinusoid with its minimum at outdoor_min_hour."""
        phase = 2.0 * math.pi * (hour_of_day - self.outdoor_min_hour) / 24.0
        return temp_f_to_c(self.outdoor_mean_f - self.outdoor_amplitude_f * math.cos(phase))

    @property
    def outdoor_min_f(self) -> float:
        return self.outdoor_mean_f - self.outdoor_amplitude_f


def occupant_load(activity: Activity) -> Tuple[float, float]:
    """
    Occupant heat as ``q = a - b * T_in``.

    Metabolic heat is constant; exhaled air adds ``rho*cp*RMV*(EBT - T_in)``.

    Returns:
        (a in W, b in W/K)
    """
    metabolic = OCCUPANT_MET[activity] * 58.15 * BODY_AREA_M2
    b = RHO_CP_AIR * OCCUPANT_RMV[activity] / 60000.0
    return metabolic + b * EXHALED_BREATH_C, b


def thermostat_mode(temp_c: float, setpoint_c: float, mode: HvacMode, deadband_c: float) -> HvacMode:
    """Relay with hysteresis: engage outside setpoint -/+ deadband/2, release at the setpoint."""
    half = deadband_c / 2.0
    if mode == HvacMode.HEATING:
        return HvacMode.IDLE if temp_c >= setpoint_c else HvacMode.HEATING
    if mode == HvacMode.COOLING:
        return HvacMode.IDLE if temp_c <= setpoint_c else HvacMode.COOLING
    if temp_c <= setpoint_c - half:
        return HvacMode.HEATING
    if temp_c >= setpoint_c + half:
        return HvacMode.COOLING
    return HvacMode.IDLE


def _linear_terms(mode: HvacMode, outdoor_c: float, load: Tuple[float, float], params: HouseParams) -> Tuple[float, float]:
    """``C dT/dt = A - B T`` for a fixed relay state."""
    a_occ, b_occ = load
    g = 0.0 if mode == HvacMode.IDLE else params.airflow_w_per_k
    supply = params.heater_supply_c if mode == HvacMode.HEATING else params.cooler_supply_c
    conduct = 1.0 / params.thermal_resistance
    big_b = g + conduct + b_occ
    big_a = g * supply + a_occ + conduct * outdoor_c
    return big_a, big_b


def _relay_threshold(temp_c: float, t_eq: float, setpoint_c: float, mode: HvacMode, half: float) -> Optional[float]:
    if mode != HvacMode.IDLE:
        return setpoint_c
    if t_eq < temp_c:
        return setpoint_c - half
    if t_eq > temp_c:
        return setpoint_c + half
    return None


def simulate_hour(
    temp_c: float,
    mode: HvacMode,
    setpoint_c: float,
    outdoor_c: float,
    activity: Activity,
    params: HouseParams,
) -> Tuple[float, HvacMode]:
    """
    Integrate one hour of ``C dT/dt = Q_hvac + Q_occ - (T - T_out)/R``.

    Each substep uses the exact exponential solution for the current relay
    state and is split at the instant the relay switches.

    Args:
        temp_c: Indoor temperature at the start (C)
        mode: Relay state at the start
        setpoint_c: Thermostat setpoint (C)
        outdoor_c: Outdoor temperature held for the hour (C)
        activity: Occupant activity during the hour
        params: House parameters

    Returns:
        (indoor temperature, relay state) after one hour
    """
    load = occupant_load(activity)
    half = params.deadband_c / 2.0
    elapsed = 0.0
    while elapsed < 3600.0 - 1e-9:
        dt = min(params.substep_s, 3600.0 - elapsed)
        # consume the substep, switching the relay wherever the trajectory crosses a threshold
        while dt > 1e-9:
            mode = thermostat_mode(temp_c, setpoint_c, mode, params.deadband_c)
            big_a, big_b = _linear_terms(mode, outdoor_c, load, params)
            t_eq = big_a / big_b
            rate = big_b / params.thermal_mass
            threshold = _relay_threshold(temp_c, t_eq, setpoint_c, mode, half)

            step = dt
            hit = False
            if threshold is not None and (temp_c - threshold) * (t_eq - threshold) < 0:
                t_cross = -math.log((threshold - t_eq) / (temp_c - t_eq)) / rate
                if t_cross < dt:
                    step, hit = max(t_cross, 0.0), True

            temp_c = threshold if hit else t_eq + (temp_c - t_eq) * math.exp(-rate * step)
            dt -= step
            elapsed += step
    return temp_c, mode


class ThermalState(BaseModel):
    """Physical state of the house and occupant."""

    model_config = ConfigDict(frozen=True)

    temp_c: float
    hvac: HvacMode = HvacMode.IDLE
    hour: int = Field(default=0, ge=0, description="Hours since the start of the simulation")
    activity: Activity = Activity.SLEEPING

    @property
    def temp_f(self) -> float:
        """Indoor temperature surfaced to the agent, clamped to [60, 80] F."""
        return min(float(SETPOINT_MAX_F), max(float(SETPOINT_MIN_F), temp_c_to_f(self.temp_c)))

    @property
    def hour_of_day(self) -> int:
        return self.hour % 24

    @property
    def s_id(self) -> int:
        """Activity x rounded temperature bucket (126 states)."""
        return (int(self.activity) - 1) * 21 + int(round(self.temp_f)) - SETPOINT_MIN_F

    @property
    def s_coarse(self) -> int:
        return int(self.activity) - 1


class OccupantProfile(BaseModel):
    """Weekly activity routine with random substitution."""

    name: str
    randomness: float = Field(..., ge=0, le=1, description="Probability a slot is replaced by a random activity")
    base_schedule: List[List[int]] = Field(..., description="7 x 24 grid of activity values")
    protected_hours: List[int] = Field(default_factory=lambda: list(range(6)), description="Night hours never substituted")

    def realize_week(self, rng: np.random.Generator) -> np.ndarray:
        """Draw one week: each unprotected slot is replaced with probability rho by a uniform activity."""
        week = np.array(self.base_schedule, dtype=np.int64)
        swap = rng.random(week.shape) < self.randomness
        swap[:, self.protected_hours] = False
        week[swap] = rng.integers(1, len(Activity) + 1, size=int(swap.sum()))
        return week


PROFILE_RANDOMNESS = {"H1": 0.05, "H2": 0.20, "H3": 0.40}


def _day(wake: int, leave: Optional[int], back: Optional[int], exercise: Optional[int], dinner: int, tv: int, bed: int) -> List[int]:
    day = [int(Activity.RELAXING)] * 24
    for h in range(24):
        if h < wake or h >= bed:
            day[h] = int(Activity.SLEEPING)
    day[wake] = int(Activity.COOKING)
    if leave is not None and back is not None:
        for h in range(leave, back):
            day[h] = int(Activity.NOT_AT_HOME)
    if exercise is not None:
        day[exercise] = int(Activity.EXERCISING)
    day[dinner] = int(Activity.COOKING)
    for h in range(tv, bed):
        day[h] = int(Activity.WATCHING_TV)
    return day


def generate_profiles(seed: int) -> Dict[str, OccupantProfile]:
    """
    Build the three occupant profiles.

    Every human has nightly sleep, workday absence, an exercise slot, meals and
    an evening of TV; block boundaries are jittered per human by up to an hour.

    Args:
        seed: Seed for the per-human jitter

    Returns:
        Profiles keyed H1, H2, H3 with randomness 0.05 / 0.20 / 0.40
    """
    rng = np.random.default_rng(seed)
    profiles = {}
    for name, rho in PROFILE_RANDOMNESS.items():
        j = rng.integers(-1, 2, size=6)
        wake = 6 + int(j[0] > 0)
        leave = 8 + int(j[1] > 0)
        back = 17 + int(j[2])
        dinner = back + 2
        tv = dinner + 1
        bed = 22 + int(j[3] > 0)
        weekend_out = 13 + int(j[4])
        weekday = _day(wake, leave, back, exercise=back, dinner=dinner, tv=tv, bed=bed)
        weekend = _day(wake + 2, weekend_out, weekend_out + 3, exercise=weekend_out + 3, dinner=19, tv=20, bed=23)
        weekend[11] = int(Activity.COOKING)
        schedule = [weekday] * 5 + [weekend] * 2
        profiles[name] = OccupantProfile(name=name, randomness=rho, base_schedule=[list(d) for d in schedule])
    return profiles


class ThermalHouseEnv(Environment):
    """
    Hourly thermal-house environment.

    Actions are setpoints 60..80 F; observations are a one-hot activity, the
    scaled indoor temperature and the hour of day on the unit circle.
    """

    observation_dim = 9
    action_count = SETPOINT_MAX_F - SETPOINT_MIN_F + 1
    n_states = len(Activity) * 21
    n_states_coarse = len(Activity)
    steps_per_day = 24
    k_max = 12

    def __init__(
        self,
        profile: OccupantProfile,
        rng: np.random.Generator,
        params: Optional[HouseParams] = None,
        episode_hours: int = HOURS_PER_WEEK,
    ):
        """
        Initialize the house.

        Args:
            profile: Occupant routine
            rng: Generator for activity realization
            params: House parameters (defaults when None)
            episode_hours: Hours between truncation flags
        """
        super().__init__(rng)
        self.profile = profile
        self.params = params or HouseParams()
        self.episode_hours = episode_hours
        self.week = profile.realize_week(rng)
        self.state = ThermalState(temp_c=temp_f_to_c(self.params.initial_temp_f), activity=self._activity_at(0))
        self._episode_steps = 0

    def _activity_at(self, hour: int) -> Activity:
        return Activity(int(self.week[(hour // 24) % 7, hour % 24]))

    def observation(self, state: Optional[ThermalState] = None) -> np.ndarray:
        st = state or self.state
        obs = np.zeros(self.observation_dim)
        obs[int(st.activity) - 1] = 1.0
        obs[6] = (st.temp_f - 70.0) / 10.0
        angle = 2.0 * math.pi * st.hour_of_day / 24.0
        obs[7] = math.sin(angle)
        obs[8] = math.cos(angle)
        return obs

    def reset(self) -> np.ndarray:
        """Restart at Monday 00:00 with a fresh week and the initial temperature."""
        self.week = self.profile.realize_week(self.rng)
        self.state = ThermalState(temp_c=temp_f_to_c(self.params.initial_temp_f), activity=self._activity_at(0))
        self._episode_steps = 0
        return self.observation()

    def switch_profile(self, profile: OccupantProfile) -> None:
        """Replace the occupant; the current week is redrawn from the new routine."""
        logger.info(f"Occupant switched from {self.profile.name} to {profile.name} at hour {self.state.hour}")
        self.profile = profile
        self.week = profile.realize_week(self.rng)
        self.state = self.state.model_copy(update={"activity": self._activity_at(self.state.hour)})

    def action_value(self, action: int) -> float:
        return float(SETPOINT_MIN_F + action)

    def transition(self, state: ThermalState, action: int, next_activity: Activity) -> Tuple[ThermalState, float, float]:
        """
        Deterministic one-hour transition.

        Args:
            state: Current state
            action: Setpoint index (0 -> 60 F)
            next_activity: Activity scheduled for the next hour

        Returns:
            (next state, reward, PMV of the elapsed hour)
        """
        action = self.check_action(action)
        setpoint_c = temp_f_to_c(self.action_value(action))
        outdoor = self.params.outdoor_c(state.hour_of_day + 0.5)
        temp_c, mode = simulate_hour(state.temp_c, state.hvac, setpoint_c, outdoor, state.activity, self.params)
        pmv = ACTIVITY_COMFORT[state.activity].pmv(temp_c)
        next_state = ThermalState(temp_c=temp_c, hvac=mode, hour=state.hour + 1, activity=next_activity)
        return next_state, reward_from_pmv(pmv), pmv

    def step(self, action: int) -> StepResult:
        """Advance one hour."""
        current = self.state
        next_hour = current.hour + 1
        if next_hour % HOURS_PER_WEEK == 0:
            self.week = self.profile.realize_week(self.rng)
        next_state, reward, pmv = self.transition(current, action, self._activity_at(next_hour))
        self.state = next_state
        self._episode_steps += 1

        info: Dict[str, Any] = {
            "s_id": current.s_id,
            "s_coarse": current.s_coarse,
            "truth": current.s_coarse,
            "phase": current.hour_of_day,
            "day": current.hour // 24,
            "a_value": self.action_value(action),
            "utility": pmv,
            "truncated": self._episode_steps % self.episode_hours == 0,
        }
        return self.observation(), reward, False, info

    def utility_summary(self, utilities: Sequence[float]) -> Dict[str, float]:
        """PMV-in-range percentage (the ranking score), PMV mean and STD."""
        values = np.asarray(utilities, dtype=np.float64)
        if values.size == 0:
            return {"score": 0.0, "in_range_pct": 0.0, "mean": 0.0, "std": 0.0}
        in_range = 100.0 * float(np.mean([in_comfort_band(v) for v in values]))
        return {"score": in_range, "in_range_pct": in_range, "mean": float(values.mean()), "std": float(values.std())}
