from typing import Iterable, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .core import SpecError


class SettingsSchema(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class TailFitSettings(SettingsSchema):
    """Geometric ladder and decision thresholds of the divergence classifier."""

    ratio: float = Field(1.5, gt=1)
    points: int = Field(48, ge=8)
    tau_p: float = Field(0.05, gt=0)
    tau_q: float = Field(0.1, gt=0)
    q_boundary: float = Field(0.02, ge=0)
    burn_in: int = Field(8, ge=0)
    increment_ratio: float = Field(0.9, gt=0, lt=1)
    increment_rungs: int = Field(8, ge=2)
    direct_terms: int = Field(10_000, ge=100)
    clamp: float = Field(1e-300, gt=0)
    residual_limit: float = Field(1.0, gt=0)


class ConditionSettings(SettingsSchema):
    grid_points: int = Field(64, ge=8)
    grid_span: int = Field(40, ge=4)
    monotone_tol: float = Field(1e-9, ge=0)
    growth_margin: float = Field(10.0, gt=0)
    escalation_cap: float = Field(1e6, gt=1)
    numeric_derivative: bool = True
    derivative_step: float = Field(1e-6, gt=0)
    discrete_dense_limit: int = Field(10_000, ge=10)


class MomentSettings(SettingsSchema):
    k_max_continuous: int = Field(30, ge=8)
    k_max_discrete: int = Field(40, ge=8)
    carleman_k_min: int = Field(4, ge=1)
    tail_cutoff_nats: float = Field(60.0, gt=0)
    panel_octaves: int = Field(6, ge=1)
    epsrel: float = Field(1e-12, gt=0)


class MaximizerSettings(SettingsSchema):
    k_max: int = Field(60, ge=2)
    xtol: float = Field(1e-10, gt=0)
    patience: int = Field(8, ge=1)
    window_cap: float = Field(1e15, gt=1)
    bound_tol: float = Field(1e-8, ge=0)
    polish_window: float = Field(1e-6, gt=0, lt=1)


class VerdictSettings(SettingsSchema):
    domination_grid: int = Field(128, ge=8)
    domination_span: float = Field(1e6, gt=1)
    domination_orders: int = Field(20, ge=4)
    domination_slope_tol: float = Field(0.02, ge=0)


class Settings(SettingsSchema):
    tailfit: TailFitSettings = Field(default_factory=TailFitSettings)
    conditions: ConditionSettings = Field(default_factory=ConditionSettings)
    moments: MomentSettings = Field(default_factory=MomentSettings)
    maximizer: MaximizerSettings = Field(default_factory=MaximizerSettings)
    verdict: VerdictSettings = Field(default_factory=VerdictSettings)

    def with_overrides(
        self, overrides: Union[dict, Iterable[str]]
    ) -> "Settings":
        """Returns a copy with dotted-key overrides applied, e.g. {"tailfit.ratio": 1.3}."""
        if not isinstance(overrides, dict):
            pairs = {}
            for item in overrides:
                if "=" not in item:
                    raise SpecError(f"Setting '{item}' must have the form KEY=VALUE.")
                key, value = item.split("=", 1)
                pairs[key.strip()] = value.strip()
            overrides = pairs
        data = self.model_dump()
        for key, value in overrides.items():
            section, _, name = key.partition(".")
            if section not in data or name not in data[section]:
                raise SpecError(f"Unknown setting '{key}'.")
            data[section][name] = value
        try:
            return Settings.model_validate(data)
        except ValidationError as e:
            raise SpecError(f"Invalid setting: {e.errors()[0]['msg']}")
