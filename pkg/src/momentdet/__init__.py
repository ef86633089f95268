from .catalog import catalog, catalog_entry, load_spec_file, load_spec_json
from .client import DeterminacyClient
from .core import (
    VERSION,
    ContradictionError,
    DomainError,
    InvalidTransformError,
    MomentDetException,
    NumericError,
    SpecError,
    TraceInvariantError,
)
from .distmodel import (
    CatalogEntry,
    DensitySpec,
    PmfSpec,
    ceiling_u_variant,
    eval_log_density,
    floor_discretize,
    log_mass,
    perturb_bounded_sin,
    square_pushforward,
    symmetrize_pmf,
    symmetrize_sqrt,
    u_ratio,
)
from .schemas import (
    Case,
    Conclusion,
    ConditionId,
    ConditionVerdict,
    DivergenceClass,
    RuleId,
    SupportKind,
)
from .settings import Settings

__version__ = VERSION
