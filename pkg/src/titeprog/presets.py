"""Built-in study presets for the reference simulation grids.

The two design sizes (24 and 18 evaluable patients) pair with their
calibrated indifference half-widths (0.10 and 0.09). Presets default to
weekly outcome detection (events surface at whole-week assessment visits),
which is what the reference operating characteristics assume; pass
``round_to_week=False`` for fully continuous detection.
"""

import math

from .core import DEFAULT_PRIOR_VAR, DesignConfig
from .scenarios import scenario_library
from .simulate import StudyConfig

DEFAULT_BASE_SEED = 20170816


def reference_design(sample_size: int = 24, phi: float = 0.5) -> DesignConfig:
    if sample_size == 24:
        halfwidth = 0.10
    elif sample_size == 18:
        halfwidth = 0.09
    else:
        raise ValueError("reference designs exist for N=24 and N=18 only")
    return DesignConfig(
        num_doses=5,
        target=0.25,
        window=8.0,
        sample_size=sample_size,
        phi=phi,
        start_dose=1,
        prior_sd=math.sqrt(DEFAULT_PRIOR_VAR),
        halfwidth=halfwidth,
        prior_mtd=3,
        accrual_interval=4.0,
    )


def paper_study(
    sample_size: int = 24,
    phi: float = 0.5,
    replicates: int = 10000,
    base_seed: int = DEFAULT_BASE_SEED,
    round_to_week: bool = True,
    workers: int | None = None,
) -> StudyConfig:
    design = reference_design(sample_size, phi)
    return StudyConfig(
        design=design,
        scenarios=tuple(scenario_library(design.target)),
        strategies=("A", "B", "C"),
        phis=(phi,),
        replicates=replicates,
        base_seed=base_seed,
        round_to_week=round_to_week,
        workers=workers,
    )


PRESETS = {
    "paper-n24-phi025": lambda **kw: paper_study(24, 0.25, **kw),
    "paper-n24-phi050": lambda **kw: paper_study(24, 0.50, **kw),
    "paper-n24-phi075": lambda **kw: paper_study(24, 0.75, **kw),
    "paper-n18-phi025": lambda **kw: paper_study(18, 0.25, **kw),
    "paper-n18-phi050": lambda **kw: paper_study(18, 0.50, **kw),
    "paper-n18-phi075": lambda **kw: paper_study(18, 0.75, **kw),
}


def preset_names() -> list:
    return sorted(PRESETS)


def load_preset(name: str, **overrides) -> StudyConfig:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        ) from None
    return factory(**overrides)
