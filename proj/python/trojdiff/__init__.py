from trojdiff._core import (
    ConfigError,
    NoiseSchedule,
    ParameterError,
    SampleResult,
    TrojanCoefficients,
    Trigger,
    blend_trigger,
    ddim_sigma,
    ddim_subsequence,
    diffuse,
    knn_precision,
    knn_recall,
    linear_beta_schedule,
    mse_to_target,
    patch_trigger,
    posterior,
    run,
    sample_checkpoint,
    sample_gaussian_oracle,
    solve_trojan_coefficients,
    validate_config,
)

__all__ = [name for name in dir() if not name.startswith("_")]
