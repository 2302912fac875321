"""Ordinality-aware binary cross-entropy for solar flare forecasting,
with the supporting magnetogram preprocessing, augmentation,
partitioning, skill-score and training machinery."""

__version__ = "0.1.0"

from .loss import (
    FlareClass,
    LossBatch,
    LossConfig,
    bce,
    bce_sf_batch,
    bce_sf_instance,
    beta_weight,
    binary_label,
    grad_bce_sf,
    ordinal_weight,
    sigmoid,
)
from .metrics import (
    ConfusionMatrix,
    SkillReport,
    SweepResult,
    UndefinedScoreError,
    ZoneSpec,
    confusion,
    css,
    hss,
    sweep_threshold,
    tss,
    write_report_csv,
    zone_report,
)
from .preprocess import (
    EmptyRegionError,
    SummedAreaTable,
    clamp_denoise,
    mask_crop,
    max_usflux_window,
    pad_or_select,
    scale_to_bytes,
    size_filter,
    summed_area_table,
)
from .augment import (
    AugmentSpec,
    gaussian_blur,
    hflip,
    polarity_inversion,
    random_noise,
    vflip,
)
from .dataset import (
    CatalogEvent,
    FlareCatalog,
    ManifestError,
    Sample,
    UndersampleSpec,
    flux_to_class,
    label_sample,
    load_manifest,
    partition,
    split_roles,
    undersample,
    write_manifest,
)
from .trainer import (
    ComparisonReport,
    ConfigError,
    PlateauScheduler,
    SampleSet,
    Scorer,
    SyntheticSpec,
    TrainConfig,
    TrainHistory,
    TrainingDivergedError,
    compare_protocol,
    gen_synthetic,
    pool_features,
    sgd_epoch,
    train,
)
