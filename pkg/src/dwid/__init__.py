"""dwid: dropout-robust weighted averaging for diffusion-weighted imaging.

Compensates cardiac-motion signal dropouts in multi-repetition DWI slices
by locally adaptive weighted averaging, with the comparison methods,
ADC/noise quantification, and a synthetic phantom generator needed to
evaluate the approach end to end.
"""

from .container import (
    LABEL_CLEAN,
    LABEL_CORRUPT,
    LABEL_UNKNOWN,
    RepetitionStack,
    Roi,
    SliceSet,
    read_repetition_stack,
    read_stack,
    write_repetition_stack,
    write_stack,
)
from .errors import DwidError, ParameterError, ValidationError
from .metrics import (
    binned_analysis,
    classification_scores,
    roc_auc,
    roc_curve,
    select_threshold,
)
from .phantom import PhantomSpec, default_spec, rician_corrupt, synthesize
from .pipeline import (
    METHODS,
    MethodSpec,
    make_ground_truth,
    make_input_subset,
    run_method,
)
from .quant import AdcMap, NoiseMap, adc_map, dropout_ratio, relative_noise_map, roi_mean
from .reference import (
    PredictionRecord,
    ReferenceSubset,
    all_repetitions,
    baseline_classifier,
    read_predictions,
    subset_from_labels,
    subset_from_mask,
    subset_from_predictions,
    write_predictions,
)
from .weighting import (
    AwaParams,
    PatchStats,
    ReferenceFields,
    WeightMaps,
    awa_weights,
    patch_stats,
    reference_fields,
    uniform_weights,
    weight_function,
    weighted_average,
)

__version__ = "0.1.0"
