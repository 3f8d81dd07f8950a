"""Training-free merging of feed-forward networks that differ in depth and
width: depth alignment by dynamic programming over layer similarities,
width alignment by permutation matching or elastic neuron zipping, and an
evaluation harness for joint accuracy and loss barriers.
"""

from .data import Dataset, concat_datasets, load_dataset, save_dataset
from .depth_align import SegmentPlan, best_alignment_path, brute_force_align, lma_align, sma_align
from .errors import FormatError, HetmergeError, ShapeError, ValidationError
from .evaluation import (
    BarrierReport,
    EvalReport,
    cross_entropy_loss,
    evaluate,
    interpolate,
    loss_barrier,
)
from .features import (
    CalibrationBatch,
    FeatureCache,
    capture_features,
    load_feature_cache,
    sample_calibration,
    save_feature_cache,
)
from .merger import (
    MergeRecipe,
    aligned_average,
    average_weights,
    identity_alignment_plan,
    merge_depth_hetero,
    merge_depth_hetero_residual,
    permute_to_reference,
)
from .model import (
    ExtensionPlan,
    Head,
    LayerSpec,
    ModelBundle,
    extend_model,
    extension_plan_from_segments,
    forward,
    load_model,
    model_fingerprint,
    save_model,
)
from .similarity import (
    LayerSimMatrix,
    NeuronCorrMatrix,
    layer_similarity_matrix,
    linear_cka,
    neuron_correlation,
)
from .toy import TaskSpec, ToyTasks, gen_tasks, mlp_arch, residual_arch, train_mlp
from .width_align import (
    AlignmentPlan,
    MergeMap,
    build_alignment_plan,
    elastic_zip,
    identity_pair_map,
    merge_map_from_groups,
    permutation_match,
)

__version__ = "0.1.0"
