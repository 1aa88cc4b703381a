"""Guided synthesis and editing with diffusion SDEs at desk scale.

Noise a guide part-way along the forward SDE (to time t0), then integrate the
reverse SDE back with an exact analytic mixture score, a small learned score
net, or a zero stub. Includes masked editing, class-conditional guidance, the
realism/faithfulness trade-off sweep, an interactive t0 bisection, and an HTTP
editing service.
"""

from ._backend import backend_name
from .errors import (
    DomainError,
    ProtocolError,
    ResolutionError,
    SdeditError,
    ShapeMismatchError,
    TrainingError,
)
from .metrics import (
    BoundCheckReport,
    FaithfulnessScore,
    MmdScore,
    TradeoffPoint,
    TradeoffReport,
    check_deviation_bound,
    faithfulness,
    mmd_kid,
    deviation_bound,
    tradeoff_sweep,
)
from .netpbm import decode_netpbm, encode_netpbm, read_netpbm, write_netpbm
from .presets import ModelPreset, builtin_presets, load_preset_dir, resolve_presets
from .sampler import (
    FEEDBACK_ACCEPT,
    FEEDBACK_MORE_FAITHFUL,
    FEEDBACK_MORE_REALISTIC,
    EditMask,
    Guide,
    SampleResult,
    SdeditConfig,
    T0SearchState,
    forward_perturb,
    reverse_step_ve,
    reverse_step_vp,
    sdedit,
    sdedit_class_conditional,
    sdedit_masked,
    t0_binary_search,
)
from .schedules import (
    SCHEDULE_PRESETS,
    TimeGrid,
    VeSchedule,
    VpSchedule,
    load_schedule,
    make_time_grid,
    schedule_from_config,
)
from .scorenet import DsmBatchLoss, MlpScoreNet, dsm_loss, load_weights, save_weights, train_score
from .scores import (
    AnalyticGmmScore,
    GmmClassifier,
    GmmSpec,
    ScoreModel,
    ZeroScore,
    class_posterior_grad,
)
from .strokes import (
    Palette,
    default_stroke_kernel,
    mask_from_edit,
    median_filter,
    quantize_adaptive,
    simulate_stroke,
)

__version__ = "0.1.0"
