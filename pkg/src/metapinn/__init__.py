"""Reduced-order surrogates for parametric PDEs.

Full physics-informed networks are trained at greedily selected parameter
values and then frozen as the activation functions of a one-hidden-layer
meta-network; new parameter queries only train the output coefficients
against the PDE residual, at a cost independent of the full network size.
"""

__version__ = "0.1.0"

from .kernels import BACKEND, HAVE_COMPILED
from .mlp import (
    ExtendedState,
    MLPParams,
    extended_forward,
    extended_forward_batch,
    init_params,
    loss_grad_params,
    mlp_forward,
    param_count,
)
from .adam import AdamState, adam_step
from .pde import (
    ALLEN_CAHN,
    BURGERS,
    KLEIN_GORDON,
    CollocationSet,
    ParameterDomain,
    PDEDefinition,
    allen_cahn_residual,
    boundary_initial_terms,
    burgers_residual,
    filter_stiff_points,
    get_pde,
    kg_residual,
    sample_collocation,
)
from .training import (
    FullPINN,
    SAWeights,
    TrainConfig,
    TrainingDivergence,
    pinn_loss,
    train_full_pinn,
    train_sa_pinn,
)
from .reduced import (
    GptModel,
    OnlineConfig,
    OnlineDivergence,
    PrecomputedBasis,
    StiffFilter,
    gpt_grad,
    gpt_loss,
    gpt_predict,
    init_coeffs,
    online_train,
    precompute_basis,
)
from .greedy import (
    GreedyConfig,
    GreedyRound,
    run_offline,
    scan_indicators,
    uniform_baseline,
    validate_history,
)
from .evaluation import (
    ErrorReport,
    TimingCurve,
    error_metrics,
    evaluate_test_set,
    svd_decay_report,
    timing_benchmark,
)
