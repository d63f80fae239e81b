"""causagen: causally conditioned autoregressive synthetic tabular data
generation, causal discovery, and evaluation."""

from .errors import CausagenError, CiTestError, DataError, GraphError, SchemaError
from .generate import GenerationRequest, generate
from .graphs import (
    CausalDag,
    Cpdag,
    GenerationPlan,
    build_plan,
    is_fully_directed,
    minimal_cpdag,
    reverse_topological_order,
    topological_order,
    v_structures,
)
from .discovery import (
    CiDispatch,
    CiTestResult,
    GraphQuality,
    fisher_z,
    g2_test,
    graph_quality,
    meek_closure,
    pc_stable,
)
from .metrics import (
    MetricReport,
    MixedCorrelationMatrix,
    ate_from_table,
    cmd,
    delta_ate,
    evaluate_tables,
    gower,
    kmtvd,
    mixed_correlation,
    nnaa,
    spurious_report,
)
from .samplers import BootstrapSampler, CartSampler, LinearGaussianSampler, make_sampler
from .bridge_client import BridgeSampler
from .scm import (
    CategoricalTable,
    Constant,
    GaussianRoot,
    Intervention,
    Linear,
    Scm,
    analytic_ate,
    builtin_collider_scm,
    intervene,
    interventional_arms,
    sample,
)
from .stats import (
    ComparisonResult,
    hodges_lehmann,
    hl_confidence_interval,
    holm,
    median_range_ci,
    sensitivity_range,
    wilcoxon_pratt,
)
from .table import (
    ColumnSchema,
    SplitSpec,
    Table,
    fixed_split,
    load_schema,
    load_table,
    reorder_columns,
    save_schema,
    save_table,
)
from .harness import (
    AteSpec,
    BuiltinSource,
    ExperimentConfig,
    ExternalSource,
    RunRecord,
    StrategySpec,
    aggregate_and_compare,
    run_ate_experiment,
    run_quality_experiment,
    run_sensitivity,
)

__version__ = "0.1.0"
