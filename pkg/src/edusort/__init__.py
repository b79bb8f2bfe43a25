"""Educational assortative mating and household income inequality.

Interest-factor sorting measures on husband-by-wife education tables,
margin standardization by quadratic programming, decile Gini
coefficients and the random-matching / fixed-sorting counterfactuals.
"""

__version__ = "0.1.0"

from .counterfactual import (
    CounterfactualSpec,
    counterfactual_gini,
    fixed_sorting,
    random_matching,
)
from .errors import EduSortError
from .income import (
    JointDistribution,
    assign_deciles,
    equivalize,
    equivalize_all,
    gini,
    household_distribution,
    joint_distribution,
)
from .ingest import SampleFilter, SynthSpec, IncomeModel, generate_synthetic, load_couples, load_table, save_table
from .records import CoupleRecord, Couples
from .standardize import (
    ObjectiveVariant,
    StandardizationProblem,
    deviation_report,
    standardize_ipf,
    standardize_qp,
)
from .tables import (
    ContingencyTable,
    EducationSchema,
    WeightingScheme,
    build_table,
    diagonal_pam,
    interest_factors,
    overall_pam,
    pam_trend,
)
