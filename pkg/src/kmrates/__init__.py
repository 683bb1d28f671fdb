"""Krasnoselski-Mann iteration in geodesic spaces, with computable
rate-of-asymptotic-regularity certificates and numerical verification
of the geometry they rely on."""

from .geometry import (GeodesicSpace, GeometryError, InvalidPointError,
                       Sampler, AxiomReport, check_w_axioms,
                       check_cn_inequality, check_segment_identities,
                       check_metric_axioms, check_midpoint_uniqueness)
from .spaces import (EuclideanSpace, HyperboloidSpace, StarTreeSpace,
                     TreePoint, make_euclidean, make_hyperboloid,
                     make_star_tree, space_from_descriptor)
from .convexity import (Modulus, eta_cat0, constant_modulus, eta_monotone,
                        monotonized, gamma_factor, groetsch_coefficient,
                        modulus_from_name, check_uc_inequality,
                        check_uc_lambda_inequality)
from .operators import (Operator, ConvexSet, BallSet, BoxSet, SubtreeSet,
                        WholeSpaceSet, make_identity, make_rotation,
                        make_hyperboloid_rotation, make_edge_swap,
                        make_scaling, make_metric_projection, averaged,
                        compose, check_nonexpansive)
from .iteration import (LambdaSchedule, constant_schedule, list_schedule,
                        alternating_schedule, IterationTrace, IterationError,
                        km_step, run_km, witness_theta, alpha,
                        check_residual_monotone, check_km_growth,
                        DescentCheckParams, check_main_lemma,
                        check_main_lemma_tilde, check_summed_descent,
                        check_main_lemma_along, check_summed_descent_auto,
                        write_trace_csv, POINT_CAP, WITNESS_CUTOFF)
from .rates import (RateBound, ThetaFn, as_fraction, theta_closed_form,
                    theta_from_schedule, theta_from_callable,
                    ishikawa_bound, groetsch_bound, groetsch_bound_tilde,
                    constant_lambda_bound, constant_lambda_bound_tilde,
                    cat0_bound, cat0_constant_bound, cat0_inner)
from .harness import (ConfigError, ExperimentConfig, ExperimentReport,
                      EpsRow, parse_config, load_config, run_experiment,
                      run_checks, build_trace, applicable_bounds,
                      comparison_table, render_report_text,
                      render_report_csv, render_table_text,
                      render_table_csv, format_value)

__version__ = "0.1.0"
