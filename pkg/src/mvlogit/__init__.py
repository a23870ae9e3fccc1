"""Bayesian multivariate logistic regression for superiority and inferiority
decisions in two-arm trials with multiple binary outcomes."""

__version__ = "0.1.0"

from .decision import (DecisionRule, decide, decision_probability, default_p_cut, evaluate,
                       in_region, rejection_probability)
from .effects import (EffectSample, PopulationSpec, dirichlet_reference, effects_at_fixed_x,
                      effects_empirical_marginal, phi_to_theta, theta_to_delta, weighted)
from .elicitation import BeliefSet, elicit_joint_probs, elicit_prior_means
from .estimator import MultivariateLogitRegression, TreatmentDesign
from .exceptions import (ChainError, ConfigurationError, ConsistencyError, ElicitationError,
                         EmptySubpopulationError, ImproperPosteriorError, InfeasibleDesignError,
                         IngestionError, MvlogitError, UnsupportedScopeError, ValidationError)
from .gibbs import ChainConfig, NormalPrior, PosteriorSample, gelman_rubin, run_chains
from .outcomes import (OutcomeMatrix, TrialDataset, build_outcome_matrix, encode_response,
                       inverse_mlogit, linear_predictors, log_likelihood)
from .planning import DesignTargets, mvn_cdf, required_n
from .polyagamma import pg1_mean, pg1_var, sample_pg1
from .simulation import (DgmSpec, Scenario, SimAnalysis, calibrate_dgm, generate_dataset,
                         run_replications, simulate_direct_power)
