"""Linear reward-inaction two-armed bandit under deterministic, ergodic, Markov and i.i.d. payoffs."""

from .bandit import (BanditConfig, BanditState, BrakeDiagnostics, Decomposition,
                     MeanFieldConfig, RunRecord, brake_step, check_sf_monotone,
                     decompose_step, mean_field_trajectory, run, step)
from .payoffs import (DeviationTracker, IidBernoulli, MarkovIndicator, RateEnvelope,
                      Rotation, ScriptedPayoff, check_e_phi, deviation_stats, next_pair,
                      phi_eval, stationary_mean)
from .report import ConditionReport, HorizonOverrun, InternalConsistencyError
from .schedule import (Power, PrefixTables, Rational, Scripted, build_prefix, check_lemma1_caps,
                       check_s1, check_s2, check_sandwich, check_square_summable)

__version__ = "0.1.0"
