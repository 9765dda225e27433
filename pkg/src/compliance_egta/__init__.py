"""Compliance analysis of parametric protocols with empirical games"""
from compliance_egta.analysis import (Candidate, CandidateSet, Subgame,
                                      game_analysis,
                                      maximal_complete_subgames, regret,
                                      replicator_dynamics)
from compliance_egta.game import (EmpiricalGame, MixedProfile, ParamDomain,
                                  PayoffDatabase, PureProfile, RoleSpec,
                                  Strategy)
from compliance_egta.inner_loop import InnerLoopConfig, run_inner_loop
from compliance_egta.scheduler import Scheduler

__version__ = '0.1.0'
