"""Introduction-based routing simulator used as a payoff oracle"""
from compliance_egta.ibr.network import NetworkConfig, build_topology
from compliance_egta.ibr.oracle import IBROracle, Scenario, load_scenario
from compliance_egta.ibr.policy import (SEED_POLICIES, PolicyParams,
                                        ibr_compliance_spec, seed_strategy)
from compliance_egta.ibr.sim import (PayoffWeights, SimResult, node_payoff,
                                     run_simulation, uniform_policies)
