"""Successful attacks under compliant and oblivious policies

Runs the small bundled scenario with every node on the compliant seed
policy, then on the oblivious one, over the same seeds.

    python3 demos/attack_resistance.py [runs]
"""
import sys

from compliance_egta.ibr import (SEED_POLICIES, load_scenario, run_simulation,
                                 uniform_policies)


def main(runs=10):
    cfg = load_scenario('desk').network
    print('seed  compliant  oblivious')
    totals = {'C': 0, 'N': 0}
    for seed in range(runs):
        row = {}
        for label in totals:
            res = run_simulation(cfg, uniform_policies(
                cfg, SEED_POLICIES[label]), seed=seed)
            row[label] = res.aggregate['attacks_succeeded']
            totals[label] += row[label]
        print('{:4d}  {:9d}  {:9d}'.format(seed, row['C'], row['N']))
    print('total {:9d}  {:9d}'.format(totals['C'], totals['N']))


if __name__ == '__main__':
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 10)
