#!/usr/bin/env python3
"""Regenerate the benchmark CSVs under data/.

The three files are deterministic synthetic replicas of the well-known
credit-risk, recidivism, and income tables: same row counts and column
semantics, group proportions, favorable-outcome conventions, and group/label
dependence calibrated so an unconstrained classifier lands in the published
disparate-impact range. Regenerating with this script reproduces the shipped
files byte for byte (fixed PCG64 seed).

Usage: python3 scripts/generate_benchmark_data.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np

SEED = 20240214


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _bins(values, edges, names):
    idx = np.searchsorted(edges, values)
    return [names[i] for i in idx]


def make_german(rng, n=1000):
    """Credit scoring: protected group is age < 26, favorable label is
    good credit (1). Disadvantage enters through age-linked credit quality
    and a direct group effect."""
    young = (rng.random(n) < 0.19).astype(int)
    age = np.where(
        young == 1,
        rng.uniform(19.0, 26.0, n),
        np.minimum(26.0 + rng.gamma(2.2, 6.5, n), 75.0),
    )
    quality = rng.standard_normal(n) + 0.25 * (age - 38.0) / 12.0 - 0.12 * young
    duration = np.clip(np.round(np.exp(2.85 + 0.45 * rng.standard_normal(n)) - 0.9 * quality), 4, 72)
    amount = np.clip(np.round(np.exp(7.9 + 0.6 * rng.standard_normal(n) - 0.1 * quality)), 250, 20000)
    employment_years = np.clip(np.round((age - 18.0) * rng.uniform(0.1, 0.8, n)), 0, 40)
    installment_rate = rng.integers(1, 5, n)
    existing_credits = 1 + rng.binomial(3, 0.18, n)
    num_dependents = 1 + rng.binomial(1, 0.16, n)
    checking = _bins(
        quality + 0.6 * rng.standard_normal(n),
        [-0.8, 0.0, 0.9],
        ["overdrawn", "low", "mid", "none"],
    )
    savings = _bins(
        quality + 0.8 * rng.standard_normal(n),
        [0.2, 1.1],
        ["minimal", "moderate", "large"],
    )
    housing = _bins(
        quality + 1.0 * rng.standard_normal(n) + 0.02 * (age - 38.0),
        [-0.6, 1.3],
        ["rent", "own", "free"],
    )

    z = (
        1.12
        + 1.05 * quality
        - 0.016 * (duration - 21.0)
        - 0.00004 * (amount - 3300.0)
        + 0.012 * (employment_years - 8.0)
        - 0.10 * (installment_rate - 2.5)
        - 0.05 * young
    )
    good = (rng.random(n) < _sigmoid(z)).astype(int)

    header = [
        "checking_status",
        "duration_months",
        "credit_amount",
        "savings",
        "employment_years",
        "installment_rate",
        "age_years",
        "existing_credits",
        "num_dependents",
        "housing",
        "young",
        "credit_good",
    ]
    rows = [
        [
            checking[i],
            int(duration[i]),
            int(amount[i]),
            savings[i],
            int(employment_years[i]),
            int(installment_rate[i]),
            f"{age[i]:.1f}",
            int(existing_credits[i]),
            int(num_dependents[i]),
            housing[i],
            int(young[i]),
            int(good[i]),
        ]
        for i in range(n)
    ]
    return header, rows


def make_compas(rng, n=4000):
    """Recidivism: protected group flag 1, favorable label is NOT
    re-offending (0). Priors and the direct group effect carry the bias."""
    prot = (rng.random(n) < 0.51).astype(int)
    age = np.clip(18.0 + rng.gamma(2.0, 6.0, n), 18.0, 70.0)
    priors = rng.poisson(1.1 + 1.5 * prot) + rng.binomial(6, 0.08, n)
    juv_count = rng.binomial(2, 0.05 + 0.05 * prot)
    felony_charge = (rng.random(n) < 0.64).astype(int)
    male = (rng.random(n) < 0.80).astype(int)

    z = (
        -1.10
        + 0.155 * priors
        - 0.032 * (age - 30.0)
        + 0.28 * felony_charge
        + 0.28 * male
        + 0.30 * prot
    )
    recid = (rng.random(n) < _sigmoid(z)).astype(int)

    header = [
        "age_years",
        "priors_count",
        "juvenile_count",
        "felony_charge",
        "male",
        "race_protected",
        "two_year_recid",
    ]
    rows = [
        [
            f"{age[i]:.1f}",
            int(priors[i]),
            int(juv_count[i]),
            int(felony_charge[i]),
            int(male[i]),
            int(prot[i]),
            int(recid[i]),
        ]
        for i in range(n)
    ]
    return header, rows


def make_adult(rng, n=48842):
    """Income: protected group is female, favorable label is high income.
    Strong marital/occupation proxies plus a direct effect push the
    unconstrained model to near-zero favorable predictions for the
    protected group."""
    female = (rng.random(n) < 0.333).astype(int)
    age = np.clip(np.round(17.0 + rng.gamma(2.4, 9.5, n)), 17, 90)
    education_num = np.clip(np.round(10.0 + 2.6 * rng.standard_normal(n)), 1, 16)
    hours = np.clip(
        np.round(40.0 + 11.0 * rng.standard_normal(n) - 4.0 * female), 1, 99
    )
    married = (rng.random(n) < (0.62 - 0.22 * female)).astype(int)
    exec_prof = (rng.random(n) < (0.26 - 0.03 * female)).astype(int)
    has_gain = rng.random(n) < 0.08
    capital_gain = np.where(has_gain, np.round(np.exp(8.0 + 0.9 * rng.standard_normal(n))), 0.0)
    capital_gain = np.minimum(capital_gain, 99999.0)

    z = (
        -2.50
        + 0.30 * (education_num - 10.0)
        + 0.045 * (age - 38.0)
        - 0.00075 * (age - 38.0) ** 2
        + 0.030 * (hours - 40.0)
        + 1.55 * married
        + 0.85 * exec_prof
        + 0.28 * np.log1p(capital_gain)
        - 1.02 * female
    )
    high_income = (rng.random(n) < _sigmoid(z)).astype(int)

    header = [
        "age_years",
        "education_num",
        "hours_per_week",
        "married",
        "exec_professional",
        "capital_gain",
        "female",
        "high_income",
    ]
    rows = [
        [
            int(age[i]),
            int(education_num[i]),
            int(hours[i]),
            int(married[i]),
            int(exec_prof[i]),
            int(capital_gain[i]),
            int(female[i]),
            int(high_income[i]),
        ]
        for i in range(n)
    ]
    return header, rows


MANIFEST = """\
# Dataset manifest: one section per dataset, paths relative to this file.
[german]
path = german.csv
label = credit_good
protected = young
favorable = 1
task = clf
categorical = checking_status, savings, housing

[compas]
path = compas.csv
label = two_year_recid
protected = race_protected
favorable = 0
task = clf

[adult]
path = adult.csv
label = high_income
protected = female
favorable = 1
task = clf
"""


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def main(outdir="data"):
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(SEED))
    for name, maker in (("german", make_german), ("compas", make_compas), ("adult", make_adult)):
        header, rows = maker(rng)
        write_csv(out / f"{name}.csv", header, rows)
        label_col = header[-1]
        labels = np.array([r[-1] for r in rows], dtype=float)
        prot = np.array([r[-2] for r in rows], dtype=float)
        rate_p = labels[prot == 1].mean()
        rate_u = labels[prot == 0].mean()
        print(
            f"{name}: n={len(rows)} {label_col} rate={labels.mean():.3f} "
            f"protected share={prot.mean():.3f} label rate prot/unprot="
            f"{rate_p:.3f}/{rate_u:.3f}"
        )
    (out / "datasets.manifest").write_text(MANIFEST)


if __name__ == "__main__":
    main(*sys.argv[1:])
