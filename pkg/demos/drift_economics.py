"""Train on the drift scenario, score later periods and report uptime / train-time ratios."""

import warnings

from packscope.classifiers import fit, preset
from packscope.corpus import drift_scenario, generate_dataset, to_dataset
from packscope.evaluation import chronological_eval, format_table

FAMILIES = ("KNN", "DT", "RF", "GBDT")
THRESHOLDS = (0.92, 0.95, 0.97)


def main() -> None:
    sets = {s.name: to_dataset(generate_dataset(s, seed=3)) for s in drift_scenario()}
    periods = [(k, v) for k, v in sets.items() if k.startswith("period")]
    fs_rows, eco_rows = [], []
    for family in FAMILIES:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = fit(preset(family), sets["train"])
        rep = chronological_eval(model, sets["baseline"], periods, THRESHOLDS, abscissa="period_end")
        fs_rows.append([family] + [f for _, f in rep.points()])
        eco_rows.append([family, rep.train_seconds] + [rep.uptimes[t] for t in THRESHOLDS]
                        + [rep.ratios[t] for t in THRESHOLDS])
    print(format_table(["classifier", "baseline"] + [p for p, _ in periods], fs_rows))
    print()
    print(format_table(["classifier", "train s"] + [f"uptime {t}" for t in THRESHOLDS]
                       + [f"ratio {t}" for t in THRESHOLDS], eco_rows))


if __name__ == "__main__":
    main()
