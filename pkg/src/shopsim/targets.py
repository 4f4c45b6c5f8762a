"""Reference operating targets for the default model configuration.

Previously published measurements of this storefront model under the three
shipped scenarios. The exact session-graph wiring behind those numbers is not
fully recoverable, so these are diagnostic targets: the oracle report prints
model-vs-reference deltas without gating anything on them.
"""

from __future__ import annotations

__all__ = ["REFERENCE_CRITICAL_RATES", "REFERENCE_SESSION_METRICS", "comparison_rows"]

REFERENCE_CRITICAL_RATES = {"S1": 14.78, "S2": 19.81, "S3": 24.28}

REFERENCE_SESSION_METRICS = {
    "S1": {
        "pm1": {"Browse": 0.84909, "Search": 0.84773, "AddToCart": 1.03331, "Checkout": 0.50874},
        "pm2": {"Browse": 0.26869, "Search": 0.26897, "Checkout": 0.46234},
        "pm3": 0.1075,
        "pm4": 189.4,
        "pm5": 0.5,
        "pm6": {"Browse": 50.94720, "Search": 50.89374, "Checkout": 87.58523},
        "pm7": 0.1962,
        "pm8": 3.20799,
        "pm9": 0.9859,
        "pm10": 0.863179,
        "pm11": 0.157805,
    },
    "S2": {
        "pm1": {"Browse": 0.74141, "Search": 0.74106, "AddToCart": 0.62983, "Checkout": 0.30612},
        "pm2": {"Browse": 0.31117, "Search": 0.31242, "Checkout": 0.37641},
        "pm3": 0.0893,
        "pm4": 142.6,
        "pm5": 0.3,
        "pm6": {"Browse": 44.54833, "Search": 44.37167, "Checkout": 53.67539},
        "pm7": 0.4062,
        "pm8": 2.41300,
        "pm9": 0.9885,
        "pm10": 0.507155,
        "pm11": 0.120595,
    },
    "S3": {
        "pm1": {"Browse": 0.68267, "Search": 0.68317, "AddToCart": 0.41752, "Checkout": 0.20076},
        "pm2": {"Browse": 0.35036, "Search": 0.35155, "Checkout": 0.29809},
        "pm3": 0.0727,
        "pm4": 116.3,
        "pm5": 0.2,
        "pm6": {"Browse": 40.88380, "Search": 40.74863, "Checkout": 34.66748},
        "pm7": 0.5382,
        "pm8": 1.976329,
        "pm9": 0.9902,
        "pm10": 0.321171,
        "pm11": 0.093406,
    },
}


def comparison_rows(scenario: str, model_values: dict) -> list[dict]:
    """Flat (metric, reference, model, delta%) rows for the metrics present in
    both the reference table and ``model_values``.

    ``model_values`` uses the same keys as the reference table; nested metric
    maps (pm1/pm2/pm6) are flattened as e.g. ``pm1[Browse]``.
    """
    reference = REFERENCE_SESSION_METRICS.get(scenario)
    if reference is None:
        return []
    rows = []

    def add(metric: str, ref, model) -> None:
        if model is None:
            return
        delta = (model - ref) / ref * 100.0 if ref else float("nan")
        rows.append({"metric": metric, "reference": ref, "model": model, "delta_pct": delta})

    for key, ref_value in reference.items():
        model_value = model_values.get(key)
        if isinstance(ref_value, dict):
            if not isinstance(model_value, dict):
                continue
            for sub, ref_sub in ref_value.items():
                add(f"{key}[{sub}]", ref_sub, model_value.get(sub))
        else:
            add(key, ref_value, model_value)
    return rows
