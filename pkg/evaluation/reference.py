"""Published per-source RMSE values for the underdetermined benchmark"""
from typing import Dict, List, Optional

from evaluation.metrics import EvalReport, reports_from_values

# scenario tag -> variant -> (Source 1, Source 2, Source 3, Average)
REFERENCE_TABLES: Dict[str, Dict[str, tuple]] = {
    'underdetermined': {
        'gp-avae': (0.8494, 0.4021, 0.6941, 0.6485),
        'half-gp-vae': (0.8468, 0.1736, 0.7256, 0.582),
        'half-gp-avae': (0.6981, 0.3317, 0.5185, 0.5161),
    },
    'underdetermined-ee': {
        'gp-avae': (0.8488, 0.3994, 0.694, 0.6474),
        'half-gp-vae': (0.5716, 0.5699, 0.5854, 0.5756),
        'half-gp-avae': (0.2653, 0.1449, 0.2716, 0.2272),
    },
}


def reference_key(scenario: str, ee_enabled: bool) -> Optional[str]:
    """Reference table for a run, or None if nothing was published for it"""
    if scenario != 'underdetermined':
        return None
    return 'underdetermined-ee' if ee_enabled else 'underdetermined'


def reference_reports(key: str, variants: Optional[List[str]] = None) -> List[EvalReport]:
    table = REFERENCE_TABLES[key]
    chosen = variants or list(table)
    return reports_from_values({v: table[v][:-1] for v in chosen if v in table}, scenario=key)


def reference_average(key: str, variant: str) -> Optional[float]:
    row = REFERENCE_TABLES.get(key, {}).get(variant)
    return row[-1] if row else None
